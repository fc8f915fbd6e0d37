"""Signed triangle test and small-n distribution distances between G(n, p) and Geo_d(n, p).

The signed triangle count is evaluated from exact integer counts of the
triples carrying 0, 1, 2 or 3 edges, so relabelling a graph cannot change the
floating point result.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .errors import DomainError, UnsupportedSizeError
from .graphs import GraphSample, _check_p, pair_arrays, pair_count, sample_er_batch, sample_geo_batch
from .rng import RngStream, as_generator, as_stream, chunk_sizes, map_indexed
from .sphere import sample_cap_latitude, tau_of_p

MAX_ENUMERATION_N = 5


# --- signed triangle statistic ----------------------------------------------

def _triple_weights(p: float):
    # weight of a triple carrying e edges: (1 - p)^e (-p)^(3 - e)
    return [(1.0 - p) ** e * (-p) ** (3 - e) for e in range(4)]


def _combine(counts, p: float) -> float:
    return math.fsum(int(c) * w for c, w in zip(counts, _triple_weights(p)))


def triple_edge_counts(edges: np.ndarray, n: int) -> np.ndarray:
    """Counts (N0, N1, N2, N3) of vertex triples with 0..3 edges, one row per graph."""
    edges = np.atleast_2d(np.asarray(edges, dtype=bool))
    size = edges.shape[0]
    rows, cols = pair_arrays(n)
    adj = np.zeros((size, n, n), dtype=np.int64)
    adj[:, rows, cols] = edges
    adj[:, cols, rows] = edges
    deg = adj.sum(axis=2)
    n3 = np.einsum("bij,bjk,bki->b", adj, adj, adj) // 6
    n2 = (deg * (deg - 1) // 2).sum(axis=1) - 3 * n3
    e = edges.sum(axis=1, dtype=np.int64)
    n1 = e * (n - 2) - 2 * n2 - 3 * n3
    n0 = math.comb(n, 3) - n1 - n2 - n3
    return np.stack([n0, n1, n2, n3], axis=1)


def signed_triangle_statistic(g: GraphSample, p: float) -> float:
    """T(G) = sum over triples i<j<k of (G_ij - p)(G_jk - p)(G_ik - p)."""
    _check_p(p)
    if g.n < 3:
        return 0.0
    return _combine(triple_edge_counts(g.edges, g.n)[0], p)


def signed_triangle_batch(edges: np.ndarray, n: int, p: float, chunk: int = 2000) -> np.ndarray:
    _check_p(p)
    edges = np.atleast_2d(edges)
    if n < 3:
        return np.zeros(edges.shape[0])
    out = np.empty(edges.shape[0])
    for start in range(0, edges.shape[0], chunk):
        counts = triple_edge_counts(edges[start:start + chunk], n)
        out[start:start + chunk] = [_combine(c, p) for c in counts]
    return out


def er_signed_triangle_moments(n: int, p: float) -> tuple[float, float]:
    """Null mean and variance of T under G(n, p)."""
    if n < 3:
        raise DomainError(f"the signed triangle count needs n >= 3, got {n}")
    _check_p(p)
    return 0.0, math.comb(n, 3) * p**3 * (1.0 - p) ** 3


# --- hypothesis test ----------------------------------------------------------

class Decision(enum.Enum):
    GEOMETRIC = "Geometric"
    ERDOS_RENYI = "ErdosRenyi"


@dataclass(frozen=True)
class TestOutcome:
    statistic_value: float
    threshold: float
    decision: Decision
    null_mean: float
    null_std: float

    __test__ = False  # keep pytest from collecting this class


def _threshold(n: int, p: float, z: float) -> tuple[float, float, float]:
    if not z > 0:
        raise DomainError(f"z must be positive, got {z}")
    mean, var = er_signed_triangle_moments(n, p)
    std = math.sqrt(var)
    return mean, std, z * std


def triangle_test(g: GraphSample, p: float, z: float = 3.0) -> TestOutcome:
    """Flag ``g`` as geometric when T exceeds z null standard deviations."""
    mean, std, thr = _threshold(g.n, p, z)
    t = signed_triangle_statistic(g, p)
    decision = Decision.GEOMETRIC if t > thr else Decision.ERDOS_RENYI
    return TestOutcome(t, thr, decision, mean, std)


def _flag_count(task) -> int:
    kind, n, p, d, size, z, stream = task
    gen = stream.generator()
    edges = sample_geo_batch(n, p, d, size, gen) if kind == "geo" else sample_er_batch(n, p, size, gen)
    _, _, thr = _threshold(n, p, z)
    return int(np.count_nonzero(signed_triangle_batch(edges, n, p) > thr))


def detection_power(n: int, p: float, d: int, trials: int, z: float = 3.0, rng=None,
                    workers: int = 1, chunk: int = 2000) -> tuple[float, float]:
    """(power, false positive rate) of :func:`triangle_test` estimated from ``trials`` graphs of each law."""
    if trials < 100:
        raise DomainError(f"detection_power needs at least 100 trials, got {trials}")
    _threshold(n, p, z)
    if p in (0.0, 1.0):
        # T vanishes identically and the threshold is 0, so nothing is ever flagged
        return 0.0, 0.0
    stream = as_stream(rng)
    sizes = chunk_sizes(trials, chunk)
    tasks = [(kind, n, p, d, size, z, stream.substream(k).substream(c))
             for k, kind in enumerate(("geo", "er")) for c, size in enumerate(sizes)]
    counts = map_indexed(_flag_count, tasks, workers)
    geo, er = sum(counts[: len(sizes)]), sum(counts[len(sizes):])
    return geo / trials, er / trials


def _first_two_coordinates(d: int, size: int, gen: np.random.Generator) -> np.ndarray:
    # (x1, x2) of a uniform point on S^{d-1}
    g = gen.standard_normal((size, 2))
    rest = gen.chisquare(d - 2, size) if d > 2 else np.zeros(size)
    return g / np.sqrt(np.einsum("ij,ij->i", g, g) + rest)[:, None]


def conditional_triangle_prob(d: int, p: float, trials: int, rng=None,
                              chunk: int = 1_000_000) -> tuple[float, float]:
    """Estimate Pr[G12 G13 G23 = 1 | G23 = 1] with its binomial standard error.

    By rotation invariance v2 = e1 and v3 = t e1 + sqrt(1 - t^2) e2 with t the
    latitude of a uniform point of the cap around v2; only the first two
    coordinates of the fresh v1 matter.
    """
    if trials < 10_000:
        raise DomainError(f"conditional_triangle_prob needs at least 1e4 trials, got {trials}")
    _check_p(p, open_interval=True)
    gen = as_generator(rng)
    tau = tau_of_p(d, p)
    hits = 0
    for size in chunk_sizes(trials, chunk):
        t = sample_cap_latitude(d, tau, gen, size=size)
        s = np.sqrt((1.0 - t) * (1.0 + t))
        x = _first_two_coordinates(d, size, gen)
        hits += int(np.count_nonzero((x[:, 0] >= tau) & (t * x[:, 0] + s * x[:, 1] >= tau)))
    q = hits / trials
    return q, math.sqrt(q * (1.0 - q) / trials)


# --- discrete distributions ---------------------------------------------------

@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite law given as ``(key, probability)`` pairs."""

    outcomes: tuple[tuple[Hashable, float], ...]

    def __post_init__(self):
        outcomes = tuple((k, float(q)) for k, q in self.outcomes)
        keys = [k for k, _ in outcomes]
        if len(set(keys)) != len(keys):
            raise DomainError("duplicate outcome keys")
        probs = [q for _, q in outcomes]
        if any(not q >= 0.0 for q in probs):
            raise DomainError("probabilities must be non-negative")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "outcomes", outcomes)

    @classmethod
    def from_mapping(cls, mapping) -> "DiscreteDistribution":
        return cls(tuple(mapping.items()))

    @classmethod
    def from_counts(cls, keys: Sequence[Hashable], counts) -> "DiscreteDistribution":
        counts = np.asarray(counts, dtype=np.int64)
        total = int(counts.sum())
        if total <= 0:
            raise DomainError("cannot normalize an empty frequency table")
        return cls(tuple((k, int(c) / total) for k, c in zip(keys, counts) if c > 0))

    def as_dict(self) -> dict:
        return dict(self.outcomes)

    def support(self) -> set:
        return {k for k, q in self.outcomes if q > 0}


def product_distribution(a: DiscreteDistribution, b: DiscreteDistribution) -> DiscreteDistribution:
    """Law of the pair (X, Y) for independent X ~ a and Y ~ b."""
    return DiscreteDistribution(tuple(((ka, kb), qa * qb) for ka, qa in a.outcomes for kb, qb in b.outcomes))


def empirical_tv(a: DiscreteDistribution, b: DiscreteDistribution) -> float:
    da, db = a.as_dict(), b.as_dict()
    keys = set(da) | set(db)
    return 0.5 * math.fsum(abs(da.get(k, 0.0) - db.get(k, 0.0)) for k in keys)


def kl_discrete(a: DiscreteDistribution, b: DiscreteDistribution) -> float:
    """Relative entropy D(a || b) in nats; ``math.inf`` when a is not dominated by b."""
    db = b.as_dict()
    terms = []
    for k, q in a.outcomes:
        if q == 0.0:
            continue
        r = db.get(k, 0.0)
        if r == 0.0:
            return math.inf
        terms.append(q * math.log(q / r))
    return max(math.fsum(terms), 0.0)


# --- enumeration over small graph spaces --------------------------------------

@dataclass(frozen=True)
class ERSampler:
    p: float

    def batch(self, n: int, size: int, rng) -> np.ndarray:
        return sample_er_batch(n, self.p, size, rng)


@dataclass(frozen=True)
class GeoSampler:
    p: float
    d: int

    def batch(self, n: int, size: int, rng) -> np.ndarray:
        return sample_geo_batch(n, self.p, self.d, size, rng)


def _check_enumerable(n: int) -> int:
    if n > MAX_ENUMERATION_N:
        raise UnsupportedSizeError(f"n <= {MAX_ENUMERATION_N} required for exact enumeration, got n={n}")
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    return pair_count(n)


def graph_keys(n: int) -> list[str]:
    """Canonical serialization of every graph on n vertices, indexed by its code."""
    return [GraphSample.from_code(n, c).serialize() for c in range(2 ** pair_count(n))]


@dataclass(frozen=True)
class EmpiricalGraphDistribution:
    """Frequency table over all 2^C(n,2) graphs, indexed by :attr:`GraphSample.code`."""

    n: int
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def frequency(self, g: GraphSample) -> float:
        return int(self.counts[g.code]) / self.total

    def to_distribution(self) -> DiscreteDistribution:
        return DiscreteDistribution.from_counts(graph_keys(self.n), self.counts)


def _code_counts(task) -> np.ndarray:
    sampler, n, size, stream = task
    m = pair_count(n)
    codes = sampler.batch(n, size, stream.generator()).astype(np.int64) @ (1 << np.arange(m, dtype=np.int64))
    return np.bincount(codes, minlength=2**m)


def enumerate_graph_distribution(sampler, n: int, trials: int, rng=None, workers: int = 1,
                                 chunk: int = 200_000) -> EmpiricalGraphDistribution:
    _check_enumerable(n)
    stream = as_stream(rng)
    tasks = [(sampler, n, size, stream.substream(c)) for c, size in enumerate(chunk_sizes(trials, chunk))]
    counts = np.sum(map_indexed(_code_counts, tasks, workers), axis=0)
    return EmpiricalGraphDistribution(n, counts)


def exact_er_distribution(n: int, p: float) -> DiscreteDistribution:
    m = _check_enumerable(n)
    _check_p(p)
    keys = graph_keys(n)
    probs = [p ** bin(c).count("1") * (1.0 - p) ** (m - bin(c).count("1")) for c in range(2**m)]
    return DiscreteDistribution(tuple((k, q) for k, q in zip(keys, probs) if q > 0))


def tv_error_bound(empirical: DiscreteDistribution, trials: int, outcomes: int) -> float:
    """Multinomial sampling error scale 1/2 sum_k sqrt(q_k (1 - q_k) / N) of a plug-in TV.

    Outcomes never observed contribute through a floor q_k = 1/N.
    """
    q = np.zeros(outcomes)
    observed = np.array([v for _, v in empirical.outcomes])
    q[: observed.shape[0]] = observed
    q = np.maximum(q, 1.0 / trials)
    return 0.5 * float(np.sum(np.sqrt(q * (1.0 - q) / trials)))


@dataclass(frozen=True)
class TvPoint:
    d: int
    tv: float
    bound: float
    kl: float


def tv_curve(n: int, p: float, d_grid: Sequence[int], trials: int, rng=None,
             workers: int = 1) -> list[TvPoint]:
    """TV and KL between empirical Geo_d(n, p) and exact G(n, p) for each d."""
    _check_enumerable(n)
    stream = as_stream(rng)
    reference = exact_er_distribution(n, p)
    out = []
    for k, d in enumerate(d_grid):
        emp = enumerate_graph_distribution(GeoSampler(p, int(d)), n, trials, stream.substream(k), workers)
        dist = emp.to_distribution()
        out.append(TvPoint(int(d), empirical_tv(dist, reference),
                           tv_error_bound(dist, trials, 2 ** pair_count(n)), kl_discrete(dist, reference)))
    return out
