"""Samplers for G(n, p), Geo_d(n, p) and the three-way coupled triple.

Edges are stored as a boolean vector over the unordered pairs in the fixed
order (0,1), (0,2), ..., (0,n-1), (1,2), ...  (``numpy.triu_indices`` order).

Batch samplers of the geometric graph use a reduced representation: the Gram
matrix of n uniform vectors in R^d has the law of the Gram matrix of the
rows of a lower-triangular matrix built from Gaussians and one chi-square per
row (Bartlett).  Each vertex then costs O(n) whatever the dimension, which
is what makes d = 1e6 or 1e8 experiments affordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import BudgetExhaustedError, DomainError, InsufficientAcceptanceError
from .rng import as_generator
from .sphere import CapSpec, region_mask, sample_uniform_sphere, tau_of_p

# Default C2 in eps = C2 * sqrt((n p + ln n) ln^4 n / d); see scripts/calibrate_coupling.py
DEFAULT_COUPLING_C2 = 0.5
MIN_ACCEPT = 50


@lru_cache(maxsize=None)
def pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(n, 1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(i: int, j: int, n: int) -> int:
    """Position of the unordered pair {i, j} in the fixed pair order."""
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise DomainError(f"invalid pair ({i}, {j}) for n={n}")
    i, j = min(i, j), max(i, j)
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@dataclass(frozen=True, eq=False)
class GraphSample:
    n: int
    edges: np.ndarray

    def __post_init__(self):
        edges = np.array(self.edges, dtype=bool).reshape(-1)
        if edges.shape[0] != pair_count(self.n):
            raise DomainError(f"expected {pair_count(self.n)} pair slots, got {edges.shape[0]}")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_adjacency(cls, adj) -> "GraphSample":
        adj = np.asarray(adj, dtype=bool)
        rows, cols = pair_arrays(adj.shape[0])
        return cls(adj.shape[0], adj[rows, cols])

    @classmethod
    def from_edge_list(cls, n: int, pairs) -> "GraphSample":
        edges = np.zeros(pair_count(n), dtype=bool)
        for i, j in pairs:
            edges[pair_index(i, j, n)] = True
        return cls(n, edges)

    @classmethod
    def from_code(cls, n: int, code: int) -> "GraphSample":
        m = pair_count(n)
        return cls(n, [(code >> k) & 1 for k in range(m)])

    @property
    def code(self) -> int:
        """Integer with bit k set iff pair k is an edge."""
        return sum(1 << k for k in np.flatnonzero(self.edges).tolist())

    @property
    def edge_count(self) -> int:
        return int(self.edges.sum())

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        rows, cols = pair_arrays(self.n)
        adj[rows, cols] = self.edges
        return adj | adj.T

    def is_subgraph_of(self, other: "GraphSample") -> bool:
        return self.n == other.n and not np.any(self.edges & ~other.edges)

    def relabel(self, perm) -> "GraphSample":
        """Graph with vertex ``perm[v]`` playing the role of old vertex ``v``."""
        perm = np.asarray(perm)
        adj = self.adjacency()
        new = np.zeros_like(adj)
        new[np.ix_(perm, perm)] = adj
        return GraphSample.from_adjacency(new)

    def serialize(self) -> str:
        """``"<n>\\n<hex>\\n"`` with pair k at bit 7 - k % 8 of byte k // 8."""
        return f"{self.n}\n{np.packbits(self.edges, bitorder='big').tobytes().hex()}\n"

    @classmethod
    def deserialize(cls, text: str) -> "GraphSample":
        lines = text.strip("\n").split("\n")
        if len(lines) == 1:
            lines.append("")
        if len(lines) != 2:
            raise DomainError("graph serialization has two lines: n, then the hex bitset")
        n = int(lines[0])
        m = pair_count(n)
        raw = np.frombuffer(bytes.fromhex(lines[1]), dtype=np.uint8)
        if raw.shape[0] != (m + 7) // 8:
            raise DomainError("hex bitset has the wrong length")
        bits = np.unpackbits(raw, bitorder="big")
        if bits[m:].any():
            raise DomainError("padding bits must be zero")
        return cls(n, bits[:m])

    def __eq__(self, other):
        if not isinstance(other, GraphSample):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self):
        return f"GraphSample(n={self.n}, edges={self.edge_count})"


def _check_p(p, open_interval=False):
    if open_interval and not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")


# --- Erdős–Rényi ------------------------------------------------------------

def sample_er_batch(n: int, p: float, size: int, rng=None) -> np.ndarray:
    _check_p(p)
    gen = as_generator(rng)
    return gen.random((size, pair_count(n))) < p


def sample_er(n: int, p: float, rng=None) -> GraphSample:
    return GraphSample(n, sample_er_batch(n, p, 1, rng)[0])


# --- geometric graphs -------------------------------------------------------

def geometric_graph(vectors: np.ndarray, p: float | None = None, tau: float | None = None) -> GraphSample:
    """gg(V, p): edge {i, j} iff <v_i, v_j> >= tau(p)."""
    vectors = np.asarray(vectors, dtype=float)
    if tau is None:
        tau = tau_of_p(vectors.shape[1], p)
    rows, cols = pair_arrays(vectors.shape[0])
    gram = vectors @ vectors.T
    return GraphSample(vectors.shape[0], gram[rows, cols] >= tau)


def sample_geo(n: int, p: float, d: int, rng=None) -> tuple[GraphSample, np.ndarray]:
    """Geo_d(n, p) with its full-dimensional embedding (an ``(n, d)`` array)."""
    _check_p(p, open_interval=True)
    vectors = sample_uniform_sphere(d, rng, size=n)
    return geometric_graph(vectors, tau=tau_of_p(d, p)), vectors


def reduced_draws(i: int, d: int, width: int, size: int, gen: np.random.Generator) -> np.ndarray:
    """Uniform points of S^{d-1} in coordinates adapted to the first ``i`` basis vectors.

    Coordinates 0..i-1 are exact; the whole remaining component is rotated
    onto basis vector ``i``.  Once ``i >= d`` the basis is complete and the
    point is drawn in full.
    """
    out = np.zeros((size, width))
    if i < d:
        g = gen.standard_normal((size, i))
        rest = gen.chisquare(d - i, size)
        norm2 = np.einsum("ij,ij->i", g, g) + rest
        out[:, :i] = g / np.sqrt(norm2)[:, None]
        out[:, i] = np.sqrt(rest / norm2)
    else:
        g = gen.standard_normal((size, d))
        out[:, :d] = g / np.linalg.norm(g, axis=1, keepdims=True)
    return out


def reduced_sphere_vectors(n: int, d: int, size: int, rng=None) -> np.ndarray:
    """``(size, n, min(n, d))`` array whose Gram matrices are those of n uniform vectors."""
    if d < 2:
        raise DomainError(f"dimension must be >= 2, got {d}")
    gen = as_generator(rng)
    width = min(n, d)
    out = np.empty((size, n, width))
    for i in range(n):
        out[:, i, :] = reduced_draws(i, d, width, size, gen)
    return out


def sample_geo_batch(n: int, p: float, d: int, size: int, rng=None, chunk: int = 100_000) -> np.ndarray:
    """``(size, C(n, 2))`` edge indicators of independent Geo_d(n, p) graphs."""
    _check_p(p, open_interval=True)
    gen = as_generator(rng)
    tau = tau_of_p(d, p)
    rows, cols = pair_arrays(n)
    out = np.empty((size, pair_count(n)), dtype=bool)
    for start in range(0, size, chunk):
        stop = min(start + chunk, size)
        v = reduced_sphere_vectors(n, d, stop - start, gen)
        gram = v @ v.transpose(0, 2, 1)
        out[start:stop] = gram[:, rows, cols] >= tau
    return out


# --- rejection sampling from cap regions ------------------------------------

def _region_dim(region: Sequence[CapSpec], d):
    if region:
        return region[0].dim
    if d is None:
        raise DomainError("the dimension is needed when the region is the whole sphere")
    return d


def sample_region_pool(region: Sequence[CapSpec], draws: int, rng=None, d: int | None = None,
                       chunk: int = 200_000) -> np.ndarray:
    """Accepted points among ``draws`` uniform proposals (uniform on the region)."""
    d = _region_dim(region, d)
    gen = as_generator(rng)
    kept = []
    for start in range(0, draws, chunk):
        x = sample_uniform_sphere(d, gen, size=min(chunk, draws - start))
        kept.append(x[region_mask(x, region)])
    return np.concatenate(kept) if kept else np.empty((0, d))


def rejection_sample_region(region: Sequence[CapSpec], budget: int, rng=None, d: int | None = None,
                            batch: int = 1024) -> np.ndarray:
    """First accepted uniform proposal; BudgetExhaustedError after ``budget`` draws."""
    d = _region_dim(region, d)
    gen = as_generator(rng)
    used = 0
    while used < budget:
        size = min(batch, budget - used)
        x = sample_uniform_sphere(d, gen, size=size)
        hits = np.flatnonzero(region_mask(x, region))
        if hits.size:
            return x[hits[0]]
        used += size
    raise BudgetExhaustedError(used)


def conditional_cap_fraction(region: Sequence[CapSpec], new_center, tau: float, mc_budget: int,
                             rng=None, min_accept: int = MIN_ACCEPT) -> tuple[float, float]:
    """Monte Carlo estimate of rho(region ∩ cap(new_center, tau)) / rho(region)."""
    new_center = np.asarray(new_center, dtype=float)
    pool = sample_region_pool(region, mc_budget, rng, d=new_center.shape[0])
    if pool.shape[0] < max(min_accept, 1):
        raise InsufficientAcceptanceError(pool.shape[0], min_accept)
    f = float(np.mean(pool @ new_center >= tau))
    return f, math.sqrt(f * (1.0 - f) / pool.shape[0])


# --- three-way coupling -----------------------------------------------------

def coupling_epsilon(n: int, p: float, d: int, c2: float = DEFAULT_COUPLING_C2) -> float:
    """eps = c2 * sqrt((n p + ln n) ln^4 n / d)."""
    ln = math.log(n)
    return c2 * math.sqrt((n * p + ln) * ln**4 / d)


@dataclass
class CoupledTriple:
    g_minus: GraphSample
    g: GraphSample
    g_plus: GraphSample
    sandwich_ok: bool
    fraction_estimates: list[tuple[int, float, float]]
    mc_budget_used: int
    vectors: np.ndarray = field(repr=False)


def coupled_triple_sample(n: int, p: float, d: int, eps: float, mc_budget: int, rng=None,
                          min_accept: int = MIN_ACCEPT) -> CoupledTriple:
    """Jointly sample G(n,(1-eps)p), Geo_d(n,p) and G(n,(1+eps)p).

    Vertices arrive in order; for each earlier vertex k = 0..i-1 a shared
    threshold theta decides the edges of all three graphs.  The conditional
    cap fraction of the current candidate region is estimated from one pool
    of ``mc_budget`` uniform proposals per vertex, and v_i is finally drawn
    from the surviving pool.  Because the pool is split with probability
    equal to its own empirical fraction, v_i is exactly uniform over the raw
    proposals, so g has the Geo_d(n, p) law for every budget.

    ``vectors`` holds the embedding in reduced coordinates (``(n, min(n, d))``).
    """
    if not 0.0 < p <= 0.5:
        raise DomainError(f"the coupling needs 0 < p <= 1/2, got {p}")
    if eps <= 0:
        raise DomainError("eps must be positive")
    gen = as_generator(rng)
    tau = tau_of_p(d, p)
    width = min(n, d)
    rows, cols = pair_arrays(n)
    vectors = np.zeros((n, width))
    edges = {name: np.zeros(pair_count(n), dtype=bool) for name in ("minus", "g", "plus")}
    estimates = []
    lo, hi = (1.0 - eps) * p, (1.0 + eps) * p

    vectors[0] = reduced_draws(0, d, width, 1, gen)[0]
    for i in range(1, n):
        pool = reduced_draws(i, d, width, mc_budget, gen)
        in_cap = pool @ vectors[:i].T >= tau
        alive = np.ones(mc_budget, dtype=bool)
        for k in range(i):
            idx = pair_index(k, i, n)
            size = int(alive.sum())
            if size < max(min_accept, 1):
                raise InsufficientAcceptanceError(size, min_accept, pair_index=idx)
            hits = int(np.count_nonzero(alive & in_cap[:, k]))
            f = hits / size
            estimates.append((idx, f, math.sqrt(f * (1.0 - f) / size)))
            theta = gen.random()
            edges["minus"][idx] = theta < lo
            edges["plus"][idx] = theta < hi
            if theta < f:
                edges["g"][idx] = True
                alive &= in_cap[:, k]
            else:
                alive &= ~in_cap[:, k]
        vectors[i] = pool[gen.choice(np.flatnonzero(alive))]

    g_minus = GraphSample(n, edges["minus"])
    g = GraphSample(n, edges["g"])
    g_plus = GraphSample(n, edges["plus"])
    return CoupledTriple(
        g_minus=g_minus,
        g=g,
        g_plus=g_plus,
        sandwich_ok=g_minus.is_subgraph_of(g) and g.is_subgraph_of(g_plus),
        fraction_estimates=estimates,
        mc_budget_used=(n - 1) * mc_budget,
        vectors=vectors,
    )
