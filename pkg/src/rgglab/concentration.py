"""Concentration experiments on the sphere: cap fractions, cap/anti-cap intersections
and the cap-convolution (one step of "jump to a uniform point of your cap") operator.

Densities are represented by weighted particle ensembles.  Everything a
particle ensemble can say about its density goes through the observable

    X(z) = Pr_{x ~ nu}[<x, z> > tau],

evaluated at uniformly random directions z.

Intersections of k caps only depend on the projection of a point onto the
span of the k centers.  When k < d that projection y lives in the unit ball
of R^k with density proportional to (1 - |y|^2)^((d - k - 2) / 2), which is
what the intersection estimators work with; centers come from the reduced
(Bartlett) representation in :mod:`rgglab.graphs`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, EmptyCapError
from .graphs import reduced_sphere_vectors
from .rng import as_generator, as_stream, chunk_sizes, map_indexed
from .sphere import CapSpec, cap_measure, inner_product_density, region_mask, sample_in_caps, sample_uniform_sphere, tau_of_p

PARTICLE_CHUNK = 20_000
Z_CHUNK = 1_000


# --- particle ensembles -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ParticleDistribution:
    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.particles, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if x.ndim != 2 or w.shape != (x.shape[0],):
            raise DomainError("particles must be (N, d) with one weight per particle")
        if np.any(w < 0):
            raise DomainError("weights must be non-negative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {math.fsum(w)!r}, not 1")
        for arr in (x, w):
            arr.setflags(write=False)
        object.__setattr__(self, "particles", x)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @staticmethod
    def _equal_weights(count: int) -> np.ndarray:
        return np.full(count, 1.0 / count)

    @classmethod
    def uniform(cls, d: int, count: int, rng=None) -> "ParticleDistribution":
        return cls(sample_uniform_sphere(d, rng, size=count), cls._equal_weights(count))

    @classmethod
    def point_mass(cls, v, count: int = 1) -> "ParticleDistribution":
        v = np.asarray(v, dtype=float)
        return cls(np.broadcast_to(v, (count, v.shape[0])).copy(), cls._equal_weights(count))

    @classmethod
    def uniform_on_cap(cls, center, tau: float, count: int, rng=None) -> "ParticleDistribution":
        gen = as_generator(rng)
        center = np.asarray(center, dtype=float)
        parts = [sample_in_caps(np.broadcast_to(center, (size, center.shape[0])), tau, gen)
                 for size in chunk_sizes(count, PARTICLE_CHUNK)]
        return cls(np.concatenate(parts), cls._equal_weights(count))


def cap_fractions(nu: ParticleDistribution, zs: np.ndarray, tau: float) -> np.ndarray:
    """X(z) = sum of weights of particles with <x, z> > tau, for every row z of ``zs``."""
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    if zs.shape[1] != nu.dim:
        raise DomainError(f"direction of dimension {zs.shape[1]} against particles of dimension {nu.dim}")
    out = np.zeros(zs.shape[0])
    for zs_start in range(0, zs.shape[0], Z_CHUNK):
        zc = zs[zs_start:zs_start + Z_CHUNK]
        acc = np.zeros(zc.shape[0])
        for start in range(0, nu.size, PARTICLE_CHUNK):
            above = nu.particles[start:start + PARTICLE_CHUNK] @ zc.T > tau
            acc += nu.weights[start:start + PARTICLE_CHUNK] @ above
        out[zs_start:zs_start + Z_CHUNK] = acc
    return np.clip(out, 0.0, 1.0)


def cap_fraction(nu: ParticleDistribution, z, tau: float) -> float:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise DomainError("cap_fraction takes a single direction")
    return float(cap_fractions(nu, z[None, :], tau)[0])


def relative_deviations(nu: ParticleDistribution, tau: float, zs: np.ndarray, p: float | None = None) -> np.ndarray:
    """|X(z) - p| / p for every row of ``zs``; ``p`` defaults to the cap measure at ``tau``."""
    if p is None:
        p = float(cap_measure(nu.dim, tau))
    return np.abs(cap_fractions(nu, zs, tau) - p) / p


def _relative_deviations(nu, tau, z_samples, rng, p):
    return relative_deviations(nu, tau, sample_uniform_sphere(nu.dim, rng, size=z_samples), p)


@dataclass(frozen=True)
class DeviationProfileEstimate:
    epsilon: float
    dev_estimate: float
    z_samples: int
    stderr: float


def deviation_profile(nu: ParticleDistribution, tau: float, eps: float, z_samples: int, rng=None,
                      p: float | None = None) -> DeviationProfileEstimate:
    """Fraction of uniform directions z with |X(z) - p| > p * eps.

    ``p`` defaults to the cap measure at ``tau``.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    dev = float(np.mean(_relative_deviations(nu, tau, z_samples, rng, p) > eps))
    return DeviationProfileEstimate(float(eps), dev, int(z_samples), math.sqrt(dev * (1 - dev) / z_samples))


def spread_profile(nu: ParticleDistribution, tau: float, delta: float, z_samples: int, rng=None,
                   p: float | None = None) -> float:
    """Smallest eps with deviation profile <= delta: the (1 - delta) quantile of |X(z) - p| / p."""
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    return float(np.quantile(_relative_deviations(nu, tau, z_samples, rng, p), 1.0 - delta))


def cap_discrepancy(nu: ParticleDistribution, tau: float, z_samples: int, rng=None,
                    p: float | None = None) -> float:
    """0.99 quantile over uniform z of |X(z) - p| / p."""
    return spread_profile(nu, tau, 0.01, z_samples, rng, p)


def cap_convolution_push(nu: ParticleDistribution, tau: float, rng=None) -> ParticleDistribution:
    """Move every particle to a uniform point of its own cap; weights are carried over unchanged."""
    if tau >= 1.0:
        raise EmptyCapError("cap with threshold >= 1 is empty")
    gen = as_generator(rng)
    moved = np.empty_like(nu.particles)
    for start in range(0, nu.size, PARTICLE_CHUNK):
        moved[start:start + PARTICLE_CHUNK] = sample_in_caps(nu.particles[start:start + PARTICLE_CHUNK], tau, gen)
    return ParticleDistribution(moved, nu.weights)


# --- intersections of caps and anti-caps --------------------------------------

def intersection_measure_mc(caps: Sequence[CapSpec], mc_samples: int, rng=None,
                            chunk: int = 100_000) -> tuple[float, float]:
    """Plain Monte Carlo estimate of the uniform measure of a cap/anti-cap intersection."""
    if mc_samples < 1000:
        raise DomainError(f"mc_samples must be at least 1000, got {mc_samples}")
    if not caps:
        return 1.0, 0.0
    gen = as_generator(rng)
    d = caps[0].dim
    hits = 0
    for size in chunk_sizes(mc_samples, chunk):
        hits += int(np.count_nonzero(region_mask(sample_uniform_sphere(d, gen, size=size), caps)))
    est = hits / mc_samples
    return est, math.sqrt(est * (1 - est) / mc_samples)


def _uniform_projection(d: int, width: int, size: int, gen) -> np.ndarray:
    # first `width` coordinates of a uniform point of S^{d-1}
    g, rest = _gaussian_state(d, width, size, gen)
    return _project(g, rest)


def _gaussian_state(d, width, size, gen):
    # a standard Gaussian in R^d kept as its first `width` coordinates plus the norm of the rest
    g = gen.standard_normal((size, width))
    rest = np.sqrt(gen.chisquare(d - width, size)) if d > width else np.zeros(size)
    return g, rest


def _project(g, rest):
    return g / np.sqrt(np.einsum("ij,ij->i", g, g) + rest * rest)[:, None]


def _satisfies(y, centers, thresholds, is_cap):
    return np.all((y @ centers.T >= thresholds) == is_cap, axis=1)


def _stage_ends(marginals, target):
    # resample after constraint t once the product of marginal measures since the
    # last resampling drops below `target`; depends on the law only, not on the particles
    ends, acc = set(), 0.0
    for t, m in enumerate(marginals):
        acc += math.log(m)
        if acc < math.log(target):
            ends.add(t)
            acc = 0.0
    return ends


@dataclass
class _WalkTuning:
    """Proposal y -> y + scale * L xi for the ball density, L a Cholesky factor."""

    factor: np.ndarray
    scale: float


def _tuning_from(y: np.ndarray, scale: float) -> _WalkTuning:
    w = y.shape[1]
    cov = np.atleast_2d(np.cov(y, rowvar=False))
    spread = max(np.trace(cov) / w, 1e-300)
    return _WalkTuning(np.linalg.cholesky(cov + 1e-3 * spread * np.eye(w)), scale)


def _walk_moves(y, centers, thresholds, is_cap, d, sweeps, gen, tuning: _WalkTuning, adapt: bool):
    """Random-walk Metropolis for the density (1 - |y|^2)^a on the ball part of the region.

    With ``adapt`` the step scale follows the acceptance rate of the
    population; the adapted kernel is only used in pilot runs.
    """
    n, w = y.shape
    expo = (d - w - 2) / 2
    scale = tuning.scale
    for _ in range(sweeps):
        prop = y + scale * gen.standard_normal((n, w)) @ tuning.factor.T
        r_old = np.einsum("ij,ij->i", y, y)
        r_new = np.einsum("ij,ij->i", prop, prop)
        ok = r_new < 1.0
        log_ratio = np.full(n, -np.inf)
        log_ratio[ok] = expo * (np.log1p(-r_new[ok]) - np.log1p(-r_old[ok]))
        ok &= np.log(gen.random(n)) < log_ratio
        ok &= _satisfies(prop, centers, thresholds, is_cap)
        y[ok] = prop[ok]
        if adapt:
            rate = ok.mean()
            scale *= 1.3 if rate > 0.4 else (0.7 if rate < 0.15 else 1.0)
    return y, _WalkTuning(tuning.factor, scale)


def _slice_moves(g, rest, centers, thresholds, is_cap, d, sweeps, gen, max_shrinks=60):
    """Elliptical slice sampling of a standard Gaussian x in R^d restricted to x/|x| in the region.

    The direction of such an x is uniform on the region, and the kernel has no
    tuning parameters.  Only the first w coordinates and the norm of the other
    d - w are tracked: along the ellipse x cos(t) + nu sin(t) the unseen part
    stays in the plane of h and nu_h, whose geometry needs one normal
    (the component of nu_h along h) and one chi-square (the rest).
    """
    n, w = g.shape
    extra = d - w
    moved = 0
    for _ in range(sweeps):
        nu = gen.standard_normal((n, w))
        along = gen.standard_normal(n) if extra > 0 else np.zeros(n)
        ortho2 = gen.chisquare(extra - 1, n) if extra > 1 else np.zeros(n)
        theta = gen.uniform(0.0, 2 * math.pi, n)
        lo, hi = theta - 2 * math.pi, theta.copy()
        active = np.arange(n)
        for _ in range(max_shrinks):
            if active.size == 0:
                break
            c, s = np.cos(theta[active]), np.sin(theta[active])
            g_new = g[active] * c[:, None] + nu[active] * s[:, None]
            r = rest[active]
            rest_new = np.sqrt(np.maximum(
                (r * c) ** 2 + 2 * r * along[active] * c * s + (along[active] ** 2 + ortho2[active]) * s * s, 0.0))
            ok = _satisfies(_project(g_new, rest_new), centers, thresholds, is_cap)
            done = active[ok]
            g[done] = g_new[ok]
            rest[done] = rest_new[ok]
            moved += done.size
            active = active[~ok]
            th = theta[active]
            neg = th < 0
            lo[active[neg]] = th[neg]
            hi[active[~neg]] = th[~neg]
            theta[active] = gen.uniform(lo[active], hi[active])
        # particles still shrinking keep their current position
    return g, rest, moved / max(n * sweeps, 1)


@dataclass(frozen=True)
class SplittingResult:
    measures: np.ndarray  # estimated measure of every prefix intersection, measures[0] = 1
    extinct_at: int | None
    acceptance: float


def _splitting_pass(centers, thresholds, is_cap, d, particles, gen, sweeps, ends, tunings):
    """One sequential splitting run; ``tunings`` maps resampling stages to walk tunings (ball mode)."""
    k, w = centers.shape
    ball = w < d
    measures = np.zeros(k + 1)
    measures[0] = 1.0
    state = _uniform_projection(d, w, particles, gen) if ball else gen.standard_normal((particles, d))
    level, start_count, moved, rounds = 1.0, particles, 0.0, 0
    for t in range(k):
        points = state if ball else _project(state, np.zeros(state.shape[0]))
        state = state[_satisfies(points, centers[t:t + 1], thresholds[t:t + 1], is_cap[t:t + 1])]
        measures[t + 1] = level * state.shape[0] / start_count
        if state.shape[0] == 0:
            return measures, t + 1, moved / max(rounds, 1)
        if t in ends and t < k - 1:
            level = measures[t + 1]
            state = state[gen.integers(0, state.shape[0], particles)]
            before = state.copy()
            prefix = (centers[: t + 1], thresholds[: t + 1], is_cap[: t + 1])
            if ball:
                state, _ = _walk_moves(state, *prefix, d, sweeps, gen, tunings[t], adapt=False)
            else:
                state, _, _ = _slice_moves(state, np.zeros(particles), *prefix, d, sweeps, gen)
            moved += float(np.mean(np.any(state != before, axis=1)))
            rounds += 1
            start_count = particles
    return measures, None, moved / max(rounds, 1)


def _pilot_tunings(centers, thresholds, is_cap, d, particles, gen, sweeps, ends, min_keep=0.3):
    """Walk tunings for every resampling stage, from a pilot that cannot die out.

    Each constraint is approached through intermediate thresholds set at the
    population median of <y, c> whenever fewer than ``min_keep`` of the
    particles satisfy it, with a resample-and-move round after each level.
    The levels depend on the pilot's particles, which is harmless: only the
    returned tunings are used, by an independent run.
    """
    k, w = centers.shape
    y = _uniform_projection(d, w, particles, gen)
    tuning = _tuning_from(y, 2.38 / math.sqrt(w))
    out = {}
    for t in range(k):
        c, tau, cap = centers[t], thresholds[t], bool(is_cap[t])
        lv = thresholds[: t + 1].copy()
        while True:
            s = y @ c
            inside = s >= tau if cap else s < tau
            if inside.mean() >= min_keep:
                y = y[inside]
                break
            level = float(np.median(s))
            lv[t] = level
            keep = s >= level if cap else s < level
            y = y[keep][gen.integers(0, int(keep.sum()), particles)]
            tuning = _tuning_from(y, tuning.scale)
            y, tuning = _walk_moves(y, centers[: t + 1], lv, is_cap[: t + 1], d, sweeps, gen, tuning, adapt=True)
        if t in ends and t < k - 1:
            y = y[gen.integers(0, y.shape[0], particles)]
            tuning = _tuning_from(y, tuning.scale)
            y, tuning = _walk_moves(y, centers[: t + 1], thresholds[: t + 1], is_cap[: t + 1], d, sweeps, gen,
                                    tuning, adapt=True)
            out[t] = tuning
    return out


def sequential_intersection(centers: np.ndarray, thresholds, is_cap, d: int, particles: int, rng=None,
                            sweeps: int = 20, stage_target: float = 0.5,
                            pilot_fraction: float = 0.2) -> SplittingResult:
    """Measures of all prefix intersections L_t = S_1 ∩ ... ∩ S_t by sequential splitting.

    ``centers`` is ``(k, w)``: unit centers written in the first ``w <= d``
    coordinates.  Particles start uniform; at each constraint the surviving
    fraction is recorded, and on a fixed schedule the survivors are resampled
    back to ``particles`` and moved by a kernel that keeps the uniform law on
    the current intersection invariant.  When w < d that kernel is a
    random-walk Metropolis step for the projected density whose proposal
    covariance and scale come from an independent pilot run; when w == d it
    is great-circle slice sampling.  Neither depends on the particles being
    moved, so the running product of fractions is an unbiased estimate of
    every prefix measure.  ``acceptance`` is the share of particles that moved.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    k, w = centers.shape
    if w > d:
        raise DomainError("centers have more coordinates than the dimension")
    thresholds = np.broadcast_to(np.asarray(thresholds, dtype=float), (k,)).copy()
    is_cap = np.broadcast_to(np.asarray(is_cap, dtype=bool), (k,)).copy()
    gen = as_generator(rng)
    marginals = [float(cap_measure(d, t)) if c else 1.0 - float(cap_measure(d, t)) for t, c in zip(thresholds, is_cap)]
    if any(m <= 0.0 for m in marginals):
        raise DomainError("every constraint needs positive measure")
    ends = _stage_ends(marginals, stage_target)
    tunings = None
    if w < d:
        pilot_gen, gen = gen.spawn(2)
        pilot = max(200, int(pilot_fraction * particles))
        tunings = _pilot_tunings(centers, thresholds, is_cap, d, pilot, pilot_gen, sweeps, ends)
    measures, extinct, moved = _splitting_pass(centers, thresholds, is_cap, d, particles, gen, sweeps, ends, tunings)
    return SplittingResult(measures, extinct, moved)


def _plain_prefix_measures(centers, thresholds, is_cap, d, samples, gen, chunk=200_000):
    # fresh uniform draws for every prefix
    k, w = centers.shape
    measures = np.ones(k + 1)
    for t in range(1, k + 1):
        hits = 0
        for size in chunk_sizes(samples, chunk):
            y = _uniform_projection(d, w, size, gen)
            hits += int(np.count_nonzero(_satisfies(y, centers[:t], thresholds[:t], is_cap[:t])))
        measures[t] = hits / samples
    return measures


# --- martingale traces --------------------------------------------------------

@dataclass(frozen=True)
class MartingaleTrace:
    """R_t = rho(L_t) / prod_i rho(S_i) along one draw of k centers.

    ``ratios`` averages the independent replicate estimates in
    ``replicate_ratios``; ``per_step_stderr`` is the standard error of that
    average.  A prefix estimated at zero measure stops the trace: the
    remaining ratios are 0 and ``truncated_at`` records the step.
    """

    ratios: np.ndarray
    j: int
    k: int
    p: float
    per_step_stderr: np.ndarray
    replicate_ratios: np.ndarray = field(repr=False)
    truncated_at: int | None = None

    @property
    def truncated(self) -> bool:
        return self.truncated_at is not None


def martingale_ratio_trace(k: int, j: int, d: int, p: float, mc_samples: int, rng=None,
                           method: str = "splitting", replicates: int = 2, sweeps: int = 20) -> MartingaleTrace:
    """One trace of R_0..R_k for j random caps followed by k - j random anti-caps.

    ``mc_samples`` is the particle count per replicate (``method="splitting"``)
    or the fresh sample count per prefix (``method="plain"``).
    """
    if not 0 <= j <= k:
        raise DomainError(f"need 0 <= j <= k, got j={j}, k={k}")
    if not 0 < p < 1:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    if replicates < 1:
        raise DomainError("at least one replicate is needed")
    stream = as_stream(rng)
    tau = tau_of_p(d, p)
    is_cap = np.arange(k) < j
    expected = np.concatenate([[1.0], np.cumprod(np.where(is_cap, p, 1.0 - p))])
    if k == 0:
        ones = np.ones(1)
        return MartingaleTrace(ones, j, k, p, np.zeros(1), np.ones((replicates, 1)))
    centers = reduced_sphere_vectors(k, d, 1, stream.substream(0))[0]
    reps = np.empty((replicates, k + 1))
    truncated_at = None
    for r in range(replicates):
        gen = stream.substream(1 + r).generator()
        if method == "splitting":
            res = sequential_intersection(centers, tau, is_cap, d, mc_samples, gen, sweeps)
            measures = res.measures
        elif method == "plain":
            measures = _plain_prefix_measures(centers, np.full(k, tau), is_cap, d, mc_samples, gen)
        else:
            raise DomainError(f"unknown method {method!r}")
        reps[r] = measures / expected
        zero = np.flatnonzero(measures == 0.0)
        if zero.size:
            truncated_at = int(zero[0]) if truncated_at is None else min(truncated_at, int(zero[0]))
    ratios = reps.mean(axis=0)
    if replicates > 1:
        stderr = reps.std(axis=0, ddof=1) / math.sqrt(replicates)
    elif method == "plain":
        q = np.clip(ratios * expected, 0, 1)
        stderr = np.sqrt(q * (1 - q) / mc_samples) / expected
    else:
        stderr = np.full(k + 1, np.nan)
    stderr[0] = 0.0
    return MartingaleTrace(ratios, j, k, p, stderr, reps, truncated_at)


def _trace_task(task):
    k, j, d, p, mc_samples, stream, method, replicates, sweeps = task
    return martingale_ratio_trace(k, j, d, p, mc_samples, stream, method, replicates, sweeps)


def martingale_traces(k: int, j: int, d: int, p: float, traces: int, mc_samples: int, rng=None,
                      method: str = "splitting", replicates: int = 2, sweeps: int = 20,
                      workers: int = 1) -> list[MartingaleTrace]:
    """Independent traces; trace i always uses substream i, whatever the worker count."""
    stream = as_stream(rng)
    tasks = [(k, j, d, p, mc_samples, stream.substream(i), method, replicates, sweeps) for i in range(traces)]
    return map_indexed(_trace_task, tasks, workers)


def noise_corrected_std(first: np.ndarray, second: np.ndarray) -> float:
    """Across-draw std of a quantity measured twice with independent estimator noise.

    The covariance of two independent replicates contains the between-draw
    variance only.
    """
    first, second = np.asarray(first, float), np.asarray(second, float)
    if first.shape != second.shape or first.size < 2:
        raise DomainError("need two equal-length replicate vectors with at least two entries")
    cov = np.sum((first - first.mean()) * (second - second.mean())) / (first.size - 1)
    return math.sqrt(max(cov, 0.0))


@dataclass(frozen=True)
class RatioSummary:
    """Distribution of one ratio across independent draws."""

    mean: float
    stderr: float
    std: float
    std_corrected: float
    quantiles: dict
    values: np.ndarray = field(repr=False)


QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


def summarize_ratios(replicate_values: np.ndarray) -> RatioSummary:
    """``replicate_values`` is (draws, replicates)."""
    reps = np.atleast_2d(np.asarray(replicate_values, dtype=float))
    values = reps.mean(axis=1)
    n = values.size
    std = float(values.std(ddof=1)) if n > 1 else 0.0
    corrected = noise_corrected_std(reps[:, 0], reps[:, 1]) if reps.shape[1] > 1 and n > 1 else std
    qs = {q: float(v) for q, v in zip(QUANTILE_LEVELS, np.quantile(values, QUANTILE_LEVELS))}
    return RatioSummary(float(values.mean()), std / math.sqrt(n), std, corrected, qs, values)


def final_ratio_summary(traces: Sequence[MartingaleTrace]) -> RatioSummary:
    return summarize_ratios(np.array([t.replicate_ratios[:, -1] for t in traces]))


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def bootstrap_slope_ci(xs, replicate_sets, stat, draws: int = 1000, level: float = 0.95, rng=None):
    """Percentile bootstrap interval of ``loglog_slope(xs, [stat(set) ...])``.

    ``replicate_sets[i]`` is a (draws_i, ...) array resampled by rows.
    """
    gen = as_generator(rng)
    slopes = []
    for _ in range(draws):
        ys = [stat(s[gen.integers(0, len(s), len(s))]) for s in replicate_sets]
        if all(y > 0 for y in ys):
            slopes.append(loglog_slope(xs, ys))
    lo, hi = np.quantile(slopes, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def two_cap_intersection(d: int, tau: float, s: float) -> float:
    """Measure of the intersection of two tau-caps whose centers have inner product ``s``.

    Conditions on a = <c1, x>; the component of x along the second center is
    then s a + sqrt(1 - s^2) sqrt(1 - a^2) b with b distributed as an inner
    product in dimension d - 1.
    """
    def integrand(a):
        den = math.sqrt(max(1.0 - s * s, 0.0) * max(1.0 - a * a, 0.0))
        if den == 0.0:
            inside = float(s * a >= tau)
        else:
            inside = float(cap_measure(d - 1, min(max((tau - s * a) / den, -1.0), 1.0)))
        return float(inner_product_density(d, a)) * inside

    lo = max(tau, -1.0)
    return integrate.quad(integrand, lo, 1.0, limit=200, epsabs=0.0, epsrel=1e-11)[0]


def ratio_second_moment(k: int, j: int, d: int, p: float) -> float:
    """E[R_k^2] over random centers for j caps and k - j anti-caps of measure p.

    Writing rho(L)^2 as the probability that two independent uniform points
    both lie in L and averaging over the centers first gives
    E_s[(q(s) / p^2)^j ((1 - 2p + q(s)) / (1 - p)^2)^(k - j)], where s is
    the inner product of the two points and q(s) the two-cap intersection.
    """
    if not 0 <= j <= k:
        raise DomainError(f"need 0 <= j <= k, got j={j}, k={k}")
    tau = tau_of_p(d, p)
    p = float(cap_measure(d, tau))

    def integrand(s):
        q = two_cap_intersection(d, tau, s)
        return float(inner_product_density(d, s)) * (q / p**2) ** j * ((1 - 2 * p + q) / (1 - p) ** 2) ** (k - j)

    step = 1.0 / math.sqrt(d)
    points = [i * step for i in range(-8, 9) if abs(i * step) < 1.0]
    return integrate.quad(integrand, -1.0, 1.0, points=points, limit=400, epsrel=1e-10)[0]


def exact_ratio_std(k: int, j: int, d: int, p: float) -> float:
    """Standard deviation of R_k across center draws, from :func:`ratio_second_moment`."""
    return math.sqrt(max(ratio_second_moment(k, j, d, p) - 1.0, 0.0))


def anticap_concentration_experiment(m: int, d: int, p: float, trials: int, mc_samples: int, rng=None,
                                     workers: int = 1, sweeps: int = 20) -> RatioSummary:
    """Summary of rho(A) / (1 - p)^m over independent draws of m anti-cap centers."""
    if m == 0:
        ones = np.ones((trials, 2))
        return summarize_ratios(ones)
    traces = martingale_traces(m, 0, d, p, trials, mc_samples, rng, "splitting", 2, sweeps, workers)
    return final_ratio_summary(traces)
