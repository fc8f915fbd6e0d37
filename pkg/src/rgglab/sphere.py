"""Numerics on the unit sphere S^{d-1}.

Cap measures go through the regularized incomplete beta function.  For a
uniform point x and a fixed unit vector v the squared inner product
<x, v>^2 is Beta(1/2, (d-1)/2), so for tau >= 0

    rho(<x, v> >= tau) = I_{1 - tau^2}((d-1)/2, 1/2) / 2,

and negative thresholds follow from symmetry.  Unit vectors are plain numpy
arrays; batches are arrays of shape ``(size, d)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError, EmptyCapError, NumericError
from .rng import as_generator

__all__ = [
    "Orientation",
    "CapSpec",
    "unit_vector",
    "sample_uniform_sphere",
    "inner_product_density",
    "log_inner_product_density",
    "cap_measure",
    "log_cap_measure",
    "tau_of_p",
    "slab_measure",
    "sample_cap_latitude",
    "sample_in_cap",
    "sample_in_caps",
    "region_mask",
    "region_membership",
]


def _check_dim(d):
    if int(d) != d or d < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {d}")
    return int(d)


def unit_vector(coords) -> np.ndarray:
    """Normalize ``coords`` onto the sphere."""
    v = np.asarray(coords, dtype=float)
    if v.ndim != 1:
        raise DomainError("a unit vector is one-dimensional")
    _check_dim(v.shape[0])
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0.0:
        raise DomainError("cannot normalize a zero or non-finite vector")
    return v / norm


class Orientation(enum.Enum):
    CAP = "cap"
    ANTICAP = "anticap"


@dataclass(frozen=True, eq=False)
class CapSpec:
    """``{x : <center, x> >= threshold}`` for CAP, its complement for ANTICAP."""

    center: np.ndarray
    threshold: float
    orientation: Orientation = Orientation.CAP

    def __post_init__(self):
        if not -1.0 <= self.threshold <= 1.0:
            raise DomainError(f"cap threshold must lie in [-1, 1], got {self.threshold}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def is_cap(self) -> bool:
        return self.orientation is Orientation.CAP

    def complement(self) -> "CapSpec":
        other = Orientation.ANTICAP if self.is_cap else Orientation.CAP
        return CapSpec(self.center, self.threshold, other)


def sample_uniform_sphere(d: int, rng=None, size: int | None = None) -> np.ndarray:
    d = _check_dim(d)
    gen = as_generator(rng)
    shape = (d,) if size is None else (size, d)
    g = gen.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def log_inner_product_density(d: int, t):
    d = _check_dim(d)
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0):
        raise DomainError("inner product must lie in [-1, 1]")
    log_norm = special.gammaln(d / 2) - special.gammaln((d - 1) / 2) - 0.5 * math.log(math.pi)
    one_minus_t2 = (1.0 - t) * (1.0 + t)
    expo = (d - 3) / 2
    with np.errstate(divide="ignore"):
        body = np.where(expo == 0, 0.0, expo * np.log(one_minus_t2))
    out = log_norm + body
    return out[()] if out.ndim == 0 else out


def inner_product_density(d: int, t):
    """Density of <x, y> for independent uniform x, y on S^{d-1}."""
    return np.exp(log_inner_product_density(d, t))


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(~(np.abs(tau) <= 1.0)):
        raise DomainError("threshold must lie in [-1, 1]")
    return tau


def cap_measure(d: int, tau):
    """Uniform measure of ``{x : <v, x> >= tau}`` on S^{d-1}."""
    d = _check_dim(d)
    tau = _check_tau(tau)
    a = (d - 1) / 2
    t = np.abs(tau)
    # near the equator I_{1-t^2}(a, 1/2) is close to 1 and loses ~1e-12; use the complement there
    near = special.betainc(0.5, a, t * t)
    upper = np.where(near < 0.5, 0.5 - 0.5 * near, 0.5 * special.betainc(a, 0.5, (1.0 - t) * (1.0 + t)))
    out = np.where(tau >= 0, upper, 1.0 - upper)
    out = np.where(tau == 1.0, 0.0, np.where(tau == -1.0, 1.0, out))
    return out[()] if out.ndim == 0 else out


def _log_betainc_series(a: float, b: float, x: float) -> float:
    # I_x(a, b) = x^a (1-x)^b / (a B(a, b)) * sum_n (a+b)_n / (a+1)_n x^n
    log_pref = a * math.log(x) + b * math.log1p(-x) - math.log(a) - special.betaln(a, b)
    total, term, n = 1.0, 1.0, 0
    while True:
        term *= x * (a + b + n) / (a + 1 + n)
        total += term
        n += 1
        if term < 1e-17 * total:
            break
        if n > 10_000_000:
            raise NumericError("incomplete beta series did not converge")
    return log_pref + math.log(total)


def log_cap_measure(d: int, tau: float) -> float:
    """Natural log of :func:`cap_measure`, accurate far below double underflow."""
    d = _check_dim(d)
    tau = float(_check_tau(tau))
    if tau == 1.0:
        return -math.inf
    if tau < 0:
        return math.log1p(-float(cap_measure(d, -tau)))
    value = float(cap_measure(d, tau))
    if value > 1e-280:
        return math.log(value)
    return math.log(0.5) + _log_betainc_series((d - 1) / 2, 0.5, (1.0 - tau) * (1.0 + tau))


def tau_of_p(d: int, p: float, max_iter: int = 200) -> float:
    """Threshold tau with cap_measure(d, tau) = p.

    Bisection down to a 1e-15 bracket, then one Newton step on the density.
    """
    d = _check_dim(d)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -tau_of_p(d, 1.0 - p, max_iter)
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        if hi - lo <= 1e-15:
            break
        mid = 0.5 * (lo + hi)
        if cap_measure(d, mid) > p:
            lo = mid
        else:
            hi = mid
    else:
        raise NumericError(f"tau_of_p did not converge for d={d}, p={p}")
    tau = 0.5 * (lo + hi)
    err = float(cap_measure(d, tau)) - p
    dens = float(inner_product_density(d, tau))
    if dens > 0 and np.isfinite(dens):
        polished = min(max(tau + err / dens, lo), hi)
        if abs(float(cap_measure(d, polished)) - p) < abs(err):
            tau = polished
    if not np.isfinite(tau):
        raise NumericError(f"tau_of_p produced a non-finite value for d={d}, p={p}")
    return float(tau)


def slab_measure(d: int, tau: float, eps: float) -> float:
    """Measure of the band ``tau - eps <= <v, x> <= tau + eps``."""
    if eps < 0:
        raise DomainError("eps must be non-negative")
    _check_tau(tau)
    if eps == 0:
        return 0.0
    lo = max(tau - eps, -1.0)
    hi = min(tau + eps, 1.0)
    return float(np.clip(cap_measure(d, lo) - cap_measure(d, hi), 0.0, 1.0))


def _latitude_quantile(d: int, q):
    # inverse of t -> cap_measure(d, t) through the Beta(1/2, (d-1)/2) law of t^2
    a = (d - 1) / 2
    q = np.asarray(q, dtype=float)
    upper = q <= 0.5
    tail = np.where(upper, 2.0 * q, 2.0 * (1.0 - q))
    t = np.sqrt(special.betainccinv(0.5, a, np.clip(tail, 0.0, 1.0)))
    return np.where(upper, t, -t)


def sample_cap_latitude(d: int, tau: float, rng=None, size: int | None = None):
    """Draw <center, x> for x uniform on a cap with threshold ``tau``."""
    d = _check_dim(d)
    if tau >= 1.0:
        raise EmptyCapError("cap with threshold >= 1 is empty")
    tau = max(float(tau), -1.0)
    gen = as_generator(rng)
    u = 1.0 - gen.random(size)  # (0, 1]
    t = _latitude_quantile(d, u * cap_measure(d, tau))
    return np.clip(t, tau, 1.0)


def _orthogonal_directions(centers: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    g = gen.standard_normal(centers.shape)
    g -= np.sum(g * centers, axis=-1, keepdims=True) * centers
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def sample_in_caps(centers: np.ndarray, tau: float, rng=None) -> np.ndarray:
    """One uniform point from the cap around each row of ``centers``."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    gen = as_generator(rng)
    t = sample_cap_latitude(centers.shape[1], tau, gen, size=centers.shape[0])
    u = _orthogonal_directions(centers, gen)
    return t[:, None] * centers + np.sqrt((1.0 - t) * (1.0 + t))[:, None] * u


def sample_in_cap(center, tau: float, rng=None, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on ``{x : <center, x> >= tau}``."""
    center = np.asarray(center, dtype=float)
    gen = as_generator(rng)
    n = 1 if size is None else size
    out = sample_in_caps(np.broadcast_to(center, (n, center.shape[0])), tau, gen)
    return out[0] if size is None else out


def _stack(caps: Sequence[CapSpec], dim: int):
    centers = np.empty((len(caps), dim))
    thresholds = np.empty(len(caps))
    is_cap = np.empty(len(caps), dtype=bool)
    for i, cap in enumerate(caps):
        if cap.dim != dim:
            raise DomainError(f"cap of dimension {cap.dim} tested against points of dimension {dim}")
        centers[i] = cap.center
        thresholds[i] = cap.threshold
        is_cap[i] = cap.is_cap
    return centers, thresholds, is_cap


def region_mask(points: np.ndarray, caps: Sequence[CapSpec]) -> np.ndarray:
    """Boolean mask of the rows of ``points`` inside every cap / anti-cap."""
    points = np.atleast_2d(points)
    if not caps:
        return np.ones(points.shape[0], dtype=bool)
    centers, thresholds, is_cap = _stack(caps, points.shape[1])
    inside = points @ centers.T >= thresholds
    return np.all(inside == is_cap, axis=1)


def region_membership(x, caps: Sequence[CapSpec]) -> bool:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DomainError("region_membership takes a single point")
    return bool(region_mask(x[None, :], caps)[0])
