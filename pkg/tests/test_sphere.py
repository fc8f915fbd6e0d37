import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from rgglab.errors import DomainError, EmptyCapError
from rgglab.sphere import (
    CapSpec,
    Orientation,
    cap_measure,
    inner_product_density,
    log_cap_measure,
    region_mask,
    region_membership,
    sample_cap_latitude,
    sample_in_cap,
    sample_uniform_sphere,
    slab_measure,
    tau_of_p,
    unit_vector,
)

from conftest import D_GRID, P_GRID, SLAB_CONSTANT, binomial_se, within_sigmas


def mp_cap(d, tau, dps=50):
    # independent high-precision oracle: integrate the density directly
    mpmath.mp.dps = dps
    d = mpmath.mpf(d)
    c = mpmath.gamma(d / 2) / (mpmath.gamma((d - 1) / 2) * mpmath.sqrt(mpmath.pi))
    return c * mpmath.quad(lambda t: (1 - t * t) ** ((d - 3) / 2), [mpmath.mpf(tau), 1])


def mp_cap_beta(d, tau, dps=60):
    # arbitrary-precision incomplete beta, for tails where quadrature struggles
    mpmath.mp.dps = dps
    x = 1 - mpmath.mpf(tau) ** 2
    return mpmath.betainc(mpmath.mpf(d - 1) / 2, mpmath.mpf(1) / 2, 0, x, regularized=True) / 2


# --- uniform sampling -------------------------------------------------------

def test_uniform_rejects_small_dimension(gen):
    with pytest.raises(DomainError):
        sample_uniform_sphere(1, gen)


def test_uniform_circle_mean_is_zero(gen):
    x = sample_uniform_sphere(2, gen, size=1_000_000)
    se = np.sqrt(0.5 / x.shape[0])  # each coordinate has variance 1/d
    assert np.all(np.abs(x.mean(axis=0)) <= 4 * se)


def test_uniform_second_moment_is_one_over_d(gen):
    x = sample_uniform_sphere(100, gen, size=100_000)
    assert abs(np.mean(x[:, 0] ** 2) - 0.01) <= 0.05 * 0.01


def test_uniform_d3_upper_cap_fraction(gen):
    x = sample_uniform_sphere(3, gen, size=1_000_000)
    frac = np.mean(x[:, 0] >= 0.5)
    assert within_sigmas(frac, 0.25, binomial_se(0.25, x.shape[0]))


@given(st.integers(2, 400), st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_uniform_has_unit_norm(d, seed):
    x = sample_uniform_sphere(d, seed, size=8)
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)


def test_unit_vector_normalizes():
    v = unit_vector([3.0, 4.0])
    assert np.allclose(v, [0.6, 0.8])
    with pytest.raises(DomainError):
        unit_vector([0.0, 0.0])
    with pytest.raises(DomainError):
        unit_vector([1.0])


# --- inner product density --------------------------------------------------

def test_density_d3_is_flat():
    assert inner_product_density(3, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(inner_product_density(3, np.linspace(-0.9, 0.9, 7)), 0.5)


def test_density_d2_arcsine():
    assert inner_product_density(2, 0.0) == pytest.approx(1 / math.pi, rel=1e-14)
    t = 0.6
    assert inner_product_density(2, t) == pytest.approx(1 / (math.pi * math.sqrt(1 - t * t)), rel=1e-13)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_density_integrates_to_one_small_d(d):
    # endpoint behaviour (1 - t^2)^((d-3)/2) is handed to QUADPACK as an algebraic weight
    expo = (d - 3) / 2
    const = inner_product_density(d, 0.0)
    total, _ = integrate.quad(lambda t: const, -1, 1, weight="alg", wvar=(expo, expo))
    assert abs(total - 1.0) <= 1e-10


@pytest.mark.parametrize("d", [3, 7, 50, 400, 3000, 100_000])
def test_density_integrates_to_one(d):
    s = 1 / math.sqrt(d)
    pts = sorted({0.0, *[k * s for k in (-8, -4, -2, -1, 1, 2, 4, 8) if abs(k * s) < 1]})
    total, _ = integrate.quad(
        lambda t: inner_product_density(d, t), -1, 1, points=pts, limit=500, epsabs=1e-13, epsrel=1e-13
    )
    assert abs(total - 1.0) <= 1e-10


@pytest.mark.parametrize("d", [3, 10, 200])
def test_density_is_minus_derivative_of_cap(d):
    t, h = 0.13, 1e-6
    fd = (cap_measure(d, t - h) - cap_measure(d, t + h)) / (2 * h)
    assert fd == pytest.approx(inner_product_density(d, t), rel=1e-7)


def test_density_domain_error():
    with pytest.raises(DomainError):
        inner_product_density(5, 1.5)


# --- cap measure ------------------------------------------------------------

@pytest.mark.parametrize("d", [2, 3, 4, 17, 1000, 10**6])
def test_hemisphere(d):
    assert cap_measure(d, 0.0) == 0.5


def test_cap_closed_forms():
    assert cap_measure(3, 0.5) == pytest.approx(0.25, abs=1e-15)
    assert cap_measure(2, math.sqrt(2) / 2) == pytest.approx(0.25, abs=1e-15)
    taus = np.linspace(-0.99, 0.99, 397)
    assert np.max(np.abs(cap_measure(3, taus) - (1 - taus) / 2)) <= 1e-10
    assert np.max(np.abs(cap_measure(2, taus) - np.arccos(taus) / np.pi)) <= 1e-10


def test_cap_endpoints_exact():
    for d in (2, 3, 50):
        assert cap_measure(d, 1.0) == 0.0
        assert cap_measure(d, -1.0) == 1.0


@pytest.mark.parametrize("d,tau", [(5, 0.3), (40, 0.2), (40, -0.35), (300, 0.1), (300, 0.6)])
def test_cap_matches_high_precision_quadrature(d, tau):
    assert float(cap_measure(d, tau)) == pytest.approx(float(mp_cap(d, tau)), rel=1e-11)


def test_log_cap_below_underflow():
    # cap_measure underflows to 0 here; the log form must not
    for d, tau in [(1000, 0.9), (5000, 0.5), (200, 0.999)]:
        ref = float(mpmath.log(mp_cap_beta(d, tau)))
        assert log_cap_measure(d, tau) == pytest.approx(ref, rel=1e-12)
    assert log_cap_measure(50, 0.2) == pytest.approx(math.log(cap_measure(50, 0.2)), rel=1e-14)
    assert log_cap_measure(50, -0.2) == pytest.approx(math.log(cap_measure(50, -0.2)), rel=1e-14)
    assert log_cap_measure(50, 1.0) == -math.inf


def test_cap_values_near_1e_minus_300_are_representable():
    d = 2000
    tau = 0.9
    value = cap_measure(d, 0.6)
    assert 0 < value < 1e-150
    assert math.isfinite(log_cap_measure(d, tau))


@pytest.mark.parametrize("d", [2, 3, 10, 100, 1000])
def test_cap_strictly_decreasing(d):
    # tau >= 0 suffices: cap(-tau) = 1 - cap(tau), and near 1 the float64 grid cannot resolve steps
    taus = np.linspace(0.0, 0.999, 2001)
    vals = cap_measure(d, taus)
    positive = vals > 1e-300
    assert np.all(np.diff(vals[positive]) < 0)


def test_cap_domain_error():
    with pytest.raises(DomainError):
        cap_measure(5, 1.0001)
    with pytest.raises(DomainError):
        cap_measure(1, 0.0)


# --- threshold inversion ----------------------------------------------------

def test_tau_examples():
    for d in (2, 3, 77, 5000):
        assert tau_of_p(d, 0.5) == 0.0
    assert tau_of_p(3, 0.25) == pytest.approx(0.5, abs=1e-14)
    tau = tau_of_p(500, 0.01)
    assert abs(cap_measure(500, tau) - 0.01) <= 1e-12


@pytest.mark.parametrize("p", P_GRID)
@pytest.mark.parametrize("d", D_GRID)
def test_tau_round_trip_on_grid(d, p):
    assert abs(cap_measure(d, tau_of_p(d, p)) - p) <= 1e-12


@given(st.integers(3, 3000), st.floats(1e-5, 0.99))
@settings(max_examples=60, deadline=None)
def test_tau_round_trip(d, p):
    assert abs(cap_measure(d, tau_of_p(d, p)) - p) <= 1e-12


@given(st.integers(2, 3000), st.floats(1e-8, 0.5))
@settings(max_examples=60, deadline=None)
def test_tau_upper_bound(d, p):
    assert tau_of_p(d, p) <= math.sqrt(2 * math.log(1 / p) / d) + 1e-12


def test_levy_bound_on_grid():
    for d in D_GRID:
        for p in P_GRID:
            tau = tau_of_p(d, p)
            assert 2 * cap_measure(d, tau) <= 4 * math.exp(-tau * tau * d / 2) + 1e-12


@given(st.integers(2, 5000), st.floats(0.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_levy_bound_in_log_space(d, tau):
    assert math.log(2) + log_cap_measure(d, tau) <= math.log(4) - tau * tau * d / 2 + 1e-12


def sandwich_logs(d, tau):
    log_pow = (d - 1) / 2 * math.log1p(-tau * tau)
    base = math.log(tau * math.sqrt(d))
    return log_pow - math.log(6) - base, log_pow - math.log(2) - base


def test_tail_sandwich_on_grid():
    checked = 0
    for d in D_GRID:
        for p in P_GRID:
            tau = tau_of_p(d, p)
            if tau < math.sqrt(2 / d) or tau >= 1:
                continue
            lo, hi = sandwich_logs(d, tau)
            assert lo <= log_cap_measure(d, tau) + 1e-12
            assert log_cap_measure(d, tau) <= hi + 1e-12
            checked += 1
    assert checked >= 12


@given(st.integers(3, 20_000), st.floats(0.0, 1.0, exclude_max=True))
@settings(max_examples=300, deadline=None)
def test_tail_sandwich_in_log_space(d, u):
    tau = math.sqrt(2 / d) + u * (1 - math.sqrt(2 / d))
    if tau >= 1:
        return
    lo, hi = sandwich_logs(d, tau)
    value = log_cap_measure(d, tau)
    assert lo <= value + 1e-12 and value <= hi + 1e-12


@pytest.mark.parametrize("d", [2, 3, 10, 100, 1000])
def test_tau_strictly_decreasing(d):
    ps = np.geomspace(1e-6, 0.999, 60)
    taus = [tau_of_p(d, p) for p in ps]
    assert np.all(np.diff(taus) < 0)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_tau_domain_error(p):
    with pytest.raises(DomainError):
        tau_of_p(10, p)


# --- slab -------------------------------------------------------------------

def test_slab_examples():
    assert slab_measure(40, 0.1, 0.0) == 0.0
    assert slab_measure(3, 0.5, 0.1) == pytest.approx(0.1, abs=1e-14)
    assert slab_measure(3, 0.95, 0.2) == pytest.approx(cap_measure(3, 0.75), abs=1e-15)
    with pytest.raises(DomainError):
        slab_measure(3, 0.5, -0.1)


def slab_bound(d, p, eps):
    tau = tau_of_p(d, p)
    return p * SLAB_CONSTANT * eps * math.exp(2 * d * tau * eps) * math.sqrt(d * math.log(1 / p))


def test_slab_example_with_calibrated_constant():
    d, p, eps = 50, 0.1, 0.05
    assert slab_measure(d, tau_of_p(d, p), eps) <= slab_bound(d, p, eps)


def test_slab_bound_on_wider_grid():
    # wider than the calibration grid in scripts/calibrate_slab.py
    checked = 0
    for d in [3, 5, 20, 100, 500, 2000, 5000]:
        for p in [1e-6, 1e-5, 1e-2, 0.05, 0.2, 0.45]:
            tau = tau_of_p(d, p)
            if not 0.0 <= tau <= 0.5:
                continue
            for eps in [1e-5, 1e-3, 0.02, 0.2, 0.5, 1.0]:
                assert slab_measure(d, tau, eps) <= slab_bound(d, p, eps)
                checked += 1
    assert checked > 100


# --- sampling inside caps ---------------------------------------------------

def test_in_cap_membership(gen):
    for d, tau in [(2, 0.3), (3, 0.9), (50, 0.2), (500, -0.1), (500, 0.999)]:
        c = sample_uniform_sphere(d, gen)
        x = sample_in_cap(c, tau, gen, size=20_000)
        assert np.all(x @ c >= tau - 1e-12)
        assert np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)


def test_in_cap_full_sphere_matches_uniform(gen):
    c = unit_vector([1.0, 2.0, 2.0])
    x = sample_in_cap(c, -1.0, gen, size=1_000_000)
    se = np.sqrt(1 / 3 / x.shape[0])
    assert within_sigmas(np.mean(x @ c), 0.0, se)


def test_in_cap_d3_hemisphere_latitude(gen):
    c = unit_vector([0.0, 0.0, 1.0])
    x = sample_in_cap(c, 0.0, gen, size=1_000_000)
    se = np.sqrt(1 / 12 / x.shape[0])
    assert within_sigmas(np.mean(x @ c), 0.5, se)


@pytest.mark.parametrize("d,tau", [(10, 0.3), (200, 0.1)])
def test_in_cap_latitude_ks(gen, d, tau):
    n = 1_000_000
    c = sample_uniform_sphere(d, gen)
    lat = sample_in_cap(c, tau, gen, size=n) @ c if d == 10 else sample_cap_latitude(d, tau, gen, size=n)
    total = cap_measure(d, tau)
    ks = stats.kstest(lat, lambda t: 1.0 - cap_measure(d, np.clip(t, -1, 1)) / total)
    critical = math.sqrt(-math.log(1e-3 / 2) / 2) / math.sqrt(n)
    assert ks.statistic < critical


def test_in_cap_orthogonal_part_is_isotropic(gen):
    d = 6
    c = unit_vector(np.ones(d))
    x = sample_in_cap(c, 0.4, gen, size=200_000)
    perp = x - np.outer(x @ c, c)
    # mean of the orthogonal component vanishes by rotational symmetry
    assert np.all(np.abs(perp.mean(axis=0)) < 4 * np.sqrt(1 / d / x.shape[0]))


def test_in_cap_empty(gen):
    with pytest.raises(EmptyCapError):
        sample_in_cap(unit_vector([1.0, 0.0, 0.0]), 1.0, gen)


# --- regions ----------------------------------------------------------------

def test_region_examples():
    c = unit_vector([1.0, -1.0, 0.5])
    assert region_membership(c, [])
    assert region_membership(c, [CapSpec(c, 0.9)])
    assert not region_membership(-c, [CapSpec(c, 0.0)])
    assert region_membership(-c, [CapSpec(c, 0.0, Orientation.ANTICAP)])


def test_region_dimension_mismatch():
    with pytest.raises(DomainError):
        region_membership(np.array([1.0, 0.0]), [CapSpec(unit_vector([1.0, 0.0, 0.0]), 0.1)])


def test_region_mask_matches_pointwise(gen):
    d = 7
    caps = [
        CapSpec(sample_uniform_sphere(d, gen), 0.1, Orientation.CAP),
        CapSpec(sample_uniform_sphere(d, gen), -0.2, Orientation.ANTICAP),
    ]
    pts = sample_uniform_sphere(d, gen, size=500)
    mask = region_mask(pts, caps)
    assert mask.tolist() == [region_membership(x, caps) for x in pts]
    assert mask.tolist() == [
        all((x @ cap.center >= cap.threshold) == cap.is_cap for cap in caps) for x in pts
    ]


def test_cap_spec_validation_and_complement():
    c = unit_vector([1.0, 0.0])
    with pytest.raises(DomainError):
        CapSpec(c, 1.2)
    assert CapSpec(c, 0.2).complement().orientation is Orientation.ANTICAP
