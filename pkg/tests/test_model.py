"""Unit tests for rates, the division kernel and initial mass densities."""
import math

import numpy as np
import pytest
import mpmath
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from chemostat_kit import (
    ChemostatParams,
    DivisionLaw,
    InitialMassDensity,
    division_rate,
    growth_speed,
    growth_speed_dx,
    initial_density_eval,
    kernel_beta_norm,
    kernel_density,
    kernel_sample,
    monod_rate,
    sample_initial_population,
)
from chemostat_kit.model import growth_lipschitz_bound


@pytest.fixture(scope="module")
def params():
    return ChemostatParams(D=0.2, V=1.0)


def simpson(f, a, b, n=8192):
    """Composite Simpson quadrature on [a, b] with n panels (n even)."""
    xs = np.linspace(a, b, n + 1)
    ys = f(xs)
    h = (b - a) / n
    return h / 3.0 * (ys[0] + ys[-1] + 4.0 * ys[1:-1:2].sum() + 2.0 * ys[2:-2:2].sum())


# --------------------------------------------------------------------------
# Parameters
# --------------------------------------------------------------------------

def test_default_params_match_reference_table():
    p = ChemostatParams(D=0.1, V=1.0)
    assert (p.s0, p.s_in) == (5.0, 10.0)
    assert (p.m_max, p.m_div) == (0.001, 0.0004)
    assert (p.lambda_bar, p.p_lambda, p.p_beta) == (1.0, 1000.0, 7.0)
    assert (p.r_max, p.k_r, p.k) == (1.0, 10.0, 1.0)


@pytest.mark.parametrize("bad", [
    dict(D=0.0), dict(V=-1.0), dict(m_max=-0.001), dict(p_beta=0.5),
    dict(s0=-1.0), dict(m_div=0.002), dict(k_r=0.0),
])
def test_params_reject_invalid(bad):
    kwargs = dict(D=0.2, V=1.0)
    kwargs.update(bad)
    with pytest.raises(ValueError):
        ChemostatParams(**kwargs)


# --------------------------------------------------------------------------
# Monod and Gompertz rates
# --------------------------------------------------------------------------

def test_monod_values(params):
    assert monod_rate(0.0, params) == 0.0
    assert monod_rate(params.k_r, params) == pytest.approx(0.5 * params.r_max, rel=1e-15)
    assert monod_rate(5.0, params) == pytest.approx(1.0 * 5.0 / 15.0, rel=1e-15)
    with pytest.raises(ValueError):
        monod_rate(-1e-9, params)


@given(s1=st.floats(0.0, 1e3), s2=st.floats(0.0, 1e3))
def test_monod_monotone(s1, s2):
    p = ChemostatParams(D=0.2, V=1.0)
    lo, hi = min(s1, s2), max(s1, s2)
    assert monod_rate(lo, p) <= monod_rate(hi, p) <= p.r_max


def test_growth_speed_boundary_zeros(params):
    assert growth_speed(3.7, params.m_max, params) == 0.0
    assert growth_speed(0.0, 5e-4, params) == 0.0
    assert growth_speed(7.0, 0.0, params) == 0.0


def test_growth_speed_max_matches_grid_scan(params):
    # saturated-substrate limit: the flux peaks at x = m_max / e
    s = 1e9
    xs = np.linspace(0.0, params.m_max, 200001)
    scan = growth_speed(s, xs, params)
    peak = monod_rate(s, params) * params.m_max / math.e
    assert np.max(scan) == pytest.approx(peak, rel=1e-9)
    assert xs[np.argmax(scan)] == pytest.approx(params.m_max / math.e, rel=1e-4)
    assert peak == pytest.approx(3.679e-4, rel=1e-3)


def test_growth_speed_domain_errors(params):
    with pytest.raises(ValueError):
        growth_speed(1.0, -1e-6, params)
    with pytest.raises(ValueError):
        growth_speed(1.0, params.m_max * 1.000001, params)


@given(s=st.floats(0.0, 1e6), x=st.floats(0.0, 0.001))
def test_growth_speed_bounds(s, x):
    p = ChemostatParams(D=0.2, V=1.0)
    g = growth_speed(s, x, p)
    assert 0.0 <= g <= p.r_max * p.m_max / math.e * (1.0 + 1e-12)


@given(s1=st.floats(0.0, 100.0), s2=st.floats(0.0, 100.0),
       x=st.floats(1e-8, 0.001))
def test_growth_speed_lipschitz_in_s(s1, s2, x):
    p = ChemostatParams(D=0.2, V=1.0)
    kg = growth_lipschitz_bound(p)
    lhs = abs(growth_speed(s1, x, p) - growth_speed(s2, x, p))
    assert lhs <= kg * abs(s1 - s2) + 1e-15


def test_growth_speed_dx_values(params):
    r = monod_rate(5.0, params)
    assert growth_speed_dx(5.0, params.m_max, params) == pytest.approx(-r, rel=1e-14)
    assert growth_speed_dx(5.0, params.m_max / math.e, params) == pytest.approx(0.0, abs=1e-14)
    assert growth_speed_dx(5.0, 0.0005, params) == pytest.approx(-0.10228, abs=1e-5)
    with pytest.raises(ValueError):
        growth_speed_dx(5.0, 0.0, params)


def test_growth_speed_dx_matches_finite_differences(params):
    h = 1e-9
    for x in (1e-5, 2e-4, 5e-4, 9e-4):
        fd = (growth_speed(5.0, x + h, params) - growth_speed(5.0, x - h, params)) / (2 * h)
        assert growth_speed_dx(5.0, x, params) == pytest.approx(fd, rel=1e-5)


# --------------------------------------------------------------------------
# Division rate
# --------------------------------------------------------------------------

def test_division_rate_values(params):
    assert division_rate(1.0, params.m_div, params) == 0.0
    assert division_rate(1.0, params.m_max, params) == pytest.approx(params.lambda_bar, rel=1e-15)
    assert division_rate(1.0, 0.2 * params.m_div, params) == 0.0
    # arbitrary-precision oracle for the mid-range value: with the default
    # parameters the log arguments are (x - m_div)*1000 + 1 = 1.3 and 1.6
    expected = float(mpmath.log(mpmath.mpf("1.3")) / mpmath.log(mpmath.mpf("1.6")))
    assert division_rate(1.0, 0.0007, params) == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(0.55817, abs=1e-4)


def test_division_rate_domain(params):
    with pytest.raises(ValueError):
        division_rate(1.0, -1e-9, params)
    with pytest.raises(ValueError):
        division_rate(1.0, params.m_max + 1e-9, params)


@given(x=st.floats(0.0, 0.001))
def test_division_rate_range(x):
    p = ChemostatParams(D=0.2, V=1.0)
    lam = division_rate(0.0, x, p)
    assert 0.0 <= lam <= p.lambda_bar
    if x < p.m_div:
        assert lam == 0.0


def test_division_law_variants(params):
    assert DivisionLaw("zero").rate(1.0, 8e-4, params) == 0.0
    assert DivisionLaw("constant", value=0.7).rate(1.0, 8e-4, params) == 0.7
    assert DivisionLaw("constant", value=0.7).bound(params) == 0.7
    assert DivisionLaw().rate(1.0, 8e-4, params) == division_rate(1.0, 8e-4, params)
    custom = DivisionLaw("custom", value=2.0, fn=lambda s, x: 2.0 * s)
    assert custom.rate(0.5, 8e-4, params) == 1.0
    with pytest.raises(ValueError):
        DivisionLaw("bogus")


# --------------------------------------------------------------------------
# Division kernel
# --------------------------------------------------------------------------

def test_kernel_norm_closed_form():
    # integer exponent: B(7) = 6!^2 / 13! = 1/12012
    assert kernel_beta_norm(7.0) == pytest.approx(1.0 / 12012.0, abs=1e-12)
    assert kernel_beta_norm(1.0) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("p_beta", [1.0, 2.0, 3.5, 7.0])
def test_kernel_norm_matches_quadrature(p_beta):
    quad = simpson(lambda a: (a * (1.0 - a)) ** (p_beta - 1.0), 0.0, 1.0)
    assert kernel_beta_norm(p_beta) == pytest.approx(quad, abs=1e-12)


def test_kernel_density_uniform_case():
    alphas = np.linspace(0.0, 1.0, 11)
    assert np.allclose(kernel_density(alphas, 1.0), 1.0)


def test_kernel_density_endpoints_and_integral():
    assert kernel_density(0.0, 7.0) == 0.0
    assert kernel_density(1.0, 7.0) == 0.0
    total = simpson(lambda a: kernel_density(a, 7.0), 0.0, 1.0)
    assert total == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        kernel_density(-0.01, 7.0)


@given(alpha=st.floats(1e-9, 1.0), p_beta=st.floats(1.0, 12.0))
def test_kernel_density_symmetry(alpha, p_beta):
    # alpha below ~eps is excluded: 1-alpha then rounds to exactly 1.0
    q1 = kernel_density(alpha, p_beta)
    q2 = kernel_density(1.0 - alpha, p_beta)
    assert q1 == pytest.approx(q2, rel=1e-12, abs=1e-9)


def test_kernel_density_symmetry_exact_points():
    for p_beta in (1.0, 2.0, 7.0):
        assert kernel_density(0.0, p_beta) == kernel_density(1.0, p_beta)
        for a in (0.25, 0.5, 0.125):
            assert kernel_density(a, p_beta) == pytest.approx(
                kernel_density(1.0 - a, p_beta), rel=1e-12)


def test_kernel_sample_statistics():
    rng = np.random.default_rng(20240811)
    a = kernel_sample(rng, 7.0, size=200_000)
    assert np.all((a > 0.0) & (a < 1.0))
    assert a.mean() == pytest.approx(0.5, abs=2.5e-3)
    # variance of the symmetric beta kernel is 1/(4(2 p_beta + 1))
    assert a.var() == pytest.approx(1.0 / 60.0, abs=1e-3)


@pytest.mark.parametrize("p_beta", [1.0, 2.0, 7.0])
def test_kernel_sample_ks_against_analytic_cdf(p_beta):
    rng = np.random.default_rng(7 + int(p_beta))
    a = kernel_sample(rng, p_beta, size=20_000)
    res = sps.kstest(a, sps.beta(p_beta, p_beta).cdf)
    assert res.pvalue > 0.01


def test_kernel_sample_scalar():
    rng = np.random.default_rng(3)
    a = kernel_sample(rng, 7.0)
    assert isinstance(a, float) and 0.0 < a < 1.0


# --------------------------------------------------------------------------
# Initial mass densities
# --------------------------------------------------------------------------

def test_transient_density_values(params):
    d = InitialMassDensity.transient()
    assert initial_density_eval(d, 0.0004, params) == 0.0
    assert initial_density_eval(d, 0.0008, params) == 0.0
    assert initial_density_eval(d, 0.000625, params) == pytest.approx(2.0 ** -10, rel=1e-12)
    with pytest.raises(ValueError):
        initial_density_eval(d, -1e-9, params)
    with pytest.raises(ValueError):
        initial_density_eval(d, 0.0011, params)


def test_smooth_density_values(params):
    d = InitialMassDensity.smooth()
    assert initial_density_eval(d, 0.0005, params) == pytest.approx(2.0 ** -10, rel=1e-12)
    assert initial_density_eval(d, 0.0003, params) == 0.0
    assert initial_density_eval(d, 0.0007, params) == 0.0
    assert d.mean() == pytest.approx(0.0005, rel=1e-9)


def test_custom_density_roundtrip(params):
    d = InitialMassDensity.custom(lambda x: np.ones_like(x), support=(2e-4, 4e-4))
    assert d.evaluate(3e-4) == 1.0
    assert d.evaluate(1e-4) == 0.0
    rng = np.random.default_rng(1)
    xs = sample_initial_population(5000, d, rng, params)
    assert xs.min() > 2e-4 and xs.max() < 4e-4
    assert xs.mean() == pytest.approx(3e-4, abs=3e-6)


def test_sample_initial_population_empty_and_support(params):
    d = InitialMassDensity.transient()
    rng = np.random.default_rng(2)
    assert sample_initial_population(0, d, rng, params).size == 0
    xs = sample_initial_population(100_000, d, rng, params)
    assert np.all((xs > 0.0005) & (xs < 0.00075))
    # symmetric density: mean is the support midpoint; sigma via quadrature
    grid = np.linspace(0.0005, 0.00075, 8193)
    dv = d.evaluate(grid)
    mean = np.trapezoid(grid * dv, grid) / np.trapezoid(dv, grid)
    var = np.trapezoid(grid ** 2 * dv, grid) / np.trapezoid(dv, grid) - mean ** 2
    assert mean == pytest.approx(0.000625, rel=1e-9)
    assert xs.mean() == pytest.approx(mean, abs=3.0 * math.sqrt(var / xs.size))


def test_sample_initial_population_rejects_zero_density(params):
    with pytest.raises(ValueError):
        InitialMassDensity.custom(lambda x: np.zeros_like(x), support=(2e-4, 4e-4))


def test_sample_initial_population_requires_support_inside_domain(params):
    d = InitialMassDensity.custom(lambda x: np.ones_like(x), support=(2e-4, 4e-4), sup_bound=1.0)
    bad = InitialMassDensity.custom(lambda x: np.ones_like(x), support=(2e-4, 2e-3), sup_bound=1.0)
    rng = np.random.default_rng(0)
    sample_initial_population(10, d, rng, params)
    with pytest.raises(ValueError):
        sample_initial_population(10, bad, rng, params)
