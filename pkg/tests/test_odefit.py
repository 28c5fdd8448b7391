"""Tests for the classic chemostat ODE and the Monod calibration."""
import numpy as np
import pytest

from chemostat_kit import ChemostatParams
from chemostat_kit.odefit import MonodFit, classic_equilibrium, classic_solve, fit_monod


@pytest.fixture(scope="module")
def params():
    return ChemostatParams(D=0.2, V=3.0)


class _Ref:
    def __init__(self, t, substrate, biomass):
        self.t, self.substrate, self.biomass = t, substrate, biomass


def test_washout_equilibrium_when_started_empty(params):
    t, Y, S = classic_solve(0.0, 2.0, params, 0.4, 4.0, t_max=60.0)
    assert np.all(Y == 0.0)
    assert S[-1] == pytest.approx(params.s_in, rel=1e-4)


def test_interior_equilibrium_fixed_point(params):
    mu, ks = 0.397, 3.996
    y_star, s_star = classic_equilibrium(params, mu, ks)
    assert s_star == pytest.approx(params.D * ks / (mu - params.D), rel=1e-12)
    # time derivatives vanish at the fixed point
    mu_s = mu * s_star / (ks + s_star)
    assert mu_s == pytest.approx(params.D, rel=1e-12)
    dS = params.D * (params.s_in - s_star) - params.k * mu_s * y_star
    assert dS == pytest.approx(0.0, abs=1e-12)


def test_long_run_converges_to_equilibrium(params):
    mu, ks = 0.397, 3.996
    y_star, s_star = classic_equilibrium(params, mu, ks)
    t, Y, S = classic_solve(4.1667, params.s0, params, mu, ks, t_max=400.0)
    assert Y[-1] == pytest.approx(y_star, rel=1e-4)
    assert S[-1] == pytest.approx(s_star, rel=1e-4)


def test_affine_invariant_decays_monotonically(params):
    t, Y, S = classic_solve(1.0, 5.0, params, 0.5, 5.0, t_max=50.0)
    gap = np.abs(S + params.k * Y - params.s_in)
    assert np.all(np.diff(gap) <= 1e-9)
    assert gap[-1] < 1e-3


def test_classic_solve_rejects_bad_inputs(params):
    with pytest.raises(ValueError):
        classic_solve(-1.0, 5.0, params, 0.4, 4.0, t_max=1.0)
    with pytest.raises(ValueError):
        classic_solve(1.0, 5.0, params, 0.0, 4.0, t_max=1.0)
    with pytest.raises(ValueError):
        classic_solve(1.0, 5.0, params, 0.4, 4.0)   # no horizon or grid


def test_fit_recovers_exact_reference(params):
    t, Y, S = classic_solve(1.25, params.s0, params, 0.4, 4.0, t_max=80.0)
    fit = fit_monod(_Ref(t, S, Y), params)
    assert fit.mu_max == pytest.approx(0.4, rel=1e-3)
    assert fit.k_s == pytest.approx(4.0, rel=1e-3)
    assert fit.residual < 1e-10


def test_fit_residual_not_worse_than_grid(params):
    t, Y, S = classic_solve(1.25, params.s0, params, 0.31, 2.2, t_max=40.0)
    ref = _Ref(t, S, Y)
    fit = fit_monod(ref, params, grid_n=12)
    # the returned point is at least as good as every coarse-grid candidate
    from chemostat_kit.odefit import _residual_factory
    resid = _residual_factory(t, S, Y, params, None, 0.01)
    for mu in fit.grid_mu:
        for ks in fit.grid_ks:
            assert fit.residual <= resid(float(mu), float(ks)) + 1e-15


def test_fit_stable_under_grid_refinement(params):
    t, Y, S = classic_solve(1.25, params.s0, params, 0.45, 6.0, t_max=60.0,
                            sample_dt=0.1)
    t2, Y2, S2 = classic_solve(1.25, params.s0, params, 0.45, 6.0, t_max=60.0,
                               sample_dt=0.05)
    f1 = fit_monod(_Ref(t, S, Y), params)
    f2 = fit_monod(_Ref(t2, S2, Y2), params)
    assert f2.mu_max == pytest.approx(f1.mu_max, rel=0.01)
    assert f2.k_s == pytest.approx(f1.k_s, rel=0.01)


def test_fit_rejects_degenerate_reference(params):
    t = np.linspace(0.0, 10.0, 101)
    with pytest.raises(ValueError):
        fit_monod(_Ref(t, np.full(101, 5.0), np.zeros(101)), params)


def test_fit_is_deterministic(params):
    t, Y, S = classic_solve(2.0, params.s0, params, 0.33, 3.0, t_max=30.0)
    a = fit_monod(_Ref(t, S, Y), params)
    b = fit_monod(_Ref(t, S, Y), params)
    assert (a.mu_max, a.k_s, a.residual) == (b.mu_max, b.k_s, b.residual)
    assert a.trace == b.trace


def test_monod_fit_validation():
    with pytest.raises(ValueError):
        MonodFit(mu_max=-0.1, k_s=1.0, residual=0.0)
