"""Classic two-ODE chemostat model and Monod-parameter calibration.

dY/dt = (mu(S) - D) Y,  dS/dt = D (s_in - S) - k mu(S) Y,
with mu(S) = mu_max S / (K_s + S).  The calibration minimizes the quadratic
distance between the ODE and a reference (substrate, biomass) trajectory on
the reference time grid: a deterministic coarse log-grid search followed by
Nelder-Mead refinement in log-parameter space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .params import ChemostatParams


@dataclass
class ClassicState:
    """Biomass and substrate concentrations, mg/l."""

    Y: float
    S: float

    def __post_init__(self):
        if self.Y < 0.0 or self.S < 0.0:
            raise ValueError("concentrations must be >= 0")


@dataclass
class MonodFit:
    """Fitted Monod parameters and the optimization record."""

    mu_max: float
    k_s: float
    residual: float
    grid_mu: np.ndarray = field(default_factory=lambda: np.empty(0))
    grid_ks: np.ndarray = field(default_factory=lambda: np.empty(0))
    grid_best: tuple = (0.0, 0.0)
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.mu_max <= 0.0 or self.k_s <= 0.0:
            raise ValueError("fitted parameters must be positive")


@njit(cache=True)
def _classic_rk4(y0, s0, D, s_in, k, mu_max, k_s, grid, h_max, out_y, out_s):
    y = y0
    s = s0
    out_y[0] = y
    out_s[0] = s
    t = grid[0]
    for idx in range(1, grid.size):
        span = grid[idx] - t
        nsub = int(math.ceil(span / h_max - 1e-12))
        if nsub < 1:
            nsub = 1
        h = span / nsub
        for _ in range(nsub):
            sc = s if s > 0.0 else 0.0
            mu1 = mu_max * sc / (k_s + sc)
            k1y = (mu1 - D) * y
            k1s = D * (s_in - s) - k * mu1 * y
            y2 = y + 0.5 * h * k1y
            s2 = s + 0.5 * h * k1s
            sc = s2 if s2 > 0.0 else 0.0
            mu2 = mu_max * sc / (k_s + sc)
            k2y = (mu2 - D) * y2
            k2s = D * (s_in - s2) - k * mu2 * y2
            y3 = y + 0.5 * h * k2y
            s3 = s + 0.5 * h * k2s
            sc = s3 if s3 > 0.0 else 0.0
            mu3 = mu_max * sc / (k_s + sc)
            k3y = (mu3 - D) * y3
            k3s = D * (s_in - s3) - k * mu3 * y3
            y4 = y + h * k3y
            s4 = s + h * k3s
            sc = s4 if s4 > 0.0 else 0.0
            mu4 = mu_max * sc / (k_s + sc)
            k4y = (mu4 - D) * y4
            k4s = D * (s_in - s4) - k * mu4 * y4
            y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            s = s + (h / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
            if s < 0.0:
                s = 0.0
            if y < 0.0:
                y = 0.0
        t = grid[idx]
        out_y[idx] = y
        out_s[idx] = s


def classic_solve(y0: float, s0: float, params: ChemostatParams, mu_max: float,
                  k_s: float, t_max: Optional[float] = None,
                  sample_grid: Optional[np.ndarray] = None,
                  sample_dt: float = 0.1, h_max: float = 0.01):
    """RK4 solution of the classic chemostat ODEs on the sample grid.

    Returns (t, Y, S) arrays.
    """
    if y0 < 0.0 or s0 < 0.0:
        raise ValueError("initial concentrations must be >= 0")
    if mu_max <= 0.0 or k_s <= 0.0:
        raise ValueError("mu_max and k_s must be positive")
    if sample_grid is None:
        if t_max is None:
            raise ValueError("provide t_max or sample_grid")
        n = int(round(t_max / sample_dt))
        grid = np.arange(n + 1, dtype=float) * sample_dt
    else:
        grid = np.asarray(sample_grid, dtype=float)
    out_y = np.empty(grid.size)
    out_s = np.empty(grid.size)
    _classic_rk4(float(y0), float(s0), params.D, params.s_in, params.k,
                 float(mu_max), float(k_s), grid, float(h_max), out_y, out_s)
    return grid.copy(), out_y, out_s


def classic_equilibrium(params: ChemostatParams, mu_max: float, k_s: float):
    """Interior fixed point (Y*, S*) of the classic model; requires mu_max > D
    and the resulting S* < s_in."""
    if mu_max <= params.D:
        raise ValueError("no interior equilibrium: mu_max <= D")
    s_star = params.D * k_s / (mu_max - params.D)
    if s_star >= params.s_in:
        raise ValueError("no interior equilibrium: S* >= s_in")
    return (params.s_in - s_star) / params.k, s_star


def _residual_factory(ref_t, ref_s, ref_y, params, weights, h_max):
    if weights is None:
        w_s = 1.0 / max(float(ref_s.max() - ref_s.min()), 1e-12) ** 2
        w_y = 1.0 / max(float(ref_y.max() - ref_y.min()), 1e-12) ** 2
    else:
        w_s, w_y = float(weights[0]), float(weights[1])
    y0 = float(ref_y[0])
    s0 = float(ref_s[0])
    out_y = np.empty(ref_t.size)
    out_s = np.empty(ref_t.size)

    def residual(mu_max, k_s):
        _classic_rk4(y0, s0, params.D, params.s_in, params.k, mu_max, k_s,
                     ref_t, h_max, out_y, out_s)
        return float(w_s * ((out_s - ref_s) ** 2).sum()
                     + w_y * ((out_y - ref_y) ** 2).sum())

    return residual


def fit_monod(reference, params: ChemostatParams, weights=None,
              horizon: Optional[float] = None, grid_n: int = 32,
              mu_range=(0.05, 2.0), ks_range=(0.1, 100.0),
              refine_iters: int = 200, h_max: float = 0.01) -> MonodFit:
    """Least-squares Monod calibration against a reference trajectory.

    ``reference`` exposes ``t``, ``substrate`` and ``biomass`` arrays (e.g. an
    IdeResult).  The residual sums squared (S, Y) distances on the reference
    grid, each component normalized by its reference range unless explicit
    ``weights = (w_s, w_y)`` are given.  Deterministic: a lexicographic
    argmin over the coarse log grid seeds a fixed Nelder-Mead refinement.
    """
    ref_t = np.asarray(reference.t, dtype=float)
    ref_s = np.asarray(reference.substrate, dtype=float)
    ref_y = np.asarray(reference.biomass, dtype=float)
    if horizon is not None:
        keep = ref_t <= horizon + 1e-12
        ref_t, ref_s, ref_y = ref_t[keep], ref_s[keep], ref_y[keep]
    if ref_t.size < 3:
        raise ValueError("reference trajectory too short to fit")
    if float(np.max(np.abs(ref_y))) == 0.0:
        raise ValueError("degenerate reference: biomass is identically zero")

    residual = _residual_factory(ref_t, ref_s, ref_y, params, weights, h_max)

    grid_mu = np.geomspace(mu_range[0], mu_range[1], grid_n)
    grid_ks = np.geomspace(ks_range[0], ks_range[1], grid_n)
    best = (math.inf, 0.0, 0.0)
    for mu in grid_mu:                      # ascending scan: ties resolve to
        for ks in grid_ks:                  # the lexicographically lowest pair
            r = residual(mu, ks)
            if r < best[0]:
                best = (r, float(mu), float(ks))
    grid_best = (best[1], best[2])

    trace = [(best[1], best[2], best[0])]

    def objective(logp):
        return residual(math.exp(logp[0]), math.exp(logp[1]))

    def record(logp):
        trace.append((math.exp(logp[0]), math.exp(logp[1]), objective(logp)))

    x0 = np.log(np.array(grid_best))
    res = minimize(objective, x0, method="Nelder-Mead", callback=record,
                   options=dict(maxiter=refine_iters, xatol=1e-8, fatol=1e-14))
    mu_fit, ks_fit = math.exp(res.x[0]), math.exp(res.x[1])
    r_fit = float(res.fun)
    if r_fit > best[0]:                     # never worse than the grid optimum
        mu_fit, ks_fit, r_fit = best[1], best[2], best[0]
    return MonodFit(mu_max=mu_fit, k_s=ks_fit, residual=r_fit,
                    grid_mu=grid_mu, grid_ks=grid_ks, grid_best=grid_best,
                    trace=trace)
