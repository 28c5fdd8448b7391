"""Explicit upwind solver for the population-balance equation.

The mass density p_t(x) on a uniform grid x_i = i*dx, i = 0..I, is advanced
by explicit Euler: upwind transport -rho(s,x_i)(p_i - p_{i-1})/dx, the
pointwise term -(d rho/dx) p_i, the reaction -(lambda(s,x_i)+D) p_i, the
birth integral 2 dx sum_j lambda(s,x_j)/x_j q(x_i/x_j) p_j over j = 1..I,
and the coupled substrate step
s' = s + dt (D (s_in - s) - (k/V) dx sum_j rho(s,x_j) p_j), with the
boundary condition p_0 = 0.

For integer kernel exponents the birth double sum factorizes through the
binomial expansion of (1-u)^(p_beta-1), turning it into p_beta suffix sums
per step (O(I p_beta) instead of O(I^2)); the expansions are accumulated
with compensated summation and agree with the dense evaluation to ~1e-13
in the max norm.  A dense mode is kept for cross-checks and non-integer
exponents.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .model import (
    DivisionLaw,
    GompertzGrowth,
    InitialMassDensity,
    LinearGrowth,
    kernel_beta_norm,
    kernel_density_clipped,
)
from .params import ChemostatParams


class NumericError(RuntimeError):
    """Stability guard violations and numerical blow-ups."""


@dataclass(frozen=True)
class MassGrid:
    """Uniform mass grid with I interior cells; x_I = m_max."""

    cells: int
    m_max: float

    def __post_init__(self):
        if self.cells < 2:
            raise ValueError(f"grid needs at least 2 cells, got {self.cells}")
        if self.m_max <= 0.0:
            raise ValueError("m_max must be positive")

    @property
    def dx(self) -> float:
        return self.m_max / self.cells

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.cells + 1, dtype=float) * self.dx


@dataclass
class DensityGrid:
    """Number density p_i (units 1/mg) per node plus the substrate at time t."""

    grid: MassGrid
    t: float
    p: np.ndarray
    s: float

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.size != self.grid.cells + 1:
            raise ValueError(f"p must have {self.grid.cells + 1} nodes, got {self.p.size}")

    @property
    def count(self) -> float:
        return float(self.grid.dx * self.p[1:].sum())

    def biomass(self, V: float) -> float:
        return float(self.grid.dx * (self.grid.nodes[1:] * self.p[1:]).sum() / V)


@dataclass
class IdeResult:
    """Deterministic trajectory plus density snapshots from ide_solve."""

    t: np.ndarray
    count: np.ndarray
    biomass: np.ndarray          # concentration, mg/l
    substrate: np.ndarray
    grid: MassGrid
    snapshots: list = field(default_factory=list)   # (t, x, p, p_normalized)
    negative_clamps: int = 0
    birth_clamps: int = 0
    cfl_ratio: float = 0.0


def ide_cfl(params: ChemostatParams, grid: MassGrid, dt: float, growth=None) -> float:
    """Upwind stability ratio max rho_g * dt / dx for the explicit scheme."""
    growth = growth if growth is not None else GompertzGrowth(params)
    return growth.max_speed() * dt / grid.dx


@njit(cache=True)
def _step_kernel(p, pnew, s, dt, dx, x, shape, dshape, lam,
                 rml, khalf, D, s_in, kV, ipow, jpow, coefs, birth, hbuf):
    """One explicit Euler step; returns (s_new, sum p, sum x p, clamps)."""
    I = p.size - 1
    sc = s if s > 0.0 else 0.0
    r = rml * sc / (khalf + sc)

    # birth integral via suffix sums of the binomial expansion
    nm = coefs.size
    birth[0] = 0.0
    for j in range(1, I + 1):
        hbuf[j] = lam[j] * p[j] / x[j]
        birth[j] = 0.0
    for m in range(nm):
        acc = 0.0
        comp = 0.0
        cm = coefs[m]
        for j in range(I, 0, -1):
            y = hbuf[j] * jpow[m, j] - comp
            tt = acc + y
            comp = (tt - acc) - y
            acc = tt
            birth[j] += cm * ipow[m, j] * acc
    birth_clamps = 0
    for i in range(1, I + 1):
        if birth[i] < 0.0:
            birth[i] = 0.0
            birth_clamps += 1

    cons = 0.0
    for j in range(1, I + 1):
        cons += shape[j] * p[j]
    s_new = s + dt * (D * (s_in - s) - kV * dx * r * cons)

    pnew[0] = 0.0
    neg_clamps = 0
    tot0 = 0.0
    tot1 = 0.0
    inv_dx = 1.0 / dx
    for i in range(1, I + 1):
        adv = -r * shape[i] * (p[i] - p[i - 1]) * inv_dx
        dxterm = -r * dshape[i] * p[i]
        reac = -(lam[i] + D) * p[i]
        v = p[i] + dt * (adv + dxterm + reac + birth[i])
        if v < 0.0:
            v = 0.0
            neg_clamps += 1
        pnew[i] = v
        tot0 += v
        tot1 += x[i] * v
    return s_new, tot0, tot1, neg_clamps, birth_clamps


class IdeSolver:
    """Precomputed machinery for repeated explicit steps on one grid."""

    def __init__(self, params: ChemostatParams, grid: MassGrid, dt: float,
                 growth=None, division: Optional[DivisionLaw] = None,
                 birth_mode: str = "auto", force_cfl: bool = False):
        self.params = params
        self.grid = grid
        self.dt = float(dt)
        self.growth = growth if growth is not None else GompertzGrowth(params)
        self.division = division if division is not None else DivisionLaw()
        if birth_mode not in ("auto", "fast", "dense"):
            raise ValueError(f"unknown birth_mode {birth_mode!r}")

        self.cfl_ratio = ide_cfl(params, grid, self.dt, self.growth)
        if self.cfl_ratio > 1.0 and not force_cfl:
            raise NumericError(
                f"CFL ratio {self.cfl_ratio:.4f} > 1 for dt={dt}, dx={grid.dx}; "
                "reduce dt or refine the guard with force_cfl")

        x = grid.nodes
        self.x = x
        self.shape_vec, self.dshape_vec, (self.rml, self.khalf) = self._factorize(x)
        self.s_dependent_division = self.division.kind == "custom"
        self.lam = np.asarray(self.division.rate(params.s0, x, params), dtype=float)

        pm1 = params.p_beta - 1.0
        integral = abs(pm1 - round(pm1)) < 1e-9 and 0 <= round(pm1) <= 64
        if birth_mode == "auto":
            self.birth_mode = "fast" if integral else "dense"
        else:
            self.birth_mode = birth_mode
        if self.birth_mode == "fast" and not integral:
            raise ValueError("fast birth mode requires an integer p_beta")

        I = grid.cells
        if self.birth_mode == "fast":
            n = int(round(pm1))
            norm = kernel_beta_norm(params.p_beta)
            ms = np.arange(n + 1)
            self.coefs = np.array(
                [math.comb(n, m) * (-1.0) ** m * 2.0 * grid.dx / norm for m in ms])
            jj = np.arange(I + 1, dtype=float)
            jj[0] = 1.0
            self.jpow = np.empty((n + 1, I + 1))
            self.ipow = np.empty((n + 1, I + 1))
            for m in ms:
                self.jpow[m] = jj ** (-(n + m))
                self.ipow[m] = jj ** (n + m)
                self.ipow[m, 0] = 0.0
        else:
            # dense ratio kernel q(x_i / x_j), zero outside [0, 1]
            norm = kernel_beta_norm(params.p_beta)
            ii = np.arange(I + 1, dtype=float)[:, None]
            jj = np.arange(I + 1, dtype=float)[None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(jj > 0, ii / np.where(jj > 0, jj, 1.0), 2.0)
            self.qmat = kernel_density_clipped(ratio, params.p_beta, norm)
            self.qmat[:, 0] = 0.0
            self.coefs = self.jpow = self.ipow = None
        self._birth_buf = np.zeros(I + 1)
        self._h_buf = np.zeros(I + 1)
        self.negative_clamps = 0
        self.birth_clamps = 0

    def _factorize(self, x):
        g = self.growth
        if isinstance(g, GompertzGrowth):
            shape = np.zeros_like(x)
            shape[1:] = x[1:] * (math.log(self.params.m_max) - np.log(x[1:]))
            if x[-1] == self.params.m_max:
                shape[-1] = 0.0
            dshape = np.zeros_like(x)
            dshape[1:] = (math.log(self.params.m_max) - np.log(x[1:])) - 1.0
            return shape, dshape, (self.params.r_max, self.params.k_r)
        if isinstance(g, LinearGrowth):
            return x.copy(), np.ones_like(x), (g.mu_max, g.k_s)
        raise ValueError("IDE growth law must be GompertzGrowth or LinearGrowth")

    def _birth_dense(self, p, s):
        lam = self.lam
        if self.s_dependent_division:
            lam = np.asarray(self.division.rate(s, self.x, self.params), dtype=float)
        h = np.zeros_like(p)
        h[1:] = lam[1:] * p[1:] / self.x[1:]
        return 2.0 * self.grid.dx * (self.qmat @ h)

    def step(self, p: np.ndarray, s: float):
        """Advance one dt; returns (p_new, s_new, count, biomass_first_moment)."""
        params = self.params
        if self.s_dependent_division:
            self.lam = np.asarray(self.division.rate(s, self.x, params), dtype=float)
        if self.birth_mode == "fast":
            pnew = np.empty_like(p)
            s_new, tot0, tot1, neg, bc = _step_kernel(
                p, pnew, s, self.dt, self.grid.dx, self.x, self.shape_vec,
                self.dshape_vec, self.lam, self.rml, self.khalf, params.D,
                params.s_in, params.k / params.V, self.ipow, self.jpow,
                self.coefs, self._birth_buf, self._h_buf)
            self.negative_clamps += neg
            self.birth_clamps += bc
            return pnew, s_new, tot0, tot1
        # dense path (numpy)
        sc = max(s, 0.0)
        r = self.rml * sc / (self.khalf + sc)
        birth = self._birth_dense(p, s)
        bneg = birth < 0.0
        self.birth_clamps += int(bneg.sum())
        birth[bneg] = 0.0
        cons = float((self.shape_vec[1:] * p[1:]).sum())
        s_new = s + self.dt * (params.D * (params.s_in - s)
                               - params.k / params.V * self.grid.dx * r * cons)
        pnew = np.empty_like(p)
        pnew[0] = 0.0
        adv = -r * self.shape_vec[1:] * (p[1:] - p[:-1]) / self.grid.dx
        dxterm = -r * self.dshape_vec[1:] * p[1:]
        reac = -(self.lam[1:] + params.D) * p[1:]
        pnew[1:] = p[1:] + self.dt * (adv + dxterm + reac + birth[1:])
        neg = pnew < 0.0
        self.negative_clamps += int(neg.sum())
        pnew[neg] = 0.0
        tot0 = float(pnew[1:].sum())
        tot1 = float((self.x[1:] * pnew[1:]).sum())
        return pnew, s_new, tot0, tot1


def ide_step(state: DensityGrid, dt: float, params: ChemostatParams,
             growth=None, division: Optional[DivisionLaw] = None,
             birth_mode: str = "auto", force_cfl: bool = False) -> DensityGrid:
    """Advance one explicit Euler step exactly per the printed scheme."""
    solver = IdeSolver(params, state.grid, dt, growth=growth, division=division,
                       birth_mode=birth_mode, force_cfl=force_cfl)
    pnew, s_new, _, _ = solver.step(state.p, state.s)
    if not (math.isfinite(s_new) and np.all(np.isfinite(pnew))):
        raise NumericError("non-finite values after one step")
    return DensityGrid(grid=state.grid, t=state.t + dt, p=pnew, s=s_new)


def project_initial_density(density: InitialMassDensity, grid: MassGrid,
                            params: ChemostatParams, y0: float) -> np.ndarray:
    """Grid samples of the initial density scaled to the target biomass
    concentration y0 = (1/V) dx sum x_i p_i (mg/l)."""
    x = grid.nodes
    d = np.asarray(density.evaluate(x), dtype=float)
    d[0] = 0.0
    first_moment = grid.dx * float((x * d).sum())
    if first_moment <= 0.0:
        raise ValueError("initial density has zero biomass on the grid")
    return d * (y0 * params.V / first_moment)


def ide_solve(params: ChemostatParams, density, t_max: float, *, cells: int,
              dt: float, y0: Optional[float] = None, n0: Optional[int] = None,
              sample_dt: float = 0.1, snapshot_times=(), growth=None,
              division: Optional[DivisionLaw] = None, birth_mode: str = "auto",
              force_cfl: bool = False, p0: Optional[np.ndarray] = None) -> IdeResult:
    """Integrate the population-balance system to t_max.

    The initial grid data is the density scaled so the initial biomass
    concentration equals ``y0`` (or n0 * mean mass / V when ``n0`` is given);
    alternatively pass explicit node values ``p0``.
    """
    grid = MassGrid(cells=cells, m_max=params.m_max)
    solver = IdeSolver(params, grid, dt, growth=growth, division=division,
                       birth_mode=birth_mode, force_cfl=force_cfl)
    if p0 is not None:
        p = np.asarray(p0, dtype=float).copy()
        if p.size != cells + 1:
            raise ValueError(f"p0 must have {cells + 1} nodes")
    else:
        if y0 is None:
            if n0 is None:
                raise ValueError("provide y0, n0 or p0")
            y0 = n0 * density.mean() / params.V
        p = project_initial_density(density, grid, params, y0)
    p[0] = 0.0
    s = params.s0

    n_steps = int(round(t_max / dt))
    every = max(1, int(round(sample_dt / dt)))
    snap_steps = {int(round(ts / dt)): float(ts) for ts in snapshot_times}

    times = [0.0]
    counts = [grid.dx * p[1:].sum()]
    biomasses = [grid.dx * (grid.nodes[1:] * p[1:]).sum() / params.V]
    substrates = [s]
    snapshots = []

    def snap(ts, pvec):
        total = grid.dx * pvec[1:].sum()
        pn = pvec / total if total > 0 else np.zeros_like(pvec)
        snapshots.append((ts, grid.nodes.copy(), pvec.copy(), pn))

    if 0 in snap_steps:
        snap(snap_steps[0], p)

    for n in range(1, n_steps + 1):
        p, s, tot0, tot1 = solver.step(p, s)
        if not (math.isfinite(s) and math.isfinite(tot0)):
            raise NumericError(f"non-finite values at step {n} (t={n * dt:.6g})")
        if n % every == 0 or n == n_steps:
            times.append(n * dt)
            counts.append(grid.dx * tot0)
            biomasses.append(grid.dx * tot1 / params.V)
            substrates.append(s)
        if n in snap_steps:
            snap(snap_steps[n], p)

    return IdeResult(
        t=np.asarray(times), count=np.asarray(counts),
        biomass=np.asarray(biomasses), substrate=np.asarray(substrates),
        grid=grid, snapshots=snapshots,
        negative_clamps=solver.negative_clamps, birth_clamps=solver.birth_clamps,
        cfl_ratio=solver.cfl_ratio)
