"""Event-driven Monte Carlo simulation of the individual-based chemostat.

A run alternates deterministic flow (coupled growth/substrate ODEs) with
random events thinned against the global bound (lambda_bar + D) * N:
division (the picked cell of mass x becomes alpha*x, keeping its index, and
(1-alpha)*x, appended at the end) and up-take (the last cell takes the
removed slot).  Washout switches the run to the substrate-only flow.

Two engines share identical event-loop semantics and random streams:

* ``engine="fast"``   -- compiled loop that advances masses through the exact
  Gompertz flow map (all log-masses shrink by one common factor between
  events) and tracks the consumption sum through incrementally-maintained
  moments; cost per event is O(1).
* ``engine="reference"`` -- direct RK4 on the full coupled (S, masses)
  system; O(N) per event, used for validation and custom division laws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import DivisionLaw, InitialMassDensity, sample_initial_population
from .params import ChemostatParams
from .rngstream import Xoshiro256pp, derive_state

EVENT_DIVISION = 0
EVENT_UPTAKE = 1
EVENT_REJECTED = 2
EVENT_NAMES = {EVENT_DIVISION: "DIVISION", EVENT_UPTAKE: "UPTAKE", EVENT_REJECTED: "REJECTED"}

# diagnostics counter slots shared with the compiled engine
C_DIV, C_UPT, C_REJ, C_SCLAMP, C_SUMVIOL, C_MASSVIOL, C_REFRESH, C_WNEG = range(8)
_N_COUNTERS = 8


@dataclass
class IbmState:
    """Substrate concentration plus the multiset of individual masses at time t."""

    t: float
    s: float
    masses: np.ndarray

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if not (math.isfinite(self.t) and math.isfinite(self.s)) or not np.all(np.isfinite(self.masses)):
            raise ValueError("non-finite state")
        if self.s < 0.0:
            raise ValueError(f"substrate must be >= 0, got {self.s}")

    @property
    def n(self) -> int:
        return self.masses.size

    @property
    def biomass(self) -> float:
        return float(self.masses.sum())


@dataclass(frozen=True)
class IbmEvent:
    """One candidate event; alpha is NaN unless kind == DIVISION."""

    t: float
    kind: int
    index: int
    alpha: float
    n_after: int
    s_after: float

    @property
    def kind_name(self) -> str:
        return EVENT_NAMES[self.kind]


@dataclass
class EventLog:
    """Chronological record of candidate events (division / up-take / rejected)."""

    t: np.ndarray
    kind: np.ndarray
    index: np.ndarray
    alpha: np.ndarray
    n_after: np.ndarray
    s_after: np.ndarray

    def __len__(self) -> int:
        return self.t.size

    def __getitem__(self, i: int) -> IbmEvent:
        return IbmEvent(t=float(self.t[i]), kind=int(self.kind[i]),
                        index=int(self.index[i]), alpha=float(self.alpha[i]),
                        n_after=int(self.n_after[i]), s_after=float(self.s_after[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass
class Trajectory:
    """Observables on the sample grid plus optional mass snapshots."""

    t: np.ndarray
    n: np.ndarray
    biomass: np.ndarray          # concentration X/V, mg/l
    substrate: np.ndarray        # mg/l
    washout_time: Optional[float] = None
    snapshots: dict = field(default_factory=dict)   # time -> masses array


@dataclass
class IbmDiagnostics:
    divisions: int = 0
    uptakes: int = 0
    rejections: int = 0
    substrate_clamps: int = 0
    mass_sum_violations: int = 0
    mass_bound_violations: int = 0
    refreshes: int = 0
    nonpositive_w: int = 0

    @classmethod
    def from_counters(cls, c) -> "IbmDiagnostics":
        return cls(divisions=int(c[C_DIV]), uptakes=int(c[C_UPT]), rejections=int(c[C_REJ]),
                   substrate_clamps=int(c[C_SCLAMP]), mass_sum_violations=int(c[C_SUMVIOL]),
                   mass_bound_violations=int(c[C_MASSVIOL]), refreshes=int(c[C_REFRESH]),
                   nonpositive_w=int(c[C_WNEG]))

    @property
    def events(self) -> int:
        return self.divisions + self.uptakes + self.rejections


# --------------------------------------------------------------------------
# Deterministic flow between events
# --------------------------------------------------------------------------

def _gompertz_flux(s: float, x: np.ndarray, params: ChemostatParams) -> np.ndarray:
    """Unchecked Gompertz flux for RK4 stages; clamps s at 0 and x into range."""
    s = max(s, 0.0)
    r = params.r_max * s / (params.k_r + s)
    xc = np.clip(x, 0.0, params.m_max)
    out = np.zeros_like(xc)
    pos = xc > 0.0
    out[pos] = r * (math.log(params.m_max) - np.log(xc[pos])) * xc[pos]
    return out


def _flow_rk4(s: float, masses: np.ndarray, dt: float, params: ChemostatParams,
              h_max: float) -> tuple[float, np.ndarray, int, int]:
    """Advance (s, masses) by dt with equal RK4 substeps <= h_max, in place.

    Returns (s, masses, substrate_clamps, mass_clamps).
    """
    n_clamp_s = 0
    n_clamp_m = 0
    if dt <= 0.0:
        return s, masses, 0, 0
    if masses.size == 0:
        s = params.s_in + (s - params.s_in) * math.exp(-params.D * dt)
        return s, masses, 0, 0
    kv = params.k / params.V
    nsub = max(1, int(math.ceil(dt / h_max - 1e-12)))
    h = dt / nsub
    for _ in range(nsub):
        g1 = _gompertz_flux(s, masses, params)
        k1s = params.D * (params.s_in - s) - kv * g1.sum()
        x2 = masses + (0.5 * h) * g1
        s2 = s + 0.5 * h * k1s
        g2 = _gompertz_flux(s2, x2, params)
        k2s = params.D * (params.s_in - s2) - kv * g2.sum()
        x3 = masses + (0.5 * h) * g2
        s3 = s + 0.5 * h * k2s
        g3 = _gompertz_flux(s3, x3, params)
        k3s = params.D * (params.s_in - s3) - kv * g3.sum()
        x4 = masses + h * g3
        s4 = s + h * k3s
        g4 = _gompertz_flux(s4, x4, params)
        k4s = params.D * (params.s_in - s4) - kv * g4.sum()
        masses += (h / 6.0) * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
        s += (h / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        over = masses > params.m_max
        if over.any():
            n_clamp_m += int(over.sum())
            np.clip(masses, 0.0, params.m_max, out=masses)
        if s < 0.0:
            s = 0.0
            n_clamp_s += 1
    return s, masses, n_clamp_s, n_clamp_m


def integrate_flow(state: IbmState, dt: float, params: ChemostatParams,
                   h_max: float = 0.01) -> IbmState:
    """Advance the coupled mass/substrate flow by dt with no events.

    With an empty population the substrate follows the exact exponential
    relaxation toward s_in.  Masses stay in [0, m_max]; the substrate is
    clamped at 0 if the integrator undershoots.
    """
    if dt < 0.0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    masses = state.masses.copy()
    s, masses, _, _ = _flow_rk4(state.s, masses, dt, params, h_max)
    return IbmState(t=state.t + dt, s=s, masses=masses)


# --------------------------------------------------------------------------
# Reference event loop (spec-literal, O(N) per event)
# --------------------------------------------------------------------------

class _EventRecorder:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.t, self.kind, self.index, self.alpha, self.n_after, self.s_after = \
            [], [], [], [], [], []

    def add(self, t, kind, index, alpha, n_after, s_after):
        if self.enabled:
            self.t.append(t)
            self.kind.append(kind)
            self.index.append(index)
            self.alpha.append(alpha)
            self.n_after.append(n_after)
            self.s_after.append(s_after)

    def build(self) -> Optional[EventLog]:
        if not self.enabled:
            return None
        return EventLog(
            t=np.array(self.t, dtype=float),
            kind=np.array(self.kind, dtype=np.int8),
            index=np.array(self.index, dtype=np.int64),
            alpha=np.array(self.alpha, dtype=float),
            n_after=np.array(self.n_after, dtype=np.int64),
            s_after=np.array(self.s_after, dtype=float),
        )


def _run_reference(params: ChemostatParams, masses0: np.ndarray, grid: np.ndarray,
                   t_max: float, stream: Xoshiro256pp, division: DivisionLaw,
                   h_max: float, snapshot_times, log_events: bool):
    lam_bar = division.bound(params)
    masses = list(masses0.astype(float))
    s = params.s0
    t = 0.0
    diag = IbmDiagnostics()
    rec = _EventRecorder(log_events)
    washout_time = None
    snapshots = {}

    # checkpoints where the flow must stop exactly: sample grid + snapshots
    checkpoints = sorted(set(float(g) for g in grid) | set(float(x) for x in snapshot_times))
    cp_pos = 0
    out_n = np.zeros(grid.size, dtype=np.int64)
    out_x = np.zeros(grid.size, dtype=float)
    out_s = np.zeros(grid.size, dtype=float)
    grid_pos = 0
    grid_list = list(grid)

    def record_checkpoint(time_val):
        nonlocal grid_pos
        if grid_pos < len(grid_list) and grid_list[grid_pos] <= time_val:
            out_n[grid_pos] = len(masses)
            out_x[grid_pos] = math.fsum(masses) / params.V if masses else 0.0
            out_s[grid_pos] = s
            grid_pos += 1
        if time_val in snapshot_times_set:
            snapshots[time_val] = np.array(masses, dtype=float)

    snapshot_times_set = set(float(x) for x in snapshot_times)

    def advance(target):
        """Advance the flow to `target`, stopping at interior checkpoints."""
        nonlocal t, s, masses, cp_pos, diag
        while True:
            nxt = target
            while cp_pos < len(checkpoints) and checkpoints[cp_pos] <= t:
                cp_pos += 1
            if cp_pos < len(checkpoints) and checkpoints[cp_pos] < nxt:
                nxt = checkpoints[cp_pos]
            arr = np.array(masses, dtype=float)
            s2, arr, cs, _ = _flow_rk4(s, arr, nxt - t, params, h_max)
            s = s2
            masses[:] = list(arr)
            diag.substrate_clamps += cs
            t = nxt
            if t in snapshot_times_set or (grid_pos < len(grid_list) and grid_list[grid_pos] == t):
                record_checkpoint(t)
            if t >= target:
                return

    # initial checkpoint(s) at t == 0
    record_checkpoint(0.0)

    while t < t_max:
        n = len(masses)
        if n == 0:
            if washout_time is None:
                washout_time = t
            while grid_pos < len(grid_list):
                g = grid_list[grid_pos]
                out_n[grid_pos] = 0
                out_x[grid_pos] = 0.0
                out_s[grid_pos] = params.s_in + (s - params.s_in) * math.exp(-params.D * (g - t))
                grid_pos += 1
            for st in sorted(snapshot_times_set):
                if st >= t and st not in snapshots:
                    snapshots[st] = np.empty(0, dtype=float)
            s = params.s_in + (s - params.s_in) * math.exp(-params.D * (t_max - t))
            t = t_max
            break
        tau = (lam_bar + params.D) * n
        if tau <= 0.0:
            advance(t_max)
            continue
        u1 = stream.uniform()
        dt = -math.log1p(-u1) / tau
        t_event = t + dt
        if t_event > t_max:
            advance(t_max)
            break
        advance(t_event)
        j = min(int(stream.uniform() * n), n - 1)
        x = masses[j]
        lam = float(division.rate(s, x, params))
        u3 = stream.uniform()
        if u3 <= lam / (lam_bar + params.D):
            alpha = stream.beta_symmetric(params.p_beta)
            c1 = alpha * x
            # Sterbenz double-sweep: one of the two subtractions is exact,
            # so the children partition the parent exactly in doubles
            c2 = x - c1
            c1 = x - c2
            if c1 + c2 != x:
                diag.mass_sum_violations += 1
            if 0.0 < c1 <= params.m_max and 0.0 < c2 <= params.m_max:
                masses[j] = c1
                masses.append(c2)
                diag.divisions += 1
                rec.add(t, EVENT_DIVISION, j, alpha, len(masses), s)
            else:
                # unreachable for any alpha strictly inside (0,1); defensive
                diag.mass_bound_violations += 1
                diag.rejections += 1
                rec.add(t, EVENT_REJECTED, j, alpha, len(masses), s)
        elif u3 <= (lam + params.D) / (lam_bar + params.D):
            masses[j] = masses[-1]
            masses.pop()
            diag.uptakes += 1
            rec.add(t, EVENT_UPTAKE, j, math.nan, len(masses), s)
        else:
            diag.rejections += 1
            rec.add(t, EVENT_REJECTED, j, math.nan, len(masses), s)

    if grid_pos < len(grid_list):       # trailing grid points at exactly t_max
        while grid_pos < len(grid_list):
            out_n[grid_pos] = len(masses)
            out_x[grid_pos] = math.fsum(masses) / params.V if masses else 0.0
            out_s[grid_pos] = s
            grid_pos += 1
    for st in sorted(snapshot_times_set):
        if st not in snapshots:
            snapshots[st] = np.array(masses, dtype=float)

    traj = Trajectory(t=grid.copy(), n=out_n, biomass=out_x, substrate=out_s,
                      washout_time=washout_time, snapshots=snapshots)
    return traj, rec.build(), diag


# --------------------------------------------------------------------------
# Public runner
# --------------------------------------------------------------------------

def make_sample_grid(t_max: float, sample_dt: float) -> np.ndarray:
    n = int(round(t_max / sample_dt))
    grid = np.arange(n + 1, dtype=float) * sample_dt
    if grid[-1] < t_max - 1e-12 * max(1.0, t_max):
        grid = np.append(grid, t_max)
    grid[-1] = min(grid[-1], t_max)
    return grid


def run_ibm(params: ChemostatParams, n0: int, density: InitialMassDensity,
            t_max: float, seed, *, sample_dt: float = 0.1,
            sample_grid: Optional[np.ndarray] = None, h_max: float = 0.01,
            division: Optional[DivisionLaw] = None, snapshot_times=(),
            log_events: bool = False, engine: str = "fast",
            initial_masses: Optional[np.ndarray] = None, replicate: int = 0):
    """Simulate one realization of the individual-based model.

    Returns ``(trajectory, event_log, diagnostics)``; the event log is None
    unless ``log_events`` is set.  ``seed`` plus ``replicate`` determine the
    random stream; identical inputs give bit-identical results for a given
    engine.
    """
    if t_max <= 0.0:
        raise ValueError(f"t_max must be > 0, got {t_max}")
    division = division if division is not None else DivisionLaw()
    if sample_grid is None:
        grid = make_sample_grid(t_max, sample_dt)
    else:
        grid = np.asarray(sample_grid, dtype=float)
        if grid.size and (grid[0] < 0.0 or grid[-1] > t_max or np.any(np.diff(grid) <= 0.0)):
            raise ValueError("sample_grid must be increasing within [0, t_max]")
    snapshot_times = tuple(float(x) for x in snapshot_times)
    if any(x < 0.0 or x > t_max for x in snapshot_times):
        raise ValueError("snapshot times must lie in [0, t_max]")

    state_words = derive_state(seed, replicate)
    if initial_masses is None:
        init_rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replicate), 1))))
        masses0 = sample_initial_population(int(n0), density, init_rng, params)
    else:
        masses0 = np.asarray(initial_masses, dtype=float).copy()
        if masses0.size and (masses0.min() <= 0.0 or masses0.max() > params.m_max):
            raise ValueError("initial masses must lie in (0, m_max]")

    if engine == "reference":
        stream = Xoshiro256pp(state_words)
        return _run_reference(params, masses0, grid, float(t_max), stream, division,
                              h_max, snapshot_times, log_events)
    if engine == "fast":
        from ._fast_engine import run_fast
        if division.kind == "custom":
            raise ValueError("custom division laws require engine='reference'")
        return run_fast(params, masses0, grid, float(t_max), state_words, division,
                        h_max, snapshot_times, log_events)
    raise ValueError(f"unknown engine {engine!r}")
