"""Parallel IBM replicates with cross-replicate statistics.

Replicate i draws its random stream from (root_seed, i), so the ensemble is
reproducible for any worker count; aggregation consumes results in replicate
order.  Pointwise quantiles use the exact sample matrix when
n_runs * grid size fits the configured budget, otherwise a P2-style
streaming estimator per (time, observable) pair.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ibm import make_sample_grid, run_ibm
from .model import DivisionLaw, InitialMassDensity
from .params import ChemostatParams

_QUANTILES = (0.025, 0.5, 0.975)


@dataclass(frozen=True)
class EnsembleSpec:
    """Everything that determines an ensemble's results (not its scheduling)."""

    params: ChemostatParams
    n_runs: int
    root_seed: int
    n0: int
    density: InitialMassDensity
    t_max: float
    sample_dt: float = 0.1
    snapshot_times: tuple = ()
    histogram_bins: int = 40
    h_max: float = 0.01
    division: DivisionLaw = DivisionLaw()
    engine: str = "fast"
    kde_bandwidth: Optional[float] = None     # None -> Silverman rule
    quantile_budget: int = 50_000_000         # sample-matrix elements

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError(f"n_runs must be >= 1, got {self.n_runs}")


@dataclass
class MassHistogram:
    """Density-normalized mass histogram; ``empty`` marks a zero population."""

    edges: np.ndarray
    density: np.ndarray
    count: int

    @property
    def empty(self) -> bool:
        return self.count == 0


@dataclass
class EnsembleStats:
    t: np.ndarray
    mean_n: np.ndarray
    q025_n: np.ndarray
    q50_n: np.ndarray
    q975_n: np.ndarray
    mean_x: np.ndarray
    q025_x: np.ndarray
    q50_x: np.ndarray
    q975_x: np.ndarray
    mean_s: np.ndarray
    q025_s: np.ndarray
    q50_s: np.ndarray
    q975_s: np.ndarray
    n_runs: int
    root_seed: int
    washout_count: int
    washout_probability: float
    washout_ci_halfwidth: float               # 3-sigma binomial half-width
    washout_times: np.ndarray                 # finite samples only
    washout_by_run: list = field(default_factory=list)  # per replicate, None if none
    kde_t: Optional[np.ndarray] = None
    kde_density: Optional[np.ndarray] = None
    kde_bandwidth: Optional[float] = None
    histograms: dict = field(default_factory=dict)   # time -> (edges, mean density, runs)
    quantile_method: str = "exact"


# --------------------------------------------------------------------------
# Histograms and kernel density estimates
# --------------------------------------------------------------------------

def mass_histogram(masses: np.ndarray, bins: int, m_max: float) -> MassHistogram:
    """Bin counts over [0, m_max] normalized to integrate to 1 (count/(N w))."""
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    masses = np.asarray(masses, dtype=float)
    edges = np.linspace(0.0, m_max, bins + 1)
    if masses.size == 0:
        return MassHistogram(edges=edges, density=np.zeros(bins), count=0)
    counts, _ = np.histogram(masses, bins=edges)
    width = edges[1] - edges[0]
    return MassHistogram(edges=edges, density=counts / (masses.size * width),
                         count=int(masses.size))


def silverman_bandwidth(samples: np.ndarray) -> float:
    """1.06 sigma n^(-1/5); falls back to a small positive width when the
    sample is degenerate."""
    samples = np.asarray(samples, dtype=float)
    sd = float(samples.std())
    if sd == 0.0:
        return max(1e-3 * max(abs(float(samples.mean())), 1.0), 1e-9)
    return 1.06 * sd * samples.size ** (-0.2)


def washout_kde(samples, bandwidth: float, pad_bandwidths: float = 6.0,
                min_points: int = 513):
    """Gaussian kernel density estimate of washout times on an adaptive grid.

    Returns (t, density); the grid extends pad_bandwidths beyond the sample
    range (the 6-bandwidth default keeps the truncated tail mass ~2e-9, so
    the trapezoid integral is 1 +- 1e-6) and is fine enough for the
    quadrature error to stay below that tolerance.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise ValueError(f"need >= 2 samples, got {samples.size}")
    if bandwidth <= 0.0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    lo = float(samples.min()) - pad_bandwidths * bandwidth
    hi = float(samples.max()) + pad_bandwidths * bandwidth
    n = max(min_points, int(math.ceil((hi - lo) / bandwidth * 8.0)) + 1)
    n = min(n, 1 << 20)
    t = np.linspace(lo, hi, n)
    z = (t[:, None] - samples[None, :]) / bandwidth
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (samples.size * bandwidth * math.sqrt(2.0 * math.pi))
    return t, dens


# --------------------------------------------------------------------------
# Streaming quantiles (P2 algorithm) for over-budget ensembles
# --------------------------------------------------------------------------

class P2Quantile:
    """Jain & Chlamtac's P2 streaming quantile estimator (5 markers)."""

    def __init__(self, p: float):
        if not 0.0 < p < 1.0:
            raise ValueError("p must be in (0, 1)")
        self.p = p
        self.q: list = []
        self.n = [1.0, 2.0, 3.0, 4.0, 5.0]
        self.np_ = [1.0, 1.0 + 2.0 * p, 1.0 + 4.0 * p, 3.0 + 2.0 * p, 5.0]
        self.dn = [0.0, p / 2.0, p, (1.0 + p) / 2.0, 1.0]
        self.count = 0

    def _parabolic(self, i: int, d: float) -> float:
        q, n = self.q, self.n
        return q[i] + d / (n[i + 1] - n[i - 1]) * (
            (n[i] - n[i - 1] + d) * (q[i + 1] - q[i]) / (n[i + 1] - n[i])
            + (n[i + 1] - n[i] - d) * (q[i] - q[i - 1]) / (n[i] - n[i - 1]))

    def _linear(self, i: int, d: int) -> float:
        q, n = self.q, self.n
        return q[i] + d * (q[i + d] - q[i]) / (n[i + d] - n[i])

    def update(self, x: float) -> None:
        self.count += 1
        if self.count <= 5:
            self.q.append(float(x))
            self.q.sort()
            return
        q, n = self.q, self.n
        if x < q[0]:
            q[0] = float(x)
            k = 0
        elif x < q[1]:
            k = 0
        elif x < q[2]:
            k = 1
        elif x < q[3]:
            k = 2
        elif x <= q[4]:
            k = 3
        else:
            q[4] = float(x)
            k = 3
        for i in range(k + 1, 5):
            n[i] += 1.0
        for i in range(5):
            self.np_[i] += self.dn[i]
        for i in (1, 2, 3):
            d = self.np_[i] - n[i]
            if (d >= 1.0 and n[i + 1] - n[i] > 1.0) or (d <= -1.0 and n[i - 1] - n[i] < -1.0):
                step = 1 if d >= 0.0 else -1
                cand = self._parabolic(i, float(step))
                if q[i - 1] < cand < q[i + 1]:
                    q[i] = cand
                else:
                    q[i] = self._linear(i, step)
                n[i] += step

    def result(self) -> float:
        if self.count == 0:
            return math.nan
        if self.count <= 5:
            return float(np.quantile(np.array(self.q), self.p))
        return self.q[2]


# --------------------------------------------------------------------------
# Ensemble runner
# --------------------------------------------------------------------------

def _run_one(spec: EnsembleSpec, index: int):
    traj, _, diag = run_ibm(
        spec.params, spec.n0, spec.density, spec.t_max, seed=spec.root_seed,
        replicate=index, sample_dt=spec.sample_dt, h_max=spec.h_max,
        division=spec.division, snapshot_times=spec.snapshot_times,
        engine=spec.engine)
    hists = {ts: mass_histogram(m, spec.histogram_bins, spec.params.m_max)
             for ts, m in traj.snapshots.items()}
    return index, traj.n, traj.biomass, traj.substrate, traj.washout_time, hists, diag


def _worker(args):
    spec, index = args
    try:
        return _run_one(spec, index)
    except Exception as exc:  # noqa: BLE001 - reported with replay coordinates
        raise RuntimeError(
            f"replicate {index} failed (root_seed={spec.root_seed}, "
            f"replicate={index}): {exc}") from exc


class _Aggregator:
    """Consumes replicate results strictly in index order."""

    def __init__(self, spec: EnsembleSpec, grid: np.ndarray, exact: bool,
                 keep_trajectories: bool):
        self.spec = spec
        self.grid = grid
        self.exact = exact
        self.keep = keep_trajectories
        T = grid.size
        self.sum_n = np.zeros(T)
        self.sum_x = np.zeros(T)
        self.sum_s = np.zeros(T)
        if exact:
            self.mat_n = np.empty((spec.n_runs, T))
            self.mat_x = np.empty((spec.n_runs, T))
            self.mat_s = np.empty((spec.n_runs, T))
        else:
            self.p2 = [[[P2Quantile(p) for p in _QUANTILES] for _ in range(3)]
                       for _ in range(T)]
        self.washout_times = []
        self.washout_by_run = []
        self.washout_count = 0
        self.hist_sum = {float(ts): None for ts in spec.snapshot_times}
        self.hist_runs = {float(ts): 0 for ts in spec.snapshot_times}
        self.trajectories = [] if keep_trajectories else None

    def add(self, res) -> None:
        index, n, x, s, washout_time, hists, _diag = res
        self.sum_n += n
        self.sum_x += x
        self.sum_s += s
        if self.exact:
            self.mat_n[index] = n
            self.mat_x[index] = x
            self.mat_s[index] = s
        else:
            for ti in range(self.grid.size):
                for si, val in enumerate((float(n[ti]), float(x[ti]), float(s[ti]))):
                    for est in self.p2[ti][si]:
                        est.update(val)
        self.washout_by_run.append(washout_time)
        if washout_time is not None:
            self.washout_count += 1
            self.washout_times.append(washout_time)
        for ts, hist in hists.items():
            ts = float(ts)
            if not hist.empty:
                if self.hist_sum[ts] is None:
                    self.hist_sum[ts] = [hist.edges, hist.density.copy()]
                else:
                    self.hist_sum[ts][1] += hist.density
                self.hist_runs[ts] += 1
        if self.keep:
            self.trajectories.append((n.copy(), x.copy(), s.copy(), washout_time))

    def finish(self) -> EnsembleStats:
        spec = self.spec
        nr = spec.n_runs
        if self.exact:
            qn = np.quantile(self.mat_n, _QUANTILES, axis=0).astype(float)
            qx = np.quantile(self.mat_x, _QUANTILES, axis=0).astype(float)
            qs = np.quantile(self.mat_s, _QUANTILES, axis=0).astype(float)
        else:
            T = self.grid.size
            qn = np.array([[self.p2[ti][0][qi].result() for ti in range(T)] for qi in range(3)])
            qx = np.array([[self.p2[ti][1][qi].result() for ti in range(T)] for qi in range(3)])
            qs = np.array([[self.p2[ti][2][qi].result() for ti in range(T)] for qi in range(3)])
        prob = self.washout_count / nr
        half = 3.0 * math.sqrt(max(prob * (1.0 - prob), 0.0) / nr)
        wt = np.sort(np.asarray(self.washout_times, dtype=float))
        kde_t = kde_d = None
        bw = spec.kde_bandwidth
        if wt.size >= 2:
            if bw is None:
                bw = silverman_bandwidth(wt)
            kde_t, kde_d = washout_kde(wt, bw)
        histograms = {}
        for ts, acc in self.hist_sum.items():
            if acc is not None and self.hist_runs[ts] > 0:
                histograms[ts] = (acc[0], acc[1] / self.hist_runs[ts], self.hist_runs[ts])
        return EnsembleStats(
            t=self.grid.copy(),
            mean_n=self.sum_n / nr, q025_n=qn[0], q50_n=qn[1], q975_n=qn[2],
            mean_x=self.sum_x / nr, q025_x=qx[0], q50_x=qx[1], q975_x=qx[2],
            mean_s=self.sum_s / nr, q025_s=qs[0], q50_s=qs[1], q975_s=qs[2],
            n_runs=nr, root_seed=spec.root_seed,
            washout_count=self.washout_count, washout_probability=prob,
            washout_ci_halfwidth=half, washout_times=wt,
            washout_by_run=list(self.washout_by_run),
            kde_t=kde_t, kde_density=kde_d, kde_bandwidth=bw,
            histograms=histograms,
            quantile_method="exact" if self.exact else "p2")


def run_ensemble(spec: EnsembleSpec, workers: Optional[int] = None,
                 keep_trajectories: bool = False):
    """Execute the replicates and aggregate; deterministic given the spec.

    Returns (EnsembleStats, trajectories) where trajectories is None unless
    requested (list of (n, biomass, substrate, washout_time) per replicate).
    """
    grid = make_sample_grid(spec.t_max, spec.sample_dt)
    exact = 3 * spec.n_runs * grid.size <= spec.quantile_budget
    agg = _Aggregator(spec, grid, exact, keep_trajectories)

    if workers is None:
        workers = min(os.cpu_count() or 1, spec.n_runs)
    workers = max(1, int(workers))

    if workers > 1 and spec.engine == "fast":
        # compile/load the engine in the parent so forked workers inherit it
        run_ibm(spec.params, 1, spec.density, spec.sample_dt, seed=0,
                sample_dt=spec.sample_dt, division=spec.division, engine="fast")

    if workers == 1:
        for i in range(spec.n_runs):
            agg.add(_worker((spec, i)))
    else:
        # results are consumed strictly in index order for determinism;
        # a small reorder buffer absorbs out-of-order completions
        pending = {}
        next_index = 0
        with ProcessPoolExecutor(max_workers=workers) as pool:
            inflight = {}
            submit_next = 0
            max_inflight = 4 * workers
            while next_index < spec.n_runs:
                while submit_next < spec.n_runs and len(inflight) < max_inflight:
                    fut = pool.submit(_worker, (spec, submit_next))
                    inflight[fut] = submit_next
                    submit_next += 1
                done, _ = wait(list(inflight), return_when=FIRST_COMPLETED)
                for fut in done:
                    idx = inflight.pop(fut)
                    pending[idx] = fut.result()
                while next_index in pending:
                    agg.add(pending.pop(next_index))
                    next_index += 1

    stats = agg.finish()
    return stats, agg.trajectories
