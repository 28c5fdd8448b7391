"""Command-line front end: config ingestion, dispatch, file emission.

Subcommands: ibm | ide | ode | fit | ensemble | compare, each driven by a
JSON config with a fixed fail-closed schema (unknown keys rejected, all
problems reported at once) plus repeated ``--set key=value`` overrides.
Exit codes: 0 success, 2 config error, 3 numeric error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .ensemble import EnsembleSpec, run_ensemble, washout_kde
from .ibm import make_sample_grid, run_ibm
from .ide import NumericError, ide_solve
from .io_utils import config_hash, meta_header, read_commented_json, write_csv, write_json
from .model import DivisionLaw, InitialMassDensity
from .odefit import classic_solve, fit_monod
from .params import ChemostatParams
from .svgplot import write_line_chart

SUBCOMMANDS = ("ibm", "ide", "ode", "fit", "ensemble", "compare")


class ConfigError(ValueError):
    """One or more configuration problems; ``problems`` lists all of them."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("configuration invalid:\n  - " + "\n  - ".join(self.problems))


class TableDensity:
    """Picklable density callable interpolating a (mass, value) table."""

    def __init__(self, xs, values):
        self.xs = np.asarray(xs, dtype=float)
        self.values = np.asarray(values, dtype=float)

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.values,
                         left=0.0, right=0.0)


_PARAM_KEYS = ("s_in", "k", "m_max", "m_div", "lambda_bar", "p_lambda",
               "p_beta", "r_max", "k_r", "s0")

_FIT_DEFAULTS = {
    "mu_range": [0.05, 2.0],
    "ks_range": [0.1, 100.0],
    "grid": 32,
    "refine_iters": 200,
    "horizon": None,
    "weights": None,
}

_ODE_DEFAULTS = {"mu_max": None, "k_s": None}

_TOP_DEFAULTS = {
    "model": None,
    "params": {},
    "D": None,
    "V": None,
    "n0": None,
    "initial_biomass": None,
    "density": "transient",
    "custom_density": None,
    "t_max": 80.0,
    "dt_ide": 5e-4,
    "I": 5000,
    "h_max_ibm": 0.01,
    "sample_dt": 0.1,
    "seed": 0,
    "n_runs": 1,
    "out_dir": "out",
    "snapshot_times": [],
    "histogram_bins": 40,
    "workers": None,
    "save_runs": False,
    "event_log": False,
    "birth_mode": "auto",
    "force_cfl": False,
    "with_fit": True,
    "fit": dict(_FIT_DEFAULTS),
    "ode": dict(_ODE_DEFAULTS),
}


@dataclass
class RunConfig:
    """Validated configuration; ``raw`` is the effective (defaults-filled)
    document that round-trips through emission and reloading."""

    raw: dict
    params: ChemostatParams
    density: InitialMassDensity
    n0: Optional[int]
    initial_biomass: Optional[float]
    t_max: float
    dt_ide: float
    cells: int
    h_max: float
    sample_dt: float
    seed: int
    n_runs: int
    out_dir: str
    snapshot_times: tuple
    histogram_bins: int
    workers: Optional[int]
    save_runs: bool
    event_log: bool
    birth_mode: str
    force_cfl: bool
    with_fit: bool
    fit: dict = field(default_factory=dict)
    ode: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def meta(self) -> list[str]:
        return meta_header(self.hash, self.seed)

    def y0_target(self) -> float:
        if self.initial_biomass is not None:
            return float(self.initial_biomass)
        return self.n0 * self.density.mean() / self.params.V


def _type_name(v) -> str:
    return type(v).__name__


_UNITS = {
    "D": "1/h", "V": "l", "n0": "individuals", "initial_biomass": "mg/l",
    "t_max": "h", "dt_ide": "h", "I": "grid cells", "h_max_ibm": "h",
    "sample_dt": "h", "seed": "integer", "n_runs": "runs",
    "histogram_bins": "bins", "workers": "processes", "horizon": "h",
    "grid": "cells per axis", "refine_iters": "iterations",
    "mu_max": "1/h", "k_s": "mg/l",
}


def _check_number(problems, doc, key, *, required=False, integer=False,
                  positive=False, nonneg=False):
    unit = _UNITS.get(key)
    suffix = f" ({unit})" if unit else ""
    v = doc.get(key)
    if v is None:
        if required:
            problems.append(f"{key}: required key is missing{suffix}")
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{key}: expected a number{suffix}, got {_type_name(v)}")
        return None
    if integer and not float(v).is_integer():
        problems.append(f"{key}: expected an integer{suffix}, got {v}")
        return None
    if positive and v <= 0:
        problems.append(f"{key}: must be > 0{suffix}, got {v}")
        return None
    if nonneg and v < 0:
        problems.append(f"{key}: must be >= 0{suffix}, got {v}")
        return None
    return int(v) if integer else float(v)


def apply_overrides(doc: dict, sets: list[str]) -> dict:
    """Apply ``--set dotted.key=value`` pairs on top of the parsed document."""
    doc = copy.deepcopy(doc)
    problems = []
    for item in sets:
        if "=" not in item:
            problems.append(f"--set {item!r}: expected key=value")
            continue
        key, _, val = item.partition("=")
        try:
            parsed = json.loads(val)
        except json.JSONDecodeError:
            parsed = val
        node = doc
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                problems.append(f"--set {key}: {p} is not an object")
                break
        else:
            node[parts[-1]] = parsed
    if problems:
        raise ConfigError(problems)
    return doc


def parse_config(doc: dict) -> RunConfig:
    """Validate a config document; every problem is reported, none silently."""
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError([f"top level: expected an object, got {_type_name(doc)}"])

    for key in doc:
        if key not in _TOP_DEFAULTS:
            problems.append(f"{key}: unknown key")
    eff = copy.deepcopy(_TOP_DEFAULTS)
    for key, val in doc.items():
        if key in _TOP_DEFAULTS:
            if key in ("params", "fit", "ode") and isinstance(val, dict):
                eff[key].update(val)
            else:
                eff[key] = copy.deepcopy(val)

    model = eff["model"]
    if model is not None and model not in SUBCOMMANDS:
        problems.append(f"model: must be one of {SUBCOMMANDS}, got {model!r}")

    pblock = eff["params"]
    if not isinstance(pblock, dict):
        problems.append(f"params: expected an object, got {_type_name(pblock)}")
        pblock = {}
    for key in pblock:
        if key not in _PARAM_KEYS:
            problems.append(f"params.{key}: unknown key"
                            + (" (D and V are top-level keys)" if key in ("D", "V") else ""))
    D = _check_number(problems, eff, "D", required=True, positive=True)
    V = _check_number(problems, eff, "V", required=True, positive=True)

    params = None
    if D is not None and V is not None:
        kwargs = {k: v for k, v in pblock.items() if k in _PARAM_KEYS}
        bad_types = [k for k, v in kwargs.items()
                     if isinstance(v, bool) or not isinstance(v, (int, float))]
        for k in bad_types:
            problems.append(f"params.{k}: expected a number, got {_type_name(kwargs[k])}")
            kwargs.pop(k)
        try:
            params = ChemostatParams(D=D, V=V, **{k: float(v) for k, v in kwargs.items()})
        except ValueError as exc:
            problems.append(f"params: {exc}")

    n0 = _check_number(problems, eff, "n0", integer=True, nonneg=True)
    y0 = _check_number(problems, eff, "initial_biomass", positive=True)
    if n0 is None and y0 is None:
        problems.append("n0: required key is missing (or provide initial_biomass)")

    density_sel = eff["density"]
    density = None
    if density_sel not in ("transient", "smooth", "custom"):
        problems.append(f"density: must be transient|smooth|custom, got {density_sel!r}")
    elif density_sel == "transient":
        density = InitialMassDensity.transient()
    elif density_sel == "smooth":
        density = InitialMassDensity.smooth()
    else:
        tab = eff["custom_density"]
        if not isinstance(tab, dict) or sorted(tab) != ["density", "x"]:
            problems.append("custom_density: expected an object with keys x, density")
        else:
            xs = tab["x"]
            vals = tab["density"]
            if (not isinstance(xs, list) or not isinstance(vals, list)
                    or len(xs) != len(vals) or len(xs) < 2):
                problems.append("custom_density: x and density must be equal-length lists (>= 2)")
            elif any(b <= a for a, b in zip(xs, xs[1:])):
                problems.append("custom_density: x must be strictly increasing")
            elif min(vals) < 0 or max(vals) <= 0:
                problems.append("custom_density: density must be nonnegative and not identically zero")
            else:
                fn = TableDensity(xs, vals)
                try:
                    density = InitialMassDensity.custom(fn, (xs[0], xs[-1]))
                except ValueError as exc:
                    problems.append(f"custom_density: {exc}")
    if eff["custom_density"] is not None and density_sel != "custom":
        problems.append("custom_density: only allowed with density = custom")

    t_max = _check_number(problems, eff, "t_max", positive=True, required=True)
    dt_ide = _check_number(problems, eff, "dt_ide", positive=True, required=True)
    cells = _check_number(problems, eff, "I", integer=True, positive=True, required=True)
    h_max = _check_number(problems, eff, "h_max_ibm", positive=True, required=True)
    sample_dt = _check_number(problems, eff, "sample_dt", positive=True, required=True)
    seed = _check_number(problems, eff, "seed", integer=True, nonneg=True, required=True)
    n_runs = _check_number(problems, eff, "n_runs", integer=True, positive=True, required=True)
    bins = _check_number(problems, eff, "histogram_bins", integer=True, positive=True, required=True)
    workers = _check_number(problems, eff, "workers", integer=True, positive=True)

    if not isinstance(eff["out_dir"], str):
        problems.append(f"out_dir: expected a string, got {_type_name(eff['out_dir'])}")
    snap = eff["snapshot_times"]
    if not isinstance(snap, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in snap):
        problems.append("snapshot_times: expected a list of numbers")
        snap = []
    if t_max is not None and any(x < 0 or x > t_max for x in snap):
        problems.append(f"snapshot_times: values must lie in [0, t_max={t_max}]")
    for key in ("save_runs", "event_log", "force_cfl", "with_fit"):
        if not isinstance(eff[key], bool):
            problems.append(f"{key}: expected true/false, got {_type_name(eff[key])}")
    if eff["birth_mode"] not in ("auto", "fast", "dense"):
        problems.append(f"birth_mode: must be auto|fast|dense, got {eff['birth_mode']!r}")

    fit = eff["fit"]
    for key in fit:
        if key not in _FIT_DEFAULTS:
            problems.append(f"fit.{key}: unknown key")
    for rkey in ("mu_range", "ks_range"):
        rng = fit.get(rkey, _FIT_DEFAULTS[rkey])
        if (not isinstance(rng, list) or len(rng) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in rng)
                or not 0 < rng[0] < rng[1]):
            problems.append(f"fit.{rkey}: expected [lo, hi] with 0 < lo < hi")
    _check_number(problems, fit, "grid", integer=True, positive=True)
    _check_number(problems, fit, "refine_iters", integer=True, nonneg=True)
    _check_number(problems, fit, "horizon", positive=True)
    if fit.get("weights") is not None:
        w = fit["weights"]
        if (not isinstance(w, list) or len(w) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0 for v in w)):
            problems.append("fit.weights: expected [w_s, w_y] with nonnegative numbers")

    ode = eff["ode"]
    for key in ode:
        if key not in _ODE_DEFAULTS:
            problems.append(f"ode.{key}: unknown key")
    _check_number(problems, ode, "mu_max", positive=True)
    _check_number(problems, ode, "k_s", positive=True)

    if problems:
        raise ConfigError(problems)

    return RunConfig(
        raw=eff, params=params, density=density,
        n0=None if n0 is None else int(n0),
        initial_biomass=y0, t_max=t_max, dt_ide=dt_ide, cells=int(cells),
        h_max=h_max, sample_dt=sample_dt, seed=int(seed), n_runs=int(n_runs),
        out_dir=eff["out_dir"], snapshot_times=tuple(float(x) for x in snap),
        histogram_bins=int(bins),
        workers=None if workers is None else int(workers),
        save_runs=eff["save_runs"], event_log=eff["event_log"],
        birth_mode=eff["birth_mode"], force_cfl=eff["force_cfl"],
        with_fit=eff["with_fit"], fit=dict(fit), ode=dict(ode))


def load_config(path, sets: Optional[list[str]] = None) -> RunConfig:
    """Parse a JSON config file, apply --set overrides, validate."""
    try:
        doc = read_commented_json(path)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON: {exc}"]) from exc
    if sets:
        doc = apply_overrides(doc, sets)
    return parse_config(doc)


# --------------------------------------------------------------------------
# Dispatch
# --------------------------------------------------------------------------

def _require(cfg: RunConfig, subcommand: str) -> None:
    problems = []
    if cfg.raw["model"] not in (None, subcommand):
        problems.append(f"model: config says {cfg.raw['model']!r} but subcommand is {subcommand!r}")
    if subcommand in ("ibm", "ensemble", "compare") and cfg.n0 is None:
        problems.append(f"n0: required for the {subcommand} subcommand")
    if subcommand == "ode" and (cfg.ode.get("mu_max") is None or cfg.ode.get("k_s") is None):
        problems.append("ode.mu_max and ode.k_s: required for the ode subcommand")
    if subcommand in ("ide", "fit", "compare"):
        steps = cfg.sample_dt / cfg.dt_ide
        if abs(steps - round(steps)) > 1e-9:
            problems.append(f"sample_dt: must be an integer multiple of dt_ide "
                            f"(got {cfg.sample_dt} / {cfg.dt_ide})")
    if problems:
        raise ConfigError(problems)


def _emit_effective_config(cfg: RunConfig, out: Path) -> None:
    write_json(out / "effective_config.json", cfg.raw, cfg.meta())


def _write_trajectory(path, meta, t, cols) -> None:
    write_csv(path, [("t", t)] + cols, meta)


def _ide_reference(cfg: RunConfig):
    return ide_solve(
        cfg.params, cfg.density, cfg.t_max, cells=cfg.cells, dt=cfg.dt_ide,
        y0=cfg.y0_target(), sample_dt=cfg.sample_dt,
        snapshot_times=cfg.snapshot_times, birth_mode=cfg.birth_mode,
        force_cfl=cfg.force_cfl)


def _do_fit(cfg: RunConfig, ref):
    f = cfg.fit
    weights = None if f.get("weights") is None else tuple(f["weights"])
    return fit_monod(ref, cfg.params, weights=weights, horizon=f.get("horizon"),
                     grid_n=int(f.get("grid", 32)),
                     mu_range=tuple(f.get("mu_range", (0.05, 2.0))),
                     ks_range=tuple(f.get("ks_range", (0.1, 100.0))),
                     refine_iters=int(f.get("refine_iters", 200)))


def _fit_json(fitres) -> dict:
    return {
        "mu_max": fitres.mu_max,
        "k_s": fitres.k_s,
        "residual": fitres.residual,
        "grid": {
            "mu_max": [float(v) for v in fitres.grid_mu],
            "k_s": [float(v) for v in fitres.grid_ks],
            "best": [fitres.grid_best[0], fitres.grid_best[1]],
        },
        "trace": [[mu, ks, r] for mu, ks, r in fitres.trace],
    }


def dispatch(cfg: RunConfig, subcommand: str, out_dir=None, plot: bool = False,
             workers: Optional[int] = None) -> list[Path]:
    """Run one subcommand; returns the list of files written."""
    _require(cfg, subcommand)
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = cfg.meta()
    workers = workers if workers is not None else cfg.workers
    files: list[Path] = []

    def emit(name, columns):
        path = out / name
        write_csv(path, columns, meta)
        files.append(path)

    _emit_effective_config(cfg, out)
    files.append(out / "effective_config.json")

    if subcommand == "ibm":
        traj, log, diag = run_ibm(
            cfg.params, cfg.n0, cfg.density, cfg.t_max, seed=cfg.seed,
            sample_dt=cfg.sample_dt, h_max=cfg.h_max,
            snapshot_times=cfg.snapshot_times, log_events=cfg.event_log)
        emit("trajectory.csv", [("t", traj.t), ("N", traj.n),
                                ("biomass", traj.biomass), ("substrate", traj.substrate)])
        if cfg.event_log and log is not None:
            kind_names = np.array(["DIVISION", "UPTAKE", "REJECTED"])
            emit("events.csv", [("t", log.t), ("kind", kind_names[log.kind]),
                                ("index", log.index), ("alpha", log.alpha),
                                ("N_after", log.n_after), ("S_after", log.s_after)])
        if plot:
            for name, ys, ylab in (("biomass", traj.biomass, "biomass (mg/l)"),
                                   ("substrate", traj.substrate, "substrate (mg/l)")):
                p = out / f"trajectory_{name}.svg"
                write_line_chart(p, [(name, traj.t, ys)], xlabel="t (h)", ylabel=ylab)
                files.append(p)

    elif subcommand == "ide":
        res = _ide_reference(cfg)
        emit("trajectory.csv", [("t", res.t), ("count", res.count),
                                ("biomass", res.biomass), ("substrate", res.substrate)])
        if res.snapshots:
            ts_col, x_col, p_col, pn_col = [], [], [], []
            for ts, x, p, pn in res.snapshots:
                ts_col.extend([ts] * x.size)
                x_col.extend(x)
                p_col.extend(p)
                pn_col.extend(pn)
            emit("density_snapshots.csv", [("t", ts_col), ("x_i", x_col),
                                           ("p", p_col), ("p_normalized", pn_col)])
        if plot:
            p = out / "trajectory_biomass.svg"
            write_line_chart(p, [("biomass", res.t, res.biomass)],
                             xlabel="t (h)", ylabel="biomass (mg/l)")
            files.append(p)

    elif subcommand == "ode":
        y0 = cfg.y0_target()
        t, Y, S = classic_solve(y0, cfg.params.s0, cfg.params,
                                cfg.ode["mu_max"], cfg.ode["k_s"],
                                t_max=cfg.t_max, sample_dt=cfg.sample_dt)
        emit("trajectory.csv", [("t", t), ("biomass", Y), ("substrate", S)])
        if plot:
            p = out / "trajectory_biomass.svg"
            write_line_chart(p, [("biomass", t, Y)], xlabel="t (h)", ylabel="biomass (mg/l)")
            files.append(p)

    elif subcommand == "fit":
        ref = _ide_reference(cfg)
        fitres = _do_fit(cfg, ref)
        write_json(out / "fit.json", _fit_json(fitres), meta)
        files.append(out / "fit.json")
        emit("reference_trajectory.csv", [("t", ref.t), ("count", ref.count),
                                          ("biomass", ref.biomass),
                                          ("substrate", ref.substrate)])

    elif subcommand in ("ensemble", "compare"):
        spec = EnsembleSpec(
            params=cfg.params, n_runs=cfg.n_runs, root_seed=cfg.seed,
            n0=cfg.n0, density=cfg.density, t_max=cfg.t_max,
            sample_dt=cfg.sample_dt, snapshot_times=cfg.snapshot_times,
            histogram_bins=cfg.histogram_bins, h_max=cfg.h_max)
        stats, trajectories = run_ensemble(spec, workers=workers,
                                           keep_trajectories=cfg.save_runs)
        emit("stats.csv", [
            ("t", stats.t),
            ("mean_N", stats.mean_n), ("q025_N", stats.q025_n),
            ("q50_N", stats.q50_n), ("q975_N", stats.q975_n),
            ("mean_X", stats.mean_x), ("q025_X", stats.q025_x),
            ("q50_X", stats.q50_x), ("q975_X", stats.q975_x),
            ("mean_S", stats.mean_s), ("q025_S", stats.q025_s),
            ("q50_S", stats.q50_s), ("q975_S", stats.q975_s)])
        if cfg.save_runs and trajectories is not None:
            runs_dir = out / "runs"
            runs_dir.mkdir(exist_ok=True)
            for i, (n, x, s, _w) in enumerate(trajectories):
                path = runs_dir / f"run_{i:04d}.csv"
                write_csv(path, [("t", stats.t), ("N", n), ("biomass", x),
                                 ("substrate", s)], meta)
                files.append(path)
        emit("washout.csv", [("run", list(range(spec.n_runs))),
                             ("washout_time", stats.washout_by_run)])
        if stats.kde_t is not None:
            emit("kde.csv", [("t", stats.kde_t), ("density", stats.kde_density)])
        for ts in sorted(stats.histograms):
            edges, dens, nruns = stats.histograms[ts]
            emit(f"hist_t{ts:g}.csv", [
                ("bin_left", edges[:-1]), ("bin_right", edges[1:]),
                ("mean_density", dens)])
        if plot:
            p = out / "stats_biomass.svg"
            write_line_chart(p, [("mean", stats.t, stats.mean_x),
                                 ("q2.5%", stats.t, stats.q025_x),
                                 ("q97.5%", stats.t, stats.q975_x)],
                             xlabel="t (h)", ylabel="biomass (mg/l)")
            files.append(p)

        if subcommand == "compare":
            ref = _ide_reference(cfg)
            if not np.allclose(ref.t, stats.t, rtol=0, atol=1e-9):
                raise NumericError("IDE and ensemble sample grids diverge")
            cols = [
                ("t", stats.t),
                ("ibm_mean_N", stats.mean_n), ("ibm_mean_X", stats.mean_x),
                ("ibm_mean_S", stats.mean_s),
                ("ide_count", ref.count), ("ide_X", ref.biomass),
                ("ide_S", ref.substrate)]
            if cfg.with_fit:
                fitres = _do_fit(cfg, ref)
                write_json(out / "fit.json", _fit_json(fitres), meta)
                files.append(out / "fit.json")
                _, Y, S = classic_solve(ref.biomass[0], ref.substrate[0],
                                        cfg.params, fitres.mu_max, fitres.k_s,
                                        sample_grid=stats.t)
                cols += [("ode_X", Y), ("ode_S", S)]
            emit("joined.csv", cols)
            if plot:
                series = [("IBM mean", stats.t, stats.mean_x),
                          ("IDE", stats.t, ref.biomass)]
                if cfg.with_fit:
                    series.append(("ODE", stats.t, Y))
                p = out / "compare_biomass.svg"
                write_line_chart(p, series, xlabel="t (h)", ylabel="biomass (mg/l)")
                files.append(p)
    else:
        raise ConfigError([f"unknown subcommand {subcommand!r}"])
    return files


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chemostat-kit",
        description="Mass-structured stochastic chemostat simulation toolkit")
    parser.add_argument("--version", action="version", version=f"chemostat-kit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} model/workflow")
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable, dotted paths)")
        sp.add_argument("--out", default=None, help="output directory (overrides config)")
        sp.add_argument("--plot", action="store_true", help="also write SVG charts")
        sp.add_argument("--workers", type=int, default=None,
                        help="parallel replicate workers (ensemble/compare)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.set)
        files = dispatch(cfg, args.subcommand, out_dir=args.out, plot=args.plot,
                         workers=args.workers)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
