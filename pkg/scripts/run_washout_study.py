#!/usr/bin/env python3
"""Washout experiments: survival probability at moderate dilution and the
washout-time distribution at high dilution (where every run dies out)."""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from chemostat_kit.cli import dispatch, load_config  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/washout", help="output root")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--plot", action="store_true")
    ap.add_argument("--runs", type=int, default=None,
                    help="override n_runs in both configs")
    args = ap.parse_args()

    cfg_dir = Path(__file__).resolve().parent.parent / "configs"
    sets = [f"n_runs={args.runs}"] if args.runs else []
    for name in ("washout_moderate_dilution.json", "washout_high_dilution.json"):
        cfg = load_config(cfg_dir / name, sets)
        label = name.removesuffix(".json")
        out = Path(args.out) / label
        dispatch(cfg, "ensemble", out_dir=out, plot=args.plot, workers=args.workers)
        lines = (out / "washout.csv").read_text().splitlines()[4:]
        times = [ln.split(",")[1] for ln in lines]
        n_washed = sum(1 for t in times if t != "NONE")
        print(f"{label}: {n_washed}/{len(times)} runs washed out "
              f"(fraction {n_washed / len(times):.3f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
