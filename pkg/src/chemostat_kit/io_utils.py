"""Deterministic file emission: CSV/JSON with reproducibility headers.

Every output file starts with comment lines recording the tool version, the
effective-config hash and the root seed, so byte-identical reruns are
checkable.  Floats are written with shortest round-trip formatting, '.'
decimal separator and LF line endings.
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def fmt_value(v) -> str:
    if v is None:
        return "NONE"
    if isinstance(v, str):
        return v
    if isinstance(v, np.str_):
        return str(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(v)
    f = float(v)
    if math.isnan(f):
        return "NONE"
    if f == int(f) and abs(f) < 1e16:
        iv = int(f)
        return repr(float(iv)) if isinstance(v, float) else str(iv)
    return repr(f)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def meta_header(cfg_hash: str, root_seed) -> list[str]:
    return [
        f"# chemostat-kit {__version__}",
        f"# config_hash: {cfg_hash}",
        f"# root_seed: {root_seed}",
    ]


def write_csv(path, columns, meta: list[str]) -> None:
    """columns: list of (name, sequence); all sequences equally long."""
    path = Path(path)
    names = [c[0] for c in columns]
    seqs = [c[1] for c in columns]
    n = len(seqs[0]) if seqs else 0
    for name, s in columns:
        if len(s) != n:
            raise ValueError(f"column {name} has length {len(s)} != {n}")
    lines = list(meta)
    lines.append(",".join(names))
    for i in range(n):
        lines.append(",".join(fmt_value(s[i]) for s in seqs))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_json(path, obj: dict, meta: list[str]) -> None:
    """JSON document preceded by '#' comment lines (see read_commented_json)."""
    path = Path(path)
    body = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
    path.write_text("\n".join(meta) + "\n" + body + "\n", encoding="utf-8", newline="\n")


def read_commented_json(path) -> dict:
    """Load JSON, ignoring leading '#' comment lines (our own emissions)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    start = 0
    while start < len(lines) and (not lines[start].strip() or lines[start].lstrip().startswith("#")):
        start += 1
    return json.loads("\n".join(lines[start:]) or "{}")
