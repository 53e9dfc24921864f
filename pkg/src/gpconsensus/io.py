"""CSV and JSON serialization with bit-stable float formatting."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import Trajectory


class CSVFormatError(ValueError):
    pass


def fmt(v: float) -> str:
    """17 significant digits: exact float64 round-trip."""
    return format(float(v), ".17g")


def write_csv(path, header: Sequence[str], columns: Sequence) -> Path:
    path = Path(path)
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("CSV columns have different lengths")
    if len(header) != len(cols):
        raise ValueError("header and column count differ")
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(fmt(v) for v in row))
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a CSV written by ``write_csv``; raises CSVFormatError on anything off."""
    raw = Path(path).read_bytes()
    if b"\r" in raw:
        raise CSVFormatError(f"{path}: CR characters found; expected LF line endings")
    text = raw.decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CSVFormatError(f"{path}: empty file")
    header = lines[0].split(",")
    rows = []
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise CSVFormatError(f"{path}:{lineno}: {len(parts)} fields, header has {len(header)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise CSVFormatError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def validate_csv(path, expected=None, allow_nan: bool = False) -> tuple[list[str], np.ndarray]:
    """Re-read a CSV, check finiteness, time ordering and (optionally) exact values.

    ``allow_nan`` admits nan cells (skipped samples); infinities never pass.
    """
    header, data = read_csv(path)
    bad = np.isinf(data) if allow_nan else ~np.isfinite(data)
    if np.any(bad):
        raise CSVFormatError(f"{path}: non-finite values")
    if header and header[0] in ("t", "alpha") and len(data) > 1 and np.any(np.diff(data[:, 0]) <= 0):
        raise CSVFormatError(f"{path}: first column is not strictly increasing")
    if expected is not None:
        exp = np.column_stack([np.asarray(c, dtype=float).ravel() for c in expected])
        if exp.shape != data.shape or not np.array_equal(exp, data, equal_nan=allow_nan):
            raise CSVFormatError(f"{path}: values do not round-trip exactly")
    return header, data


def trajectory_columns(traj: Trajectory, all_pairs: bool = False):
    m = traj.topology.node_count
    pairs = traj.topology.all_pairs()
    mask = np.ones(len(pairs), bool) if all_pairs else traj.topology.edge_mask()
    header = ["t"] + [f"x_{k}" for k in range(1, m + 1)]
    header += [f"w_{k}_{j}" for (k, j), keep in zip(pairs, mask) if keep]
    header += ["cost_acc", "disagreement_acc"]
    cols = [traj.times] + [traj.x[:, k] for k in range(m)]
    cols += [traj.w[:, p] for p in np.flatnonzero(mask)]
    cols += [traj.cost_acc, traj.disagreement_acc]
    return header, cols


def write_trajectory_csv(traj: Trajectory, path, all_pairs: bool = False) -> Path:
    header, cols = trajectory_columns(traj, all_pairs)
    return write_csv(path, header, cols)


def read_trajectory_csv(path) -> dict:
    """Split a trajectory CSV back into named arrays."""
    header, data = read_csv(path)
    col = {h: data[:, i] for i, h in enumerate(header)}
    xs = [h for h in header if h.startswith("x_")]
    ws = [h for h in header if h.startswith("w_")]
    return {
        "t": col["t"],
        "x": np.column_stack([col[h] for h in xs]) if xs else np.empty((len(data), 0)),
        "w": np.column_stack([col[h] for h in ws]) if ws else np.empty((len(data), 0)),
        "w_pairs": [tuple(int(v) for v in h.split("_")[1:]) for h in ws],
        "cost_acc": col["cost_acc"],
        "disagreement_acc": col["disagreement_acc"],
    }


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return None if not math.isfinite(float(o)) else float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite_or_none(o):
    # float subclasses (np.float64) bypass ``default``; map nan/inf to null here
    if isinstance(o, float):
        return float(o) if math.isfinite(o) else None
    if isinstance(o, dict):
        return {k: _finite_or_none(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite_or_none(v) for v in o]
    return o


def dumps(obj) -> str:
    return json.dumps(_finite_or_none(obj), indent=2, default=_json_default, allow_nan=False, ensure_ascii=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(dumps(obj))
    return path
