"""CSV/JSON result files. Writes are atomic (temp file, then rename)."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ShapeError


def fmt(x: float) -> str:
    """17 significant digits: parses back to the identical double."""
    return format(float(x), ".17g")


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: list[str], columns: list) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*cols):
        w.writerow([fmt(x) for x in row])
    atomic_write(path, buf.getvalue())


def write_json(path: Path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def read_field_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(t_fs, f)`` from a two-column file written by :func:`write_csv`."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t_fs", "f"]:
        raise ShapeError(f"{path}: expected header 't_fs,f'")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float).reshape(-1, 2)
    return data[:, 0], data[:, 1]


def refine_field(samples, factor: int = 2) -> np.ndarray:
    """Resample midpoint samples onto a grid with ``factor`` times more steps.

    Linear interpolation between old midpoints, held constant beyond the
    first and last midpoint.
    """
    f = np.asarray(samples, dtype=float)
    J = f.size
    old = (np.arange(J) + 0.5) / J
    new = (np.arange(J * factor) + 0.5) / (J * factor)
    return np.interp(new, old, f)
