"""Plain-text artifacts: grid fields, CSV logs and JSON reports.

Grid files start with a header line ``# nx ny h ox oy`` followed by ``nx``
lines of ``ny`` whitespace-separated values each (row ``i`` holds cells
``(i, 0) .. (i, ny - 1)``).  Values are written with ``repr`` so a round
trip reproduces them bit for bit.  Every write goes to a temporary file in
the target directory which is then renamed over the destination.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence, Tuple

import numpy as np

from .grid import GridDomain, ScalarField

__all__ = [
    "atomic_write",
    "format_grid",
    "parse_grid",
    "write_grid",
    "read_grid",
    "read_field",
    "IterationLog",
    "dump_json",
    "write_rows",
]


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_grid(values: np.ndarray, h: float, origin: Tuple[float, float]) -> str:
    values = np.asarray(values, dtype=float)
    if not np.isfinite(values).all():
        raise ValueError("grid files may not contain nan or inf")
    nx, ny = values.shape
    lines = [f"# {nx} {ny} {h!r} {float(origin[0])!r} {float(origin[1])!r}"]
    for row in values:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_grid(text: str) -> Tuple[np.ndarray, float, Tuple[float, float]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("grid file must start with a '# nx ny h ox oy' header")
    head = lines[0][1:].split()
    if len(head) != 5:
        raise ValueError(f"malformed grid header {lines[0]!r}")
    nx, ny = int(head[0]), int(head[1])
    h, ox, oy = (float(x) for x in head[2:])
    rows = lines[1:]
    if len(rows) != nx:
        raise ValueError(f"grid header announces {nx} rows, found {len(rows)}")
    values = np.empty((nx, ny))
    for i, ln in enumerate(rows):
        parts = ln.split()
        if len(parts) != ny:
            raise ValueError(f"grid row {i} has {len(parts)} values, expected {ny}")
        values[i] = [float(p) for p in parts]
    if not np.isfinite(values).all():
        raise ValueError("grid file contains nan or inf")
    return values, h, (ox, oy)


def write_grid(path, values: np.ndarray, h: float, origin) -> Path:
    return atomic_write(path, format_grid(values, h, origin))


def read_grid(path):
    return parse_grid(Path(path).read_text())


def read_field(path, domain: GridDomain) -> ScalarField:
    values, h, origin = read_grid(path)
    if (
        values.shape != domain.shape
        or not math.isclose(h, domain.h)
        or not np.allclose(origin, domain.origin)
    ):
        raise ValueError(f"{path}: field grid does not match the domain")
    return ScalarField(domain, values)


class IterationLog:
    """Per-iteration CSV rows ``stage, iter, energy, grad_norm, mass, multiplier``."""

    header = ("stage", "iter", "energy", "grad_norm", "mass", "multiplier")

    def __init__(self):
        self._buf = io.StringIO()
        self._w = csv.writer(self._buf, lineterminator="\n")
        self._w.writerow(self.header)

    def __call__(self, stage, it, energy, grad_norm, mass, multiplier):
        self._w.writerow([stage, it, repr(float(energy)), repr(float(grad_norm)),
                          repr(float(mass)), repr(float(multiplier))])

    def text(self) -> str:
        return self._buf.getvalue()


def dump_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return atomic_write(path, buf.getvalue())
