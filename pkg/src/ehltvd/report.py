"""Run records and plain-text writers (CSV tables, grid-function dumps)."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .grid import Field, GridLevel


@dataclass
class SolveReport:
    """Outcome of a multigrid run.

    ``norms[k]`` holds the successive-grid ``(L1, L2, Linf)`` error between
    level ``k-1`` and level ``k`` (``None`` on the coarsest level); ``orders``
    the observed orders between consecutive entries of ``norms``.
    """

    residual_history: list = field(default_factory=list)
    level_sizes: list = field(default_factory=list)
    level_histories: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    exact_norms: list = field(default_factory=list)
    orders: list = field(default_factory=list)
    hm_hc: list = field(default_factory=list)
    h00_trace: list = field(default_factory=list)
    wall_times: dict = field(default_factory=dict)
    converged: bool = False
    diverged: bool = False
    message: str = ""
    extra: dict = field(default_factory=dict)

    def record_time(self, key, seconds):
        self.wall_times[key] = self.wall_times.get(key, 0.0) + seconds


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def fmt(v) -> str:
    """Scientific notation with 6 significant digits; blank for missing."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.5e}"


def write_csv(path, header, rows, meta: dict | None = None):
    """CSV with ``# key: value`` comment lines (no timestamps, deterministic)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# artifact-version: {__version__}"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {v}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _cell(c):
    if not c:
        return None
    try:
        return float(c)
    except ValueError:
        return c


def read_csv(path):
    """Returns ``(meta, header, rows)``; numeric cells become floats, blanks
    ``None`` and anything else stays a string."""
    meta, header, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            meta[k.strip()] = v.strip()
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append([_cell(c) for c in line.split(",")])
    return meta, header, rows


def emit_field(fld: Field, path):
    """Dump a grid function: header line, then ``x y value`` rows, j outer."""
    lv = fld.level
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x, y = lv.x, lv.y
    out = [f"# nx {lv.nx} ny {lv.ny} bounds {lv.x0!r} {lv.x1!r} {lv.y0!r} {lv.y1!r}"]
    v = fld.values
    for j in range(lv.ny):
        for i in range(lv.nx):
            out.append(f"{x[i]!r} {y[j]!r} {float(v[i, j])!r}")
    path.write_text("\n".join(out) + "\n")
    return path


def read_field(path) -> Field:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    nx, ny = int(head[2]), int(head[4])
    x0, x1, y0, y1 = (float(t) for t in head[6:10])
    lv = GridLevel(nx, ny, x0, y0, x1, y1)
    vals = np.empty((nx, ny))
    rows = lines[1:]
    if len(rows) != nx * ny:
        raise ValueError(f"expected {nx * ny} data rows, found {len(rows)}")
    for n, line in enumerate(rows):
        j, i = divmod(n, nx)
        vals[i, j] = float(line.split()[2])
    return Field(lv, vals)
