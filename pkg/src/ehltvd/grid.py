"""Uniform vertex-centred grid hierarchies, grid functions and transfers.

Arrays are indexed ``values[i, j]`` with ``i`` running along x and ``j``
along y.  Boundary points are part of every grid, so a level with ``nx``
points per axis has ``nx - 2`` interior unknowns per line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import banded_solve_inplace


class SingularLineError(ArithmeticError):
    """A zero pivot was met while eliminating a line system."""

    def __init__(self, row):
        super().__init__(f"zero pivot in line system at row {row}")
        self.row = row


@dataclass(frozen=True)
class GridLevel:
    nx: int
    ny: int
    x0: float = -1.0
    y0: float = -1.0
    x1: float = 1.0
    y1: float = 1.0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 points per axis, got {self.nx}x{self.ny}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("grid bounds must be increasing")

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y0, self.y1, self.ny)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def has_coarser(self) -> bool:
        return (self.nx - 1) % 2 == 0 and (self.ny - 1) % 2 == 0 and self.nx >= 5 and self.ny >= 5

    def coarser(self) -> "GridLevel":
        if not self.has_coarser():
            raise ValueError(f"{self.nx}x{self.ny} grid cannot be coarsened")
        return GridLevel((self.nx - 1) // 2 + 1, (self.ny - 1) // 2 + 1,
                         self.x0, self.y0, self.x1, self.y1)

    def finer(self) -> "GridLevel":
        return GridLevel(2 * (self.nx - 1) + 1, 2 * (self.ny - 1) + 1,
                         self.x0, self.y0, self.x1, self.y1)

    def zeros(self, dtype=float) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)


@dataclass
class GridHierarchy:
    """Levels ordered coarsest first."""

    levels: list[GridLevel]

    def __post_init__(self):
        for coarse, fine in zip(self.levels, self.levels[1:]):
            if fine.coarser() != coarse:
                raise ValueError("levels must double in resolution and share bounds")

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k):
        return self.levels[k]

    @property
    def finest(self) -> GridLevel:
        return self.levels[-1]

    @property
    def coarsest(self) -> GridLevel:
        return self.levels[0]


@dataclass
class Field:
    level: GridLevel
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.values is None:
            self.values = self.level.zeros()
        else:
            self.values = np.asarray(self.values)
            if self.values.shape != self.level.shape:
                raise ValueError(f"values {self.values.shape} do not match grid {self.level.shape}")

    def copy(self) -> "Field":
        return Field(self.level, self.values.copy())

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]

    def set_boundary(self, value) -> None:
        v = self.values
        if callable(value):
            X, Y = self.level.mesh()
            b = value(X, Y)
            v[0, :], v[-1, :], v[:, 0], v[:, -1] = b[0, :], b[-1, :], b[:, 0], b[:, -1]
        else:
            v[0, :] = v[-1, :] = v[:, 0] = v[:, -1] = value


def make_hierarchy(bounds, coarsest_n, levels) -> GridHierarchy:
    """Build ``levels`` grids starting from a ``coarsest_n``-point grid.

    ``bounds`` is ``(x0, x1, y0, y1)`` or a pair ``(lo, hi)`` for a square.
    ``coarsest_n`` is a point count per axis or an ``(nx, ny)`` pair.
    """
    if len(bounds) == 2:
        x0, x1 = bounds
        y0, y1 = bounds
    else:
        x0, x1, y0, y1 = bounds
    nx, ny = (coarsest_n, coarsest_n) if np.isscalar(coarsest_n) else coarsest_n
    if nx < 3 or ny < 3 or levels < 1:
        raise ValueError(f"need coarsest_n >= 3 and levels >= 1, got {coarsest_n}, {levels}")
    grids = [GridLevel(int(nx), int(ny), x0, y0, x1, y1)]
    for _ in range(levels - 1):
        grids.append(grids[-1].finer())
    return GridHierarchy(grids)


def _check_fine(f: Field) -> GridLevel:
    if not f.level.has_coarser():
        raise ValueError("field lives on the coarsest admissible grid")
    return f.level.coarser()


def restrict_injection(fine: Field) -> Field:
    coarse = _check_fine(fine)
    return Field(coarse, fine.values[::2, ::2].copy())


def restrict_full_weighting(fine: Field) -> Field:
    """Nine-point full weighting; boundary rows are injected."""
    coarse = _check_fine(fine)
    v = fine.values
    out = v[::2, ::2].copy()
    c = v[2:-2:2, 2:-2:2]
    e = v[3:-1:2, 2:-2:2] + v[1:-3:2, 2:-2:2] + v[2:-2:2, 3:-1:2] + v[2:-2:2, 1:-3:2]
    d = v[3:-1:2, 3:-1:2] + v[1:-3:2, 3:-1:2] + v[3:-1:2, 1:-3:2] + v[1:-3:2, 1:-3:2]
    out[1:-1, 1:-1] = 0.25 * c + 0.125 * e + 0.0625 * d
    return Field(coarse, out)


def prolong_values(coarse: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a coarse array to the child grid."""
    ncx, ncy = coarse.shape
    fine = np.zeros((2 * ncx - 1, 2 * ncy - 1), dtype=coarse.dtype)
    fine[::2, ::2] = coarse
    fine[1::2, ::2] = 0.5 * (coarse[:-1, :] + coarse[1:, :])
    fine[:, 1::2] = 0.5 * (fine[:, :-1:2] + fine[:, 2::2])
    return fine


def prolong_bilinear(coarse: Field, mask=None) -> Field:
    """Bilinear prolongation, zeroed where ``mask`` is False.

    ``mask`` marks the inactive fine points (those allowed to receive the
    coarse correction); ``None`` means every point is inactive.
    """
    fine_level = coarse.level.finer()
    vals = prolong_values(coarse.values)
    if mask is not None:
        m = mask.values if isinstance(mask, Field) else np.asarray(mask)
        if m.shape != fine_level.shape:
            raise ValueError(f"mask shape {m.shape} does not match fine grid {fine_level.shape}")
        vals = np.where(m.astype(bool), vals, 0.0)
    return Field(fine_level, vals)


def grid_norms(diff: np.ndarray, cell_area: float) -> tuple[float, float, float]:
    """(L1, L2, Linf) of a difference array over interior points."""
    d = np.abs(np.asarray(diff)[1:-1, 1:-1])
    if d.size == 0:
        return 0.0, 0.0, 0.0
    return (float(cell_area * d.sum()),
            float(math.sqrt(cell_area * np.sum(d * d))),
            float(d.max()))


def error_norms(coarse_solution: Field, fine_solution: Field) -> tuple[float, float, float]:
    """Successive-grid error: coarse solution against the injected fine one."""
    if fine_solution.level.coarser() != coarse_solution.level:
        raise ValueError("fine_solution must live on the child grid of coarse_solution")
    lv = coarse_solution.level
    diff = coarse_solution.values - fine_solution.values[::2, ::2]
    return grid_norms(diff, lv.hx * lv.hy)


def convergence_order(err_prev, err_next):
    """Observed order ``log2(err_prev / err_next)``; ``None`` if undefined."""
    if err_prev is None or err_next is None or err_prev <= 0 or err_next <= 0:
        return None
    return (math.log(err_prev) - math.log(err_next)) / math.log(2.0)


@dataclass
class LineSystem:
    """Banded line system; ``bands[k, i]`` multiplies ``sigma[i + k - p]``."""

    bands: np.ndarray
    rhs: np.ndarray
    sigma: np.ndarray = None

    def __post_init__(self):
        self.bands = np.asarray(self.bands)
        self.rhs = np.asarray(self.rhs)
        if self.bands.ndim != 2 or self.bands.shape[0] % 2 != 1:
            raise ValueError("bands must be a (2p+1, n) array")
        if self.bands.shape[1] != self.rhs.shape[0]:
            raise ValueError("bands and rhs lengths differ")

    @property
    def half_width(self) -> int:
        return (self.bands.shape[0] - 1) // 2

    def matvec(self, x) -> np.ndarray:
        p, n = self.half_width, self.rhs.shape[0]
        out = np.zeros(n, dtype=np.result_type(self.bands, x))
        for k in range(2 * p + 1):
            off = k - p
            lo, hi = max(0, -off), min(n, n - off)
            out[lo:hi] += self.bands[k, lo:hi] * x[lo + off:hi + off]
        return out

    def dense(self) -> np.ndarray:
        p, n = self.half_width, self.rhs.shape[0]
        a = np.zeros((n, n), dtype=self.bands.dtype)
        for k in range(2 * p + 1):
            for i in range(n):
                c = i + k - p
                if 0 <= c < n:
                    a[i, c] = self.bands[k, i]
        return a


def solve_banded(system: LineSystem) -> np.ndarray:
    """Solve the line system by elimination without pivoting."""
    dtype = np.result_type(system.bands, system.rhs, np.float64)
    bands = np.array(system.bands, dtype=dtype, order="C")
    sol = np.array(system.rhs, dtype=dtype)
    bad = banded_solve_inplace(bands, sol)
    if bad >= 0:
        raise SingularLineError(int(bad))
    system.sigma = sol
    return sol
