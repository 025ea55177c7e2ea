"""Elastic deformation kernel for piecewise-constant pressure on square cells.

The coefficient ``G(dx, dy)`` is the surface deflection at offset ``(dx, dy)``
caused by unit pressure on an ``h x h`` cell, including the 2/pi^2 factor
of the dimensionless film equation.  It is homogeneous of degree one, so a
table on spacing ``h`` is ``h`` times the unit-spacing table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import direct_convolution
from .grid import Field, GridLevel

PREFACTOR = 2.0 / np.pi ** 2


def _f(a, b):
    """|a| * asinh(b / a), continuous extension 0 at a = 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros(np.broadcast(a, b).shape)
    nz = np.broadcast_to(a != 0, out.shape)
    a_b, b_b = np.broadcast_to(a, out.shape), np.broadcast_to(b, out.shape)
    out[nz] = np.abs(a_b[nz]) * np.arcsinh(b_b[nz] / a_b[nz])
    return out


def _prim(x, y):
    return _f(x, y) + _f(y, x)


def kernel_coeff(dx, dy, h):
    """Deflection coefficient at offset ``(dx, dy)`` for cell size ``h``.

    Vectorised over ``dx`` and ``dy``.  Returns a float for scalar input.
    """
    if not h > 0:
        raise ValueError(f"cell size must be positive, got {h}")
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    xp, xm = dx + 0.5 * h, dx - 0.5 * h
    yp, ym = dy + 0.5 * h, dy - 0.5 * h
    k = _prim(xp, yp) - _prim(xp, ym) - _prim(xm, yp) + _prim(xm, ym)
    k = PREFACTOR * k
    return float(k) if k.ndim == 0 else k


@dataclass(frozen=True)
class KernelTable:
    level: GridLevel
    g: np.ndarray

    @property
    def h(self) -> float:
        return self.level.hx

    def __call__(self, di, dj):
        return self.g[abs(di), abs(dj)]


def unit_table(nx, ny) -> np.ndarray:
    """Table for unit spacing, ``g[di, dj]`` for ``di < nx``, ``dj < ny``."""
    di, dj = np.meshgrid(np.arange(nx, dtype=float), np.arange(ny, dtype=float), indexing="ij")
    return kernel_coeff(di, dj, 1.0)


def build_kernel_table(level: GridLevel) -> KernelTable:
    if not np.isclose(level.hx, level.hy, rtol=1e-12, atol=0.0):
        raise ValueError("deformation kernel needs square cells (hx == hy)")
    return KernelTable(level, level.hx * unit_table(level.nx, level.ny))


def deformation_direct(u, table: KernelTable) -> np.ndarray:
    """Full O(N^2) deformation sum ``sum_kl G(|i-k|, |j-l|) u[k, l]``."""
    u = np.ascontiguousarray(u, dtype=float)
    if u.shape != table.level.shape:
        raise ValueError("pressure and kernel table live on different grids")
    return direct_convolution(np.ascontiguousarray(table.g), u)


def base_film(level: GridLevel, H00: float) -> np.ndarray:
    X, Y = level.mesh()
    return H00 + 0.5 * X ** 2 + 0.5 * Y ** 2


def film_thickness_direct(u: Field, H00: float, table: KernelTable) -> Field:
    """Film thickness with the deformation summed directly."""
    return Field(u.level, base_film(u.level, H00) + deformation_direct(u.values, table))


def sigma_kernel_window(table: KernelTable, i, j, radius, distributed=False):
    """Kernel coefficients coupling a point to the changes on its own line.

    Returns ``(ks, coeffs)`` where ``coeffs[n]`` is the change of the
    deformation at ``(i, j)`` per unit change attached to ``(ks[n], j)``,
    for ``|ks[n] - i| <= radius`` restricted to interior columns.

    With ``distributed=True`` each change ``d`` at ``(k, j)`` is spread as
    ``+d`` at ``(k, j)`` and ``-d/4`` at each interior neighbour, the same
    weights used by the distributive update.
    """
    if radius < 1:
        raise ValueError("kernel window radius must be >= 1")
    nx, ny = table.level.shape
    g = table.g
    ks = np.arange(max(1, i - radius), min(nx - 2, i + radius) + 1)
    if not distributed:
        return ks, np.array([g[abs(i - k), 0] for k in ks])
    coeffs = []
    for k in ks:
        c = g[abs(i - k), 0]
        if k - 1 >= 1:
            c -= 0.25 * g[abs(i - k + 1), 0]
        if k + 1 <= nx - 2:
            c -= 0.25 * g[abs(i - k - 1), 0]
        if j - 1 >= 1:
            c -= 0.25 * g[abs(i - k), 1]
        if j + 1 <= ny - 2:
            c -= 0.25 * g[abs(i - k), 1]
        coeffs.append(c)
    return ks, np.array(coeffs)
