"""Multilevel multi-integration of the deformation sum.

The dense sum ``W_i = sum_j K(i - j) u_j`` is evaluated through a ladder of
coarser grids.  On each step two exact identities are used:

* source side: ``K(i, j)`` for a fine source ``j`` off the coarse lattice is
  replaced by its order-2p interpolant from coarse sources, so the density
  is carried to the coarse grid by the adjoint of interpolation;
* target side: the potential at fine targets off the coarse lattice is
  interpolated from coarse targets.

The terms dropped by the interpolations are added back exactly inside the
window ``|i - j|_inf <= m``; outside the window they are neglected.  The
correction weights only depend on the offset and the parity class of the
source (or target), so they are precomputed per level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._jit import direct_convolution
from .grid import Field, GridLevel
from .kernel import KernelTable, kernel_coeff


def midpoint_weights(order):
    """Lagrange weights for the midpoint of ``order`` equispaced nodes."""
    if order < 2 or order % 2:
        raise ValueError(f"interpolation order must be even and >= 2, got {order}")
    nodes = np.arange(-(order - 1), order, 2, dtype=float)
    w = np.empty(order)
    for k, xk in enumerate(nodes):
        others = np.delete(nodes, k)
        w[k] = np.prod(-others / (xk - others))
    return w


def _interp_axis(vc, w, axis):
    """Coarse -> fine along one axis; missing stencil points count as zero."""
    vc = np.moveaxis(vc, axis, 0)
    nc = vc.shape[0]
    half = len(w) // 2
    out = np.zeros((2 * nc - 1,) + vc.shape[1:])
    out[::2] = vc
    odd = out[1::2]
    for k, wk in enumerate(w):
        shift = k - half + 1  # coarse index offset from c
        lo, hi = max(0, -shift), min(nc - 1, nc - shift)
        odd[lo:hi] += wk * vc[lo + shift:hi + shift]
    return np.moveaxis(out, 0, axis)


def _adjoint_axis(vf, w, axis):
    """Transpose of ``_interp_axis``."""
    vf = np.moveaxis(vf, axis, 0)
    nc = (vf.shape[0] + 1) // 2
    half = len(w) // 2
    out = vf[::2].copy()
    odd = vf[1::2]
    for k, wk in enumerate(w):
        shift = k - half + 1
        lo, hi = max(0, -shift), min(nc - 1, nc - shift)
        out[lo + shift:hi + shift] += wk * odd[lo:hi]
    return np.moveaxis(out, 0, axis)


def interpolate(vc, order=6):
    w = midpoint_weights(order)
    return _interp_axis(_interp_axis(vc, w, 0), w, 1)


def adjoint_interpolate(vf, order=6):
    if vf.shape[0] % 2 == 0 or vf.shape[1] % 2 == 0:
        raise ValueError("adjoint interpolation needs odd point counts")
    w = midpoint_weights(order)
    return _adjoint_axis(_adjoint_axis(vf, w, 0), w, 1)


def coarsen_density(u_fine, order=6, extend=False):
    """Scaled adjoint of order-``order`` interpolation, ``2^-2 I^T u``.

    With ``extend=True`` the coarse grid gets ``order/2 - 1`` extra points
    per side so that no fine contribution is dropped and the discrete mass
    ``h^2 sum u`` equals ``H^2 sum u*`` exactly.
    """
    u = u_fine.values if isinstance(u_fine, Field) else np.asarray(u_fine, dtype=float)
    if min(u.shape) < 3:
        raise ValueError("grid too small to coarsen")
    if extend:
        e = 2 * (order // 2 - 1)
        u = np.pad(u, e)
    return 0.25 * adjoint_interpolate(u, order)


def inject_kernel(table_fine):
    """Coarse kernel table by subsampling, ``g_H[I, J] = g_h[2I, 2J]``."""
    if isinstance(table_fine, KernelTable):
        return KernelTable(table_fine.level.coarser(), table_fine.g[::2, ::2].copy())
    return np.asarray(table_fine)[::2, ::2].copy()


@njit(cache=True)
def _parity_correction(vals, C, m, by_source):
    n1, n2 = vals.shape
    out = np.zeros((n1, n2))
    for i1 in range(n1):
        for i2 in range(n2):
            s = 0.0
            for d1 in range(-m, m + 1):
                j1 = i1 - d1
                if j1 < 0 or j1 >= n1:
                    continue
                for d2 in range(-m, m + 1):
                    j2 = i2 - d2
                    if j2 < 0 or j2 >= n2:
                        continue
                    v = vals[j1, j2]
                    if v == 0.0:
                        continue
                    if by_source:
                        p1, p2 = j1 & 1, j2 & 1
                    else:
                        p1, p2 = i1 & 1, i2 & 1
                    s += C[p1, p2, d1 + m, d2 + m] * v
            out[i1, i2] = s
    return out


def _pad_widths(n, order):
    lo = 2 * (order // 2) - 1
    hi = lo if (n + 2 * lo) % 2 == 1 else lo + 1
    return lo, hi


@dataclass
class MlmiPlan:
    """Precomputed per-level kernels for one fine grid.

    ``levels`` counts coarsening steps; level ``k`` uses the fine kernel
    injected ``k`` times, ``K_k(d) = K_0(2^k d)``.
    """

    order_2p: int
    m: int
    levels: int
    h: float
    shapes: list = field(default_factory=list)
    corrections: list = field(default_factory=list)
    coarse_table: np.ndarray = None

    @classmethod
    def build(cls, level: GridLevel, order_2p=6, m=4, levels=None, min_points=None):
        if order_2p % 2 or order_2p < 4:
            raise ValueError("order_2p must be an even integer >= 4")
        if m < order_2p // 2:
            raise ValueError(f"correction radius m={m} must be >= order_2p/2")
        if not np.isclose(level.hx, level.hy, rtol=1e-12, atol=0.0):
            raise ValueError("MLMI needs square cells")
        h = level.hx
        if min_points is None:
            min_points = order_2p + 3
        shapes = [level.shape]
        auto = levels is None
        max_levels = 64 if auto else levels
        while len(shapes) - 1 < max_levels:
            nx, ny = shapes[-1]
            px, py = _pad_widths(nx, order_2p), _pad_widths(ny, order_2p)
            cx, cy = (nx + sum(px) + 1) // 2, (ny + sum(py) + 1) // 2
            if auto and (nx * ny <= 41 * 41 or min(cx, cy) < min_points):
                break
            if not auto and min(cx, cy) < min_points:
                raise ValueError(f"{levels} coarsening steps leave fewer than {min_points} points")
            shapes.append((cx, cy))
        plan = cls(order_2p, m, len(shapes) - 1, h, shapes)
        w = midpoint_weights(order_2p)
        s = np.arange(-(order_2p - 1), order_2p, 2)
        reach = m + order_2p
        d = np.arange(-reach, reach + 1, dtype=float)
        for k in range(plan.levels):
            scale = 2.0 ** k
            D1, D2 = np.meshgrid(d, d, indexing="ij")
            K = h * kernel_coeff(scale * D1, scale * D2, 1.0)
            C = np.zeros((2, 2, 2 * m + 1, 2 * m + 1))
            c0 = reach
            win = slice(c0 - m, c0 + m + 1)
            for p1 in (0, 1):
                for p2 in (0, 1):
                    if p1 == 0 and p2 == 0:
                        continue
                    s1, w1 = (s, w) if p1 else (np.array([0]), np.array([1.0]))
                    s2, w2 = (s, w) if p2 else (np.array([0]), np.array([1.0]))
                    approx = np.zeros((2 * m + 1, 2 * m + 1))
                    for a, wa in zip(s1, w1):
                        for b, wb in zip(s2, w2):
                            approx += wa * wb * K[c0 - m + a:c0 + m + 1 + a,
                                                  c0 - m + b:c0 + m + 1 + b]
                    C[p1, p2] = K[win, win] - approx
            plan.corrections.append(C)
        nx, ny = shapes[-1]
        scale = 2.0 ** plan.levels
        D1, D2 = np.meshgrid(np.arange(nx, dtype=float), np.arange(ny, dtype=float), indexing="ij")
        plan.coarse_table = np.ascontiguousarray(h * kernel_coeff(scale * D1, scale * D2, 1.0))
        return plan

    def _eval(self, u, k):
        if k == self.levels:
            return direct_convolution(self.coarse_table, np.ascontiguousarray(u))
        nx, ny = u.shape
        (lx, hx), (ly, hy) = _pad_widths(nx, self.order_2p), _pad_widths(ny, self.order_2p)
        up = np.pad(u, ((lx, hx), (ly, hy)))
        U = adjoint_interpolate(up, self.order_2p)
        W = interpolate(self._eval(U, k + 1), self.order_2p)
        C = self.corrections[k]
        W += _parity_correction(up, C, self.m, True)
        Uf = np.zeros_like(up)
        Uf[::2, ::2] = U
        W += _parity_correction(Uf, C, self.m, False)
        return W[lx:lx + nx, ly:ly + ny]


def mlmi_deformation(u, plan: MlmiPlan, tables=None):
    """Deformation field ``sum G u`` evaluated by multilevel multi-integration.

    ``tables`` is accepted for interface symmetry with the direct path and
    ignored; the plan carries its own injected kernels.
    """
    vals = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    if vals.shape != tuple(plan.shapes[0]):
        raise ValueError(f"plan built for {plan.shapes[0]}, got {vals.shape}")
    out = plan._eval(np.ascontiguousarray(vals, dtype=float), 0)
    return Field(u.level, out) if isinstance(u, Field) else out
