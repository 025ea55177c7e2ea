"""Linear convection-diffusion model problem ``(a u)_x - eps Lap u = f``.

Discretised with the kappa-scheme (or a limited variant) for convection and
the 5-point star for diffusion on a vertex-centred grid.  Relaxation is done
by x-line splittings in residual form,

    L0 sigma = f - L u,    u <- u + omega sigma,

so every splitting has the discrete solution as its fixed point.  Lines are
visited in increasing ``j``; the lines below already hold new values.

Splitting matrices (convection part, per unit ``a/h`` and multiplying
``sigma_i - sigma_{i-1}``):

==========  ======================  =====================================
kind        kappa_fixed             limited (frozen phi, clipped to [0, 2])
==========  ======================  =====================================
Ls0         (5 - 3 kappa)/4         1 + phi_i/2 + phi_{i-1}/2
Ls1         (2 - kappa)/2           1 + phi_i/2
Ls2         1                       1
==========  ======================  =====================================

Ls3 uses the Ls1 line matrix composed with the distribution
``u += s_i - (s_{i-1} + s_{i+1} + s_{i,j-1} + s_{i,j+1})/4``; its lines are
solved from the old iterate and the update is applied after the sweep.

The ``u_{i-2}`` value needed at the first interior column comes from the
Dirichlet data evaluated one cell outside the domain.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from numba import njit

from ._jit import banded_solve_inplace
from .grid import (Field, GridHierarchy, GridLevel, SingularLineError, convergence_order,
                   error_norms, grid_norms, make_hierarchy, prolong_values,
                   restrict_full_weighting)
from .limiters import KINDS, LimiterSpec
from .report import SolveReport

UPWIND_CODE = len(KINDS)  # phi == 0, first-order upwind


class SplittingKind(str, Enum):
    LS0 = "Ls0"
    LS1 = "Ls1"
    LS2 = "Ls2"
    LS3 = "Ls3"
    DEFECT_CORRECTION = "defect_correction"

    @classmethod
    def parse(cls, text):
        t = str(text).strip().lower()
        for k in cls:
            if k.value.lower() == t or k.name.lower() == t:
                return k
        raise ValueError(f"unknown splitting {text!r}; expected one of {[k.value for k in cls]}")

    @property
    def code(self) -> int:
        return {"Ls0": 0, "Ls1": 1, "Ls2": 2, "Ls3": 3}[self.value]


def exact_x4y4(x, y):
    return x ** 4 + y ** 4


@dataclass
class CdProblem:
    a: float = 1.0
    eps: float = 1e-6
    spec: LimiterSpec = field(default_factory=lambda: LimiterSpec("kappa_fixed", 1.0 / 3.0))
    hierarchy: GridHierarchy = None
    exact: Callable = exact_x4y4
    omega: float = 1.0
    omega_ls3: float = 0.7

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.a > 0:
            raise ValueError("convection speed a must be positive")
        if self.hierarchy is None:
            self.hierarchy = make_hierarchy((-1.0, 1.0), 9, 3)

    def forcing(self, x, y):
        """``f = a u_x - eps Lap u`` for the default exact solution, or by
        central differences of ``exact`` otherwise."""
        if self.exact is exact_x4y4:
            return self.a * 4 * x ** 3 - self.eps * 12 * (x ** 2 + y ** 2)
        d = 1e-4
        e = self.exact
        ux = (e(x + d, y) - e(x - d, y)) / (2 * d)
        lap = (e(x + d, y) + e(x - d, y) + e(x, y + d) + e(x, y - d) - 4 * e(x, y)) / d ** 2
        return self.a * ux - self.eps * lap

    @property
    def code(self) -> int:
        return KINDS.index(self.spec.kind)

    @property
    def kappa(self) -> float:
        return float(self.spec.kappa)


@dataclass
class LevelData:
    level: GridLevel
    f: np.ndarray
    ghost: np.ndarray  # u at x0 - h for every j

    @classmethod
    def for_problem(cls, problem: CdProblem, level: GridLevel):
        X, Y = level.mesh()
        return cls(level, problem.forcing(X, Y), problem.exact(level.x0 - level.hx, level.y))

    def initial(self, problem: CdProblem, interior=0.0) -> np.ndarray:
        u = np.full(self.level.shape, float(interior))
        Field(self.level, u).set_boundary(problem.exact)
        return u


# ----------------------------------------------------------------------------
# compiled kernels

@njit(cache=True)
def _phi(code, kappa, r):
    if code == 0:
        return 0.5 * (1.0 + kappa) * r + 0.5 * (1.0 - kappa)
    if r <= 0.0:
        return 0.0
    if code == 1:
        return min(r, 1.0)
    if code == 2:
        return 2.0 * r / (1.0 + r)
    if code == 3:
        return (r * r + r) / (r * r + 1.0)
    if code == 4:
        return max(min(2.0 * r, 1.0), min(r, 2.0))
    if code == 5:
        return max(0.0, min(2.0 * r, min((1.0 + 2.0 * r) / 3.0, 2.0)))
    return 0.0


@njit(cache=True)
def _ratio(dp, dm):
    return dp / (dm + (1e-14 if dm >= 0.0 else -1e-14))


@njit(cache=True)
def _half_increment(code, kappa, dp, dm):
    """phi(r)/2 * dm, written without the ratio for the linear scheme."""
    if code == 0:
        return 0.25 * (1.0 + kappa) * dp + 0.25 * (1.0 - kappa) * dm
    if code > 5:
        return 0.0
    return 0.5 * _phi(code, kappa, _ratio(dp, dm)) * dm


@njit(cache=True)
def _operator_at(u, ghost, i, j, a, eps, hx, hy, code, kappa):
    um2 = ghost[j] if i == 1 else u[i - 2, j]
    um = u[i - 1, j]
    u0 = u[i, j]
    up = u[i + 1, j]
    qi = _half_increment(code, kappa, up - u0, u0 - um)
    qm = _half_increment(code, kappa, u0 - um, um - um2)
    conv = a * ((u0 + qi) - (um + qm)) / hx
    diff = eps * ((2.0 * u0 - um - up) / (hx * hx) + (2.0 * u0 - u[i, j - 1] - u[i, j + 1]) / (hy * hy))
    return conv + diff


@njit(cache=True)
def _residual(u, f, ghost, a, eps, hx, hy, code, kappa):
    nx, ny = u.shape
    r = np.zeros((nx, ny))
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            r[i, j] = f[i, j] - _operator_at(u, ghost, i, j, a, eps, hx, hy, code, kappa)
    return r


@njit(cache=True)
def _conv_coef(kind, code, kappa, u, ghost, i, j):
    if kind == 2 or code > 5:
        return 1.0
    if code == 0:
        if kind == 0:
            return (5.0 - 3.0 * kappa) / 4.0
        return (2.0 - kappa) / 2.0
    um2 = ghost[j] if i == 1 else u[i - 2, j]
    um = u[i - 1, j]
    u0 = u[i, j]
    p_i = min(max(_phi(code, kappa, _ratio(u[i + 1, j] - u0, u0 - um)), 0.0), 2.0)
    if kind == 0:
        p_m = min(max(_phi(code, kappa, _ratio(u0 - um, um - um2)), 0.0), 2.0)
        return 1.0 + 0.5 * p_i + 0.5 * p_m
    return 1.0 + 0.5 * p_i


@njit(cache=True)
def _line_bands(u, ghost, j, a, eps, hx, hy, kind, code, kappa):
    """Tridiagonal line matrix of Ls0/Ls1/Ls2 on line ``j``."""
    nx = u.shape[0]
    n = nx - 2
    bands = np.zeros((3, n))
    dx = eps / (hx * hx)
    dy = eps / (hy * hy)
    for i in range(1, nx - 1):
        c = a * _conv_coef(kind, code, kappa, u, ghost, i, j) / hx
        bands[0, i - 1] = -c - dx
        bands[1, i - 1] = c + 2.0 * dx + 2.0 * dy
        bands[2, i - 1] = -dx
    bands[0, 0] = 0.0
    bands[2, n - 1] = 0.0
    return bands


@njit(cache=True)
def _line_bands_distributed(u, ghost, j, a, eps, hx, hy, code, kappa):
    """Pentadiagonal Ls3 matrix: Ls1 line operator times the distribution."""
    nx, ny = u.shape
    n = nx - 2
    bands = np.zeros((5, n))
    dx = eps / (hx * hx)
    dy = eps / (hy * hy)
    ny_int = 0
    if j - 1 >= 1:
        ny_int += 1
    if j + 1 <= ny - 2:
        ny_int += 1
    for i in range(1, nx - 1):
        c = a * _conv_coef(1, code, kappa, u, ghost, i, j) / hx
        row = i - 1
        # operator entries on v at columns i-1, i, i+1 (interior only)
        for off in range(-1, 2):
            col = row + off
            if col < 0 or col >= n:
                continue
            if off == -1:
                aval = -c - dx
            elif off == 0:
                aval = c + 2.0 * dx + 2.0 * dy
            else:
                aval = -dx
            # v_col = s_col - (s_col-1 + s_col+1)/4
            bands[2 + off, row] += aval
            if col - 1 >= 0:
                bands[2 + off - 1, row] -= 0.25 * aval
            if col + 1 < n:
                bands[2 + off + 1, row] -= 0.25 * aval
        # y-neighbours receive -s_i/4, coupled by -dy each
        bands[2, row] += 0.25 * dy * ny_int
    return bands


@njit(cache=True)
def _sweep_gs(u, f, ghost, a, eps, hx, hy, kind, code, kappa, omega):
    nx, ny = u.shape
    n = nx - 2
    smax = 0.0
    for j in range(1, ny - 1):
        rhs = np.empty(n)
        for i in range(1, nx - 1):
            rhs[i - 1] = f[i, j] - _operator_at(u, ghost, i, j, a, eps, hx, hy, code, kappa)
        bands = _line_bands(u, ghost, j, a, eps, hx, hy, kind, code, kappa)
        bad = banded_solve_inplace(bands, rhs)
        if bad >= 0:
            return -1.0 - j
        for i in range(n):
            u[i + 1, j] += omega * rhs[i]
            if abs(rhs[i]) > smax:
                smax = abs(rhs[i])
    return smax


@njit(cache=True)
def _sweep_distributed(u, f, ghost, a, eps, hx, hy, code, kappa, omega):
    nx, ny = u.shape
    n = nx - 2
    r = _residual(u, f, ghost, a, eps, hx, hy, code, kappa)
    s = np.zeros((nx, ny))
    for j in range(1, ny - 1):
        rhs = r[1:nx - 1, j].copy()
        bands = _line_bands_distributed(u, ghost, j, a, eps, hx, hy, code, kappa)
        bad = banded_solve_inplace(bands, rhs)
        if bad >= 0:
            return -1.0 - j
        for i in range(n):
            s[i + 1, j] = rhs[i]
    smax = 0.0
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            d = s[i, j] - 0.25 * (s[i - 1, j] + s[i + 1, j] + s[i, j - 1] + s[i, j + 1])
            u[i, j] += omega * d
            if abs(s[i, j]) > smax:
                smax = abs(s[i, j])
    return smax


# ----------------------------------------------------------------------------
# python-level API

def _params(level: GridLevel, problem: CdProblem, code=None):
    return (problem.a, problem.eps, level.hx, level.hy,
            problem.code if code is None else code, problem.kappa)


def residual(problem: CdProblem, data: LevelData, u, code=None) -> np.ndarray:
    """``f - L u`` at interior points, zero on the boundary."""
    a, eps, hx, hy, c, k = _params(data.level, problem, code)
    return _residual(np.ascontiguousarray(u, dtype=float), data.f, data.ghost, a, eps, hx, hy, c, k)


def apply_operator(problem: CdProblem, level: GridLevel, u, ghost=None, code=None) -> np.ndarray:
    """``L u`` at interior points (boundary rows zero)."""
    zero = LevelData(level, np.zeros(level.shape),
                     np.zeros(level.ny) if ghost is None else np.asarray(ghost, dtype=float))
    return -residual(problem, zero, u, code)


def sweep(problem: CdProblem, kind, u, rhs: LevelData, omega=None, code=None):
    """One x-line relaxation sweep in place.  Returns ``(u, max |sigma|)``."""
    kind = SplittingKind.parse(kind) if not isinstance(kind, SplittingKind) else kind
    if kind is SplittingKind.DEFECT_CORRECTION:
        raise ValueError("defect correction is a cycle, not a sweep; use defect_correction_cycle")
    a, eps, hx, hy, c, k = _params(rhs.level, problem, code)
    if kind is SplittingKind.LS3:
        w = problem.omega_ls3 if omega is None else omega
        s = _sweep_distributed(u, rhs.f, rhs.ghost, a, eps, hx, hy, c, k, w)
    else:
        w = problem.omega if omega is None else omega
        s = _sweep_gs(u, rhs.f, rhs.ghost, a, eps, hx, hy, kind.code, c, k, w)
    if s < 0:
        raise SingularLineError(int(-s - 1))
    return u, s


def line_matrix(problem: CdProblem, kind, u, data: LevelData, j, code=None) -> np.ndarray:
    """Band array of the line matrix used by ``kind`` on line ``j``."""
    kind = SplittingKind.parse(kind) if not isinstance(kind, SplittingKind) else kind
    a, eps, hx, hy, c, k = _params(data.level, problem, code)
    u = np.ascontiguousarray(u, dtype=float)
    if kind is SplittingKind.LS3:
        return _line_bands_distributed(u, data.ghost, j, a, eps, hx, hy, c, k)
    return _line_bands(u, data.ghost, j, a, eps, hx, hy, kind.code, c, k)


@dataclass
class KappaStencil:
    """Per-point stencil of the linear kappa operator.

    ``cx[i, j, :]`` multiplies ``u[i-2 .. i+2, j]`` and ``cy[i, j, :]``
    multiplies ``u[i, j-1]`` and ``u[i, j+1]``.  Entries are set on interior
    points only; at ``i = 1`` the ``i-2`` entry refers to the ghost value.
    """

    level: GridLevel
    cx: np.ndarray
    cy: np.ndarray

    def dense(self):
        """Matrix on interior unknowns (i outer); ghost/boundary couplings dropped."""
        nx, ny = self.level.shape
        mi, mj = nx - 2, ny - 2
        A = np.zeros((mi * mj, mi * mj))
        idx = lambda i, j: (j - 1) * mi + (i - 1)
        for j in range(1, ny - 1):
            for i in range(1, nx - 1):
                r = idx(i, j)
                for o in range(-2, 3):
                    if 1 <= i + o <= nx - 2:
                        A[r, idx(i + o, j)] += self.cx[i, j, o + 2]
                for o, jj in ((0, j - 1), (1, j + 1)):
                    if 1 <= jj <= ny - 2:
                        A[r, idx(i, jj)] += self.cy[i, j, o]
        return A


def assemble_kappa_operator(problem: CdProblem, level: GridLevel) -> KappaStencil:
    if problem.spec.kind != "kappa_fixed":
        raise ValueError("a fixed stencil exists only for kappa_fixed; limited schemes depend on u")
    k = problem.kappa
    nx, ny = level.shape
    conv = problem.a / level.hx * np.array([(1 - k) / 4, (-5 + 3 * k) / 4, (3 - 3 * k) / 4,
                                            (1 + k) / 4, 0.0])
    dx, dy = problem.eps / level.hx ** 2, problem.eps / level.hy ** 2
    diff = np.array([0.0, -dx, 2 * dx + 2 * dy, -dx, 0.0])
    cx = np.zeros((nx, ny, 5))
    cy = np.zeros((nx, ny, 2))
    cx[1:-1, 1:-1] = conv + diff
    cy[1:-1, 1:-1] = -dy
    return KappaStencil(level, cx, cy)


# ----------------------------------------------------------------------------
# multigrid

class DivergenceError(RuntimeError):
    pass


def _coarse_dense_solve(problem, data: LevelData, code):
    """Direct solve of ``L e = f`` (zero boundary and ghost) on a small grid."""
    lv = data.level
    nx, ny = lv.shape
    mi, mj = nx - 2, ny - 2
    A = np.zeros((mi * mj, mi * mj))
    e = np.zeros(lv.shape)
    for col in range(mi * mj):
        jj, ii = divmod(col, mi)
        e[ii + 1, jj + 1] = 1.0
        A[:, col] = apply_operator(problem, lv, e, data.ghost, code)[1:-1, 1:-1].T.ravel()
        e[ii + 1, jj + 1] = 0.0
    b = data.f[1:-1, 1:-1].T.ravel()
    sol = np.linalg.solve(A, b)
    out = np.zeros(lv.shape)
    out[1:-1, 1:-1] = sol.reshape(mj, mi).T
    return out


def _is_linear(problem, code):
    return code in (0, UPWIND_CODE)


def vcycle(problem, hierarchy, k, u, data: LevelData, kind, nu1=2, nu2=1, gamma=1, code=None):
    """Correction-scheme cycle on level ``k`` (coarsest is 0), in place."""
    code = problem.code if code is None else code
    if not _is_linear(problem, code):
        raise ValueError("correction-scheme multigrid needs a linear operator (kappa_fixed)")
    if k == 0:
        zero_ghost = np.zeros_like(data.ghost)
        r = residual(problem, data, u, code)
        u += _coarse_dense_solve(problem, LevelData(data.level, r, zero_ghost), code)
        return u
    for _ in range(nu1):
        sweep(problem, kind, u, data, code=code)
    r = residual(problem, data, u, code)
    rc = restrict_full_weighting(Field(data.level, r)).values
    rc[0, :] = rc[-1, :] = rc[:, 0] = rc[:, -1] = 0.0
    coarse = LevelData(hierarchy[k - 1], rc, np.zeros(hierarchy[k - 1].ny))
    ec = np.zeros(coarse.level.shape)
    for _ in range(gamma):
        vcycle(problem, hierarchy, k - 1, ec, coarse, kind, nu1, nu2, gamma, code)
    u += prolong_values(ec)
    for _ in range(nu2):
        sweep(problem, kind, u, data, code=code)
    return u


def defect_correction_cycle(problem: CdProblem, u, data: LevelData = None, hierarchy=None,
                            nu1=2, nu2=1):
    """One defect-correction step: ``L_low e = f - L_high u`` by one V-cycle
    of the first-order operator (Ls2 smoother), then ``u += e``."""
    hierarchy = problem.hierarchy if hierarchy is None else hierarchy
    lv = Field(hierarchy.finest, u).level if data is None else data.level
    data = LevelData.for_problem(problem, lv) if data is None else data
    k = [g for g in hierarchy.levels].index(lv)
    r = residual(problem, data, u)
    e = np.zeros_like(u)
    corr = LevelData(lv, r, np.zeros(lv.ny))
    vcycle(problem, hierarchy, k, e, corr, SplittingKind.LS2, nu1, nu2, code=UPWIND_CODE)
    u += e
    return u


def _cycle(problem, hierarchy, k, u, data, kind, cycle_spec):
    nu1, nu2, shape, _ = cycle_spec
    gamma = 2 if str(shape).upper() == "W" else 1
    if kind is SplittingKind.DEFECT_CORRECTION:
        return defect_correction_cycle(problem, u, data, GridHierarchy(hierarchy.levels[:k + 1]),
                                       nu1, nu2)
    return vcycle(problem, hierarchy, k, u, data, kind, nu1, nu2, gamma)


def solve_level(problem, hierarchy, k, kind, cycle_spec, u=None, tol=None,
                history=None, diverge_factor=10.0):
    """Run up to ``cycle_spec[3]`` cycles on level ``k``; stop early once the
    residual max-norm falls below ``tol``.  Returns ``(u, history)``."""
    kind = SplittingKind.parse(kind) if not isinstance(kind, SplittingKind) else kind
    lv = hierarchy[k]
    data = LevelData.for_problem(problem, lv)
    u = data.initial(problem) if u is None else u
    history = [] if history is None else history
    r0 = float(np.abs(residual(problem, data, u)).max())
    history.append(r0)
    best = r0
    for _ in range(cycle_spec[3]):
        if tol is not None and history[-1] <= tol:
            break
        _cycle(problem, hierarchy, k, u, data, kind, cycle_spec)
        rn = float(np.abs(residual(problem, data, u)).max())
        history.append(rn)
        if not np.isfinite(rn) or rn > diverge_factor * best:
            raise DivergenceError(f"residual grew from {best:.3e} to {rn:.3e} on level {k}")
        best = min(best, rn)
    return u, history


def mg_solve(problem: CdProblem, kind, cycle_spec=(2, 1, "V", 10), tol=1e-10,
             fmg=True) -> SolveReport:
    """Nested iteration over the hierarchy with ``cycle_spec`` cycles per level.

    Records successive-grid error norms and observed orders, and the error
    against the exact solution per level.
    """
    kind = SplittingKind.parse(kind) if not isinstance(kind, SplittingKind) else kind
    hier = problem.hierarchy
    rep = SolveReport()
    t0 = time.perf_counter()
    prev = None
    for k, lv in enumerate(hier.levels):
        tl = time.perf_counter()
        data = LevelData.for_problem(problem, lv)
        if prev is not None and fmg:
            u = prolong_values(prev)
            Field(lv, u).set_boundary(problem.exact)
        else:
            u = data.initial(problem)
        hist = []
        try:
            if k == 0:
                if not _is_linear(problem, problem.code):
                    raise ValueError("mg_solve needs a linear operator (kappa_fixed)")
                hist.append(float(np.abs(residual(problem, data, u)).max()))
                for _ in range(2):
                    r = residual(problem, data, u)
                    u += _coarse_dense_solve(problem, LevelData(lv, r, np.zeros(lv.ny)), problem.code)
                    hist.append(float(np.abs(residual(problem, data, u)).max()))
            else:
                scale = max(1.0, float(np.abs(data.f).max()))
                u, hist = solve_level(problem, hier, k, kind, cycle_spec, u,
                                      None if tol is None else tol * scale, hist)
        except (DivergenceError, SingularLineError) as exc:
            rep.level_histories.append(hist)
            rep.diverged = True
            rep.message = f"level {k} ({lv.nx}x{lv.ny}): {exc}"
            break
        rep.level_histories.append(hist)
        rep.level_sizes.append(lv.shape)
        rep.residual_history.extend(hist)
        X, Y = lv.mesh()
        rep.exact_norms.append(grid_norms(u - problem.exact(X, Y), lv.hx * lv.hy))
        if prev is not None:
            rep.norms.append(error_norms(Field(hier[k - 1], prev), Field(lv, u)))
        else:
            rep.norms.append(None)
        rep.record_time(f"level_{lv.nx}", time.perf_counter() - tl)
        prev = u
    valid = [n for n in rep.norms if n is not None]
    rep.orders = [tuple(convergence_order(a, b) for a, b in zip(p, q))
                  for p, q in zip(valid, valid[1:])]
    rep.converged = not rep.diverged
    rep.wall_times["total"] = time.perf_counter() - t0
    rep.extra["solution"] = prev
    return rep
