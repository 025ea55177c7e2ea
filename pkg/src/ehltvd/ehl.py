"""Point-contact EHL solved as a linear complementarity problem.

The discrete Reynolds operator is written in the scaled conservative form

    L u = hy/hx [e_{i+1/2}(u_{i+1} - u_i) - e_{i-1/2}(u_i - u_{i-1})]
        + hx/hy [e_{j+1/2}(u_{j+1} - u_j) - e_{j-1/2}(u_j - u_{j-1})]
        - hy (F_{i+1/2} - F_{i-1/2}),

with ``e = rho H^3 / (eta lam)`` averaged arithmetically on faces and the
limited upwind flux ``F_{i+1/2} = (rho H)_i + phi(r_i)/2 ((rho H)_i - (rho H)_{i-1})``.
The LCP reads ``L u <= f1``, ``u >= f2``, ``(u - f2)(L u - f1) = 0`` and the
residual is ``r = f1 - L u``, which is non-negative on the active set.

Relaxation is a hybrid x-line sweep.  Each point picks line Gauss-Seidel
(change applied at once) or line Jacobi with distributive update (changes
spread as ``+s`` on the point and ``-s/4`` on its four neighbours, applied
after the sweep) from ``min(eps/hx, eps/hy)`` against a threshold.  The film
thickness couples the line unknowns through a short kernel window.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from ._jit import banded_solve_inplace, direct_convolution
from .grid import (Field, GridHierarchy, GridLevel, SingularLineError, error_norms,
                   convergence_order, make_hierarchy, prolong_values, restrict_full_weighting)
from .kernel import KernelTable, base_film, build_kernel_table, sigma_kernel_window
from .limiters import LimiterSpec, limiter_phi, regularized_ratio
from .mlmi import MlmiPlan, mlmi_deformation
from .physics import InvalidStateError, PhysicsParams, density, resolve_moes, viscosity
from .report import SolveReport

GAUSS_SEIDEL = "gauss_seidel"
JACOBI_DISTRIBUTED = "jacobi_distributed"
HYBRIDS = ("hs1", "hs2")
LOAD = 2.0 * math.pi / 3.0
H_FLOOR = 1e-6  # film floor used when forming eps
H00_EVERY = 4  # coarsest-grid sweeps between force-balance updates
DIRECT_FILM_MAX_N = 65  # grids up to this size sum the kernel directly


class EhlDivergenceError(RuntimeError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class NonPhysicalStateError(InvalidStateError):
    def __init__(self, level_n, iteration, h_min):
        super().__init__(f"film thickness {h_min:.3e} <= 0 on the {level_n}^2 grid "
                         f"at iteration {iteration}")
        self.level_n = level_n
        self.iteration = iteration
        self.h_min = h_min


@dataclass(frozen=True)
class EhlConfig:
    """Solver settings.

    ``cycle`` is ``(nu1, nu2, "V" | "W", count)``; ``count`` caps the cycles
    run on each FMG level.  ``hybrid`` selects the L_hs1 (Ls1-type) or
    L_hs2 (Ls0-type) convection coefficients in the line systems.
    """

    physics: PhysicsParams
    hierarchy: GridHierarchy
    spec: LimiterSpec = LimiterSpec("vanleer")
    hybrid: str = "hs1"
    switch_threshold: float = 0.6
    omega_gs: float = 0.8
    omega_jac: float = 0.5
    c_h00: float = 0.05
    cycle: tuple = (2, 1, "V", 12)
    window_radius: int = 1
    mlmi_order: int = 6
    mlmi_m: int = 10
    direct_film: bool = False
    tol: float = 1e-7
    coarsest_tol: float = 1e-10
    coarsest_max_sweeps: int = 200
    h00_init: float = -0.5
    fmg: bool = True
    coarse_load_balance: bool = True
    ratio_delta: float = 0.0
    freeze_limiter_below: float = 1e-2

    def __post_init__(self):
        if not self.switch_threshold > 0:
            raise ValueError("switch_threshold must be positive")
        if not 0.005 <= self.c_h00 <= 0.2:
            raise ValueError(f"c_h00 must lie in [0.005, 0.2], got {self.c_h00}")
        if self.hybrid not in HYBRIDS:
            raise ValueError(f"hybrid must be one of {HYBRIDS}, got {self.hybrid!r}")
        if not (0 < self.omega_gs <= 1.5 and 0 < self.omega_jac <= 1.5):
            raise ValueError("under-relaxation factors must lie in (0, 1.5]")
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        nu1, nu2, kind, count = self.cycle
        if min(nu1, nu2) < 0 or nu1 + nu2 < 1 or count < 1 or kind not in ("V", "W"):
            raise ValueError(f"bad cycle specification {self.cycle}")
        for lv in self.hierarchy.levels:
            if not np.isclose(lv.hx, lv.hy, rtol=1e-12, atol=0.0):
                raise ValueError("EHL grids need square cells")

    @classmethod
    def for_case(cls, M, L, finest_n=257, coarsest_n=None, half_width=2.5, alpha=1.7e-8, **kw):
        """Standard setup on ``[-w, w]^2`` with 33^2 (65^2 for M >= 1000) coarsest."""
        if coarsest_n is None:
            coarsest_n = 65 if M >= 1000 else 33
        levels = int(round(math.log2((finest_n - 1) / (coarsest_n - 1)))) + 1
        if (coarsest_n - 1) * 2 ** (levels - 1) != finest_n - 1:
            raise ValueError(f"{finest_n} is not reachable from {coarsest_n} by doubling")
        hier = make_hierarchy((-half_width, half_width), coarsest_n, levels)
        return cls(physics=resolve_moes(M, L, alpha), hierarchy=hier, **kw)

    def with_(self, **kw) -> "EhlConfig":
        return replace(self, **kw)


class _Film:
    """Deformation evaluator for one grid (direct sum or MLMI)."""

    def __init__(self, level: GridLevel, config: EhlConfig):
        self.level = level
        self.table = build_kernel_table(level)
        self.plan = None
        if not config.direct_film and max(level.nx, level.ny) > DIRECT_FILM_MAX_N:
            self.plan = MlmiPlan.build(level, config.mlmi_order, config.mlmi_m)

    def __call__(self, u):
        u = np.ascontiguousarray(u, dtype=float)
        if self.plan is None:
            return direct_convolution(np.ascontiguousarray(self.table.g), u)
        return mlmi_deformation(u, self.plan)


@dataclass
class LcpLevelState:
    """Iterate and right-hand sides of the LCP on one grid."""

    level: GridLevel
    u: Field
    H: Field
    eps: Field
    H00: float
    rhs_f1: Field
    lower_f2: Field
    coarse_rhs_film: Field
    load_target: float = LOAD
    phi_frozen: np.ndarray = None
    rho: np.ndarray = None
    film: _Film = field(default=None, repr=False)

    @property
    def table(self) -> KernelTable:
        return self.film.table

    def check_projection(self):
        if np.any(self.u.values < self.lower_f2.values):
            raise AssertionError("pressure below the obstacle after projection")


EhlState = LcpLevelState


def make_state(level: GridLevel, config: EhlConfig, u=None, H00=None, film=None) -> LcpLevelState:
    zeros = level.zeros
    st = LcpLevelState(level=level, u=Field(level, zeros() if u is None else np.array(u, dtype=float)),
                       H=Field(level), eps=Field(level),
                       H00=config.h00_init if H00 is None else float(H00),
                       rhs_f1=Field(level), lower_f2=Field(level), coarse_rhs_film=Field(level),
                       film=film if film is not None else _Film(level, config))
    st.u.set_boundary(0.0)
    refresh(st, config)
    return st


def hertz_pressure(level: GridLevel) -> np.ndarray:
    X, Y = level.mesh()
    return np.sqrt(np.maximum(0.0, 1.0 - X ** 2 - Y ** 2))


def refresh(state: LcpLevelState, config: EhlConfig):
    """Recompute film thickness, density and eps from ``u`` and ``H00``."""
    u = state.u.values
    p = config.physics
    H = base_film(state.level, state.H00) + state.film(u) + state.coarse_rhs_film.values
    state.H.values = H
    state.rho = density(u, p)
    Hc = np.maximum(H, H_FLOOR)
    state.eps.values = state.rho * Hc ** 3 / (viscosity(u, p) * p.lam)
    return state


def limiter_values(rhoH, spec: LimiterSpec, delta=0.0) -> np.ndarray:
    """``phi(r_i)`` per point along x, zero on the two boundary columns.

    ``r_i = (a b + delta) / (b^2 + delta)`` with ``a = q_{i+1} - q_i`` and
    ``b = q_i - q_{i-1}``; ``delta = 0`` is the plain ratio ``a / b``.  A
    positive ``delta`` sends ``r`` to 1 where both differences are tiny, which
    keeps the limiter from flipping on round-off in flat regions.
    """
    phi = np.zeros_like(rhoH)
    a = rhoH[2:] - rhoH[1:-1]
    b = rhoH[1:-1] - rhoH[:-2]
    if delta > 0:
        r = (a * b + delta) / (b * b + delta)
    else:
        r = regularized_ratio(a, b)
    phi[1:-1] = limiter_phi(spec, r)
    return phi


@njit(cache=True)
def _face_flux(rhoH, phi, i, j):
    if i == 0:
        return rhoH[0, j]
    return rhoH[i, j] + 0.5 * phi[i, j] * (rhoH[i, j] - rhoH[i - 1, j])


@njit(cache=True)
def _point_residual(u, rhoH, eps, phi, f1, hx, hy, i, j):
    ry, rx = hy / hx, hx / hy
    e = eps[i, j]
    aw = 0.5 * ry * (e + eps[i - 1, j])
    ae = 0.5 * ry * (e + eps[i + 1, j])
    as_ = 0.5 * rx * (e + eps[i, j - 1])
    an = 0.5 * rx * (e + eps[i, j + 1])
    c = u[i, j]
    lu = (ae * (u[i + 1, j] - c) + aw * (u[i - 1, j] - c)
          + an * (u[i, j + 1] - c) + as_ * (u[i, j - 1] - c)
          - hy * (_face_flux(rhoH, phi, i, j) - _face_flux(rhoH, phi, i - 1, j)))
    return f1[i, j] - lu


@njit(cache=True)
def _residual_field(u, rhoH, eps, phi, f1, hx, hy):
    nx, ny = u.shape
    out = np.zeros((nx, ny))
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            out[i, j] = _point_residual(u, rhoH, eps, phi, f1, hx, hy, i, j)
    return out


@njit(cache=True)
def _clip_phi(v):
    return min(max(v, 0.0), 2.0)


@njit(cache=True)
def _add(bands, p, m, k, nx, val):
    # row m (point m+1) gains val * sigma at point k
    if 1 <= k <= nx - 2:
        off = (k - 1) - m
        if -p <= off <= p:
            bands[off + p, m] += val


@njit(cache=True)
def _source_coeff(g, k, l, j, nx, ny, jd_l):
    """Change of H at (k, j) per unit line change attached to (l, j)."""
    d = abs(k - l)
    c = g[d, 0]
    if jd_l:
        if l - 1 >= 1:
            c -= 0.25 * g[abs(k - l + 1), 0]
        if l + 1 <= nx - 2:
            c -= 0.25 * g[abs(k - l - 1), 0]
        if j - 1 >= 1:
            c -= 0.25 * g[d, 1]
        if j + 1 <= ny - 2:
            c -= 0.25 * g[d, 1]
    return c


@njit(cache=True)
def _assemble_line(j, u, lower, rhoH, rho, eps, phi, f1, g, jd, hx, hy, radius, hs2, bands, rhs):
    nx, ny = u.shape
    p = (bands.shape[0] - 1) // 2
    bands[:, :] = 0.0
    ry, rx = hy / hx, hx / hy
    for i in range(1, nx - 1):
        m = i - 1
        rhs[m] = _point_residual(u, rhoH, eps, phi, f1, hx, hy, i, j)
        e = eps[i, j]
        aw = 0.5 * ry * (e + eps[i - 1, j])
        ae = 0.5 * ry * (e + eps[i + 1, j])
        as_ = 0.5 * rx * (e + eps[i, j - 1])
        an = 0.5 * rx * (e + eps[i, j + 1])
        ac = -(aw + ae + as_ + an)
        for q in range(3):
            k = i - 1 + q
            a = aw if q == 0 else (ac if q == 1 else ae)
            if k < 1 or k > nx - 2:
                continue
            _add(bands, p, m, k, nx, a)
            if k - 1 >= 1 and jd[k - 1, j]:
                _add(bands, p, m, k - 1, nx, -0.25 * a)
            if k + 1 <= nx - 2 and jd[k + 1, j]:
                _add(bands, p, m, k + 1, nx, -0.25 * a)
        if jd[i, j]:
            if j - 1 >= 1:
                _add(bands, p, m, i, nx, -0.25 * as_)
            if j + 1 <= ny - 2:
                _add(bands, p, m, i, nx, -0.25 * an)
        cf = 1.0 + 0.5 * _clip_phi(phi[i, j])
        if hs2:
            cf += 0.5 * _clip_phi(phi[i - 1, j])
        for s in range(2):
            k = i - s
            sign = 1.0 if s == 0 else -1.0
            w = -hy * cf * sign * rho[k, j]
            for l in range(max(1, k - radius), min(nx - 2, k + radius) + 1):
                _add(bands, p, m, l, nx, w * _source_coeff(g, k, l, j, nx, ny, jd[l, j]))
    # active points that the residual pushes further down stay frozen
    for i in range(1, nx - 1):
        m = i - 1
        if u[i, j] <= lower[i, j] and rhs[m] >= 0.0:
            bands[:, m] = 0.0
            bands[p, m] = 1.0
            rhs[m] = 0.0


@njit(cache=True)
def _hybrid_sweep(u, lower, rhoH, rho, eps, phi, f1, g, jd, hx, hy, radius, hs2,
                  omega_gs, omega_jac, sigma_out):
    """One x-line sweep over all interior lines; returns -1 or the failing line."""
    nx, ny = u.shape
    n = nx - 2
    p = max(2, radius + 1)
    bands = np.zeros((2 * p + 1, n))
    rhs = np.zeros(n)
    du = np.zeros((nx, ny))
    any_jd = False
    for j in range(1, ny - 1):
        _assemble_line(j, u, lower, rhoH, rho, eps, phi, f1, g, jd, hx, hy, radius, hs2, bands, rhs)
        if banded_solve_inplace(bands, rhs) >= 0:
            return j
        for i in range(1, nx - 1):
            s = rhs[i - 1]
            sigma_out[i, j] = s
            if jd[i, j]:
                any_jd = True
                du[i, j] += s
                # pinned (cavitated) neighbours do not take a share
                if i - 1 >= 1 and u[i - 1, j] > lower[i - 1, j]:
                    du[i - 1, j] -= 0.25 * s
                if i + 1 <= nx - 2 and u[i + 1, j] > lower[i + 1, j]:
                    du[i + 1, j] -= 0.25 * s
                if j - 1 >= 1 and u[i, j - 1] > lower[i, j - 1]:
                    du[i, j - 1] -= 0.25 * s
                if j + 1 <= ny - 2 and u[i, j + 1] > lower[i, j + 1]:
                    du[i, j + 1] -= 0.25 * s
            else:
                u[i, j] = max(lower[i, j], u[i, j] + omega_gs * s)
    if any_jd:
        for j in range(1, ny - 1):
            for i in range(1, nx - 1):
                if du[i, j] != 0.0:
                    u[i, j] = max(lower[i, j], u[i, j] + omega_jac * du[i, j])
    return -1


# ---------------------------------------------------------------------------
# public operations

def _frozen(state: LcpLevelState, config: EhlConfig):
    rhoH = np.ascontiguousarray(state.rho * state.H.values)
    if state.phi_frozen is not None:
        return rhoH, state.phi_frozen
    delta = config.ratio_delta * state.level.hx ** 2
    return rhoH, limiter_values(rhoH, config.spec, delta)


def freeze_limiter(state: LcpLevelState, config: EhlConfig):
    """Fix the limiter values at the current iterate.

    Only limited schemes are frozen; the fixed kappa scheme is linear in
    ``rho H`` already and its ``phi`` is unbounded.
    """
    state.phi_frozen = None
    if config.spec.is_limited:
        state.phi_frozen = _frozen(state, config)[1]


def ehl_residual(state: LcpLevelState, config: EhlConfig) -> Field:
    """``r = f1 - L u`` in the scaled form (zero on the boundary)."""
    rhoH, phi = _frozen(state, config)
    lv = state.level
    r = _residual_field(np.ascontiguousarray(state.u.values), rhoH,
                        np.ascontiguousarray(state.eps.values), phi,
                        np.ascontiguousarray(state.rhs_f1.values), lv.hx, lv.hy)
    return Field(lv, r)


def lcp_residual(state: LcpLevelState, r: Field | None = None, config: EhlConfig | None = None):
    """Complementarity residual: ``r`` on inactive points, ``min(r, 0)`` on active ones."""
    if r is None:
        r = ehl_residual(state, config)
    active = state.u.values <= state.lower_f2.values
    return np.where(active, np.minimum(r.values, 0.0), r.values)


def select_splitting(eps_point, hx, hy, threshold=0.6):
    """Line Gauss-Seidel where ``min(eps/hx, eps/hy) > threshold``."""
    ratio = min(eps_point / hx, eps_point / hy)
    return GAUSS_SEIDEL if ratio > threshold else JACOBI_DISTRIBUTED


def jacobi_mask(state: LcpLevelState, config: EhlConfig) -> np.ndarray:
    lv = state.level
    return state.eps.values / max(lv.hx, lv.hy) <= config.switch_threshold


def _line_system(state, j, config, jd, hybrid):
    rhoH, phi = _frozen(state, config)
    lv = state.level
    n = lv.nx - 2
    p = max(2, config.window_radius + 1)
    bands = np.zeros((2 * p + 1, n))
    rhs = np.zeros(n)
    _assemble_line(j, np.ascontiguousarray(state.u.values),
                   np.ascontiguousarray(state.lower_f2.values), rhoH, state.rho,
                   np.ascontiguousarray(state.eps.values), phi,
                   np.ascontiguousarray(state.rhs_f1.values), np.ascontiguousarray(state.table.g),
                   jd, lv.hx, lv.hy, config.window_radius, hybrid == "hs2", bands, rhs)
    return bands, rhs


def line_gs_limited(state: LcpLevelState, j, config: EhlConfig, hybrid=None) -> np.ndarray:
    """Pressure changes on interior points of line ``j`` (not applied)."""
    hybrid = config.hybrid if hybrid is None else hybrid
    if not 1 <= j <= state.level.ny - 2:
        raise ValueError(f"line {j} is not interior")
    jd = np.zeros(state.level.shape, dtype=np.bool_)
    bands, rhs = _line_system(state, j, config, jd, hybrid)
    bad = banded_solve_inplace(bands, rhs)
    if bad >= 0:
        raise SingularLineError(int(bad))
    return rhs


def line_jacobi_distributed(state: LcpLevelState, config: EhlConfig, hybrid=None) -> Field:
    """Distributive Jacobi sweep over all lines.

    Returns the ghost changes ``sigma``; ``state.u`` receives
    ``u + omega_jac (sigma - 1/4 sum of neighbour sigma)``, projected.
    The film thickness is refreshed afterwards.
    """
    hybrid = config.hybrid if hybrid is None else hybrid
    jd = np.ones(state.level.shape, dtype=np.bool_)
    sigma = _sweep(state, config, jd, hybrid)
    refresh(state, config)
    return Field(state.level, sigma)


def _sweep(state, config, jd, hybrid):
    rhoH, phi = _frozen(state, config)
    lv = state.level
    u = np.ascontiguousarray(state.u.values)
    sigma = np.zeros(lv.shape)
    bad = _hybrid_sweep(u, np.ascontiguousarray(state.lower_f2.values), rhoH, state.rho,
                        np.ascontiguousarray(state.eps.values), phi,
                        np.ascontiguousarray(state.rhs_f1.values),
                        np.ascontiguousarray(state.table.g), jd, lv.hx, lv.hy,
                        config.window_radius, hybrid == "hs2",
                        config.omega_gs, config.omega_jac, sigma)
    if bad >= 0:
        raise SingularLineError(int(bad))
    state.u.values = u
    return sigma


def relax(state: LcpLevelState, config: EhlConfig):
    """One hybrid sweep followed by a film refresh."""
    jd = jacobi_mask(state, config)
    _sweep(state, config, jd, config.hybrid)
    refresh(state, config)


def load_integral(state: LcpLevelState) -> float:
    lv = state.level
    return float(lv.hx * lv.hy * state.u.values.sum())


def update_h00(state: LcpLevelState, config: EhlConfig) -> float:
    """``H00 - c (W - hx hy sum u)`` with ``W = 2 pi/3`` on the finest grid
    (coarse grids balance against their FAS-shifted target)."""
    return state.H00 - config.c_h00 * (state.load_target - load_integral(state))


def _centre_value(fld: Field) -> float:
    lv = fld.level
    i = int(np.argmin(np.abs(lv.x)))
    j = int(np.argmin(np.abs(lv.y)))
    return float(fld.values[i, j])


def film_summary(state: LcpLevelState) -> tuple[float, float]:
    """``(H_m, H_c)``: minimum film and film at the origin."""
    return float(state.H.values.min()), _centre_value(state.H)


def _coarse_setup(fine: LcpLevelState, coarse: LcpLevelState, config: EhlConfig, r: np.ndarray):
    uc0 = fine.u.values[::2, ::2].copy()
    coarse.u.values = uc0.copy()
    coarse.H00 = fine.H00
    coarse.lower_f2.values = fine.lower_f2.values[::2, ::2].copy()
    film_target = fine.H.values[::2, ::2]
    coarse.coarse_rhs_film.values = film_target - base_film(coarse.level, coarse.H00) - coarse.film(uc0)
    refresh(coarse, config)
    freeze_limiter(coarse, config)
    coarse.rhs_f1.values = np.zeros(coarse.level.shape)
    lu = -ehl_residual(coarse, config).values
    rr = r.copy()
    rr[fine.u.values <= fine.lower_f2.values] = 0.0
    scale = (coarse.level.hx * coarse.level.hy) / (fine.level.hx * fine.level.hy)
    rc = scale * restrict_full_weighting(Field(fine.level, rr)).values
    rc[0, :] = rc[-1, :] = rc[:, 0] = rc[:, -1] = 0.0
    coarse.rhs_f1.values = rc + lu
    coarse.load_target = fine.load_target + load_integral(coarse) - load_integral(fine)
    return uc0


def coarsest_solve(state: LcpLevelState, config: EhlConfig, balance_load=True):
    """Projected relaxation until the complementarity residual drops below
    ``coarsest_tol`` (or ``coarsest_max_sweeps``); with ``balance_load``
    ``H00`` is also driven to the load target every few sweeps."""
    res = None
    for n in range(config.coarsest_max_sweeps):
        relax(state, config)
        if balance_load and n % H00_EVERY == H00_EVERY - 1:
            state.H00 = update_h00(state, config)
            refresh(state, config)
        res = float(np.abs(lcp_residual(state, config=config)).max())
        miss = abs(state.load_target - load_integral(state))
        load_ok = not balance_load or miss <= 1e-6 * LOAD
        if res <= config.coarsest_tol and load_ok:
            break
    return res


def pfas_cycle(level_states, config: EhlConfig, l, top=None):
    """Projected FAS cycle on ``level_states[l]`` (index 0 is the coarsest)."""
    top = l if top is None else top
    nu1, nu2, kind, _ = config.cycle
    st = level_states[l]
    if l == 0:
        coarsest_solve(st, config, balance_load=config.coarse_load_balance)
    else:
        for _ in range(nu1):
            relax(st, config)
        r = ehl_residual(st, config).values
        coarse = level_states[l - 1]
        uc0 = _coarse_setup(st, coarse, config, r)
        h00_c0 = coarse.H00
        for _ in range(1 if kind == "V" or l - 1 == 0 else 2):
            pfas_cycle(level_states, config, l - 1, top)
        st.H00 += coarse.H00 - h00_c0
        e = Field(coarse.level, coarse.u.values - uc0)
        inactive = st.u.values > st.lower_f2.values
        corr = prolong_values(e.values)
        u = st.u.values + np.where(inactive, corr, 0.0)
        u[0, :] = u[-1, :] = u[:, 0] = u[:, -1] = 0.0
        st.u.values = np.maximum(u, st.lower_f2.values)
        refresh(st, config)
        for _ in range(nu2):
            relax(st, config)
    if l == top or (l > 0 and config.coarse_load_balance):
        st.H00 = update_h00(st, config)
        refresh(st, config)
    return st


def _lcp_norm(state, config):
    lv = state.level
    return float(np.abs(lcp_residual(state, config=config)).max() / (lv.hx * lv.hy))


def solve_level(states, k, config: EhlConfig, report: SolveReport, t0=None):
    """Cycle on level ``k`` until the residual and load balance converge."""
    st = states[k]
    hist = [_lcp_norm(st, config)]
    count = config.cycle[3]
    for it in range(count):
        pfas_cycle(states, config, k)
        res = _lcp_norm(st, config)
        if not math.isfinite(res) or (res > 10 * hist[-1] and res > 10 * config.tol):
            hist.append(res)
            raise EhlDivergenceError(
                f"residual grew from {hist[-2]:.3e} to {res:.3e} on the {st.level.nx}^2 grid "
                f"at cycle {it + 1}", hist)
        hist.append(res)
        if st.phi_frozen is None and config.spec.is_limited and res <= config.freeze_limiter_below:
            freeze_limiter(st, config)
        h_min = float(st.H.values.min())
        if h_min <= 0:
            report.extra.setdefault("nonphysical", []).append((st.level.nx, it + 1, h_min))
        if res <= config.tol and abs(LOAD - load_integral(st)) <= 1e-4 * LOAD:
            break
    return hist


def solve_ehl(config: EhlConfig):
    """Nested iteration from the coarsest grid up; returns ``(state, report)``."""
    t_start = time.perf_counter()
    levels = config.hierarchy.levels
    report = SolveReport()
    states = []
    for lv in levels:
        t = time.perf_counter()
        states.append(make_state(lv, config))
        report.record_time("setup", time.perf_counter() - t)
    first = 0 if config.fmg else len(levels) - 1
    st = states[first]
    st.u.values = hertz_pressure(st.level)
    st.u.set_boundary(0.0)
    st.H00 = config.h00_init
    refresh(st, config)
    solutions = []
    try:
        for k in range(first, len(levels)):
            t = time.perf_counter()
            st = states[k]
            if k > first:
                prev = states[k - 1]
                u = np.maximum(prolong_values(prev.u.values), 0.0)
                u[0, :] = u[-1, :] = u[:, 0] = u[:, -1] = 0.0
                st.u.values = u
                st.H00 = prev.H00
                st.rhs_f1.values = np.zeros(st.level.shape)
                st.lower_f2.values = np.zeros(st.level.shape)
                st.coarse_rhs_film.values = np.zeros(st.level.shape)
                refresh(st, config)
            if k == 0:
                coarsest_solve(st, config, balance_load=True)
                hist = [_lcp_norm(st, config)]
            else:
                hist = solve_level(states, k, config, report)
            report.level_histories.append(hist)
            report.residual_history.extend(hist[1:] if k > first else hist)
            report.level_sizes.append(st.level.nx)
            report.hm_hc.append(film_summary(st))
            report.h00_trace.append(st.H00)
            solutions.append(st.u.copy())
            report.record_time(f"level_{st.level.nx}", time.perf_counter() - t)
            h_min = float(st.H.values.min())
            if h_min <= 0:
                # coarse levels of the nested iteration may under-resolve the
                # constriction; only the finest answer has to be physical
                report.extra.setdefault("nonphysical", []).append(
                    (st.level.nx, len(hist) - 1, h_min))
                if k == len(levels) - 1:
                    raise NonPhysicalStateError(st.level.nx, len(hist) - 1, h_min)
    except EhlDivergenceError as exc:
        report.diverged = True
        report.message = str(exc)
        report.residual_history.extend(exc.history)
        report.record_time("total", time.perf_counter() - t_start)
        raise
    for n, sol in enumerate(solutions):
        report.norms.append(None if n == 0 else error_norms(solutions[n - 1], sol))
    for n in range(2, len(report.norms)):
        a, b = report.norms[n - 1], report.norms[n]
        report.orders.append(tuple(convergence_order(x, y) for x, y in zip(a, b)))
    final = states[-1]
    res = report.level_histories[-1][-1]
    report.converged = res <= config.tol and abs(LOAD - load_integral(final)) <= 1e-4 * LOAD
    report.message = "converged" if report.converged else f"stopped at residual {res:.3e}"
    report.extra.update(solutions=solutions, load=load_integral(final), H00=final.H00)
    report.record_time("total", time.perf_counter() - t_start)
    return final, report
