"""Flux limiters, smoothness ratios, kappa-scheme face values and TVD checks.

Every scheme is written in limiter form: for ``a > 0`` the face value is

    F_{i+1/2} = u_i + phi(r_i) / 2 * (u_i - u_{i-1}),
    r_i = (u_{i+1} - u_i) / (u_i - u_{i-1}).

The unlimited kappa-scheme corresponds to the linear function
``phi(r) = (1 + kappa)/2 r + (1 - kappa)/2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("kappa_fixed", "minmod", "vanleer", "vanalbada", "superbee", "koren")
LIMITED_KINDS = KINDS[1:]
RATIO_EPS = 1e-14


@dataclass(frozen=True)
class LimiterSpec:
    kind: str = "vanleer"
    kappa: float = 1.0 / 3.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown limiter kind {self.kind!r}; expected one of {KINDS}")
        if not -1.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [-1, 1], got {self.kappa}")

    @classmethod
    def parse(cls, text: str, kappa=None) -> "LimiterSpec":
        """``"minmod"``, ``"kappa_fixed"`` (with ``kappa``) or ``"kappa_fixed(0.5)"``."""
        t = text.strip().lower()
        if t.startswith("kappa_fixed(") and t.endswith(")"):
            return cls("kappa_fixed", float(t[len("kappa_fixed("):-1]))
        if t == "kappa_fixed":
            return cls("kappa_fixed", 1.0 / 3.0 if kappa is None else float(kappa))
        return cls(t, 1.0 / 3.0 if kappa is None else float(kappa))

    @property
    def is_limited(self) -> bool:
        return self.kind != "kappa_fixed"

    def __str__(self):
        return f"kappa_fixed({self.kappa:g})" if self.kind == "kappa_fixed" else self.kind


def regularized_ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    s = np.where(den >= 0, 1.0, -1.0)
    return num / (den + s * RATIO_EPS)


def ratio_r(u_mm, u_m, u_0, u_p):
    """Smoothness ratios around point 0.

    Returns ``(r_minus_half, r_three_half)`` with
    ``r_minus_half = (u_p - u_0)/(u_0 - u_m)`` (ratio at point 0) and
    ``r_three_half = (u_0 - u_m)/(u_m - u_mm)`` (ratio at point m).
    """
    return regularized_ratio(np.subtract(u_p, u_0), np.subtract(u_0, u_m)), \
        regularized_ratio(np.subtract(u_0, u_m), np.subtract(u_m, u_mm))


def limiter_phi(spec: LimiterSpec, r):
    r = np.asarray(r, dtype=float)
    k = spec.kind
    if k == "kappa_fixed":
        out = 0.5 * (1.0 + spec.kappa) * r + 0.5 * (1.0 - spec.kappa)
    elif k == "minmod":
        out = np.maximum(0.0, np.minimum(r, 1.0))
    elif k == "vanleer":
        out = (r + np.abs(r)) / (1.0 + np.abs(r))
    elif k == "vanalbada":
        out = np.where(r > 0, (r * r + r) / (r * r + 1.0), 0.0)
    elif k == "superbee":
        out = np.maximum.reduce([np.zeros_like(r), np.minimum(2.0 * r, 1.0), np.minimum(r, 2.0)])
    else:  # koren
        out = np.maximum(0.0, np.minimum.reduce([2.0 * r, (1.0 + 2.0 * r) / 3.0, np.full_like(r, 2.0)]))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FluxIncrements:
    """Pieces of ``h (a u)_x`` at point 0 for ``a = 1``.

    ``first_order = u_0 - u_m``; the second-order face corrections are
    ``plus = phi(r_0)/2 (u_0 - u_m)`` on face 0+1/2 and
    ``minus = phi(r_m)/2 (u_m - u_mm)`` on face 0-1/2.
    """

    first_order: float
    plus: float
    minus: float
    phi_0: float
    phi_m: float

    @property
    def total(self):
        return self.first_order + self.plus - self.minus


def kappa_flux_1d(u_mm, u_m, u_0, u_p, spec: LimiterSpec) -> FluxIncrements:
    r0, rm = ratio_r(u_mm, u_m, u_0, u_p)
    p0, pm = limiter_phi(spec, r0), limiter_phi(spec, rm)
    return FluxIncrements(u_0 - u_m, 0.5 * p0 * (u_0 - u_m), 0.5 * pm * (u_m - u_mm), p0, pm)


def kappa_stencil(kappa):
    """Coefficients of ``(u_{i-2}, u_{i-1}, u_i, u_{i+1})`` in the unlimited
    scheme's ``h (u)_x``."""
    return np.array([(1 - kappa) / 4, (-5 + 3 * kappa) / 4, (3 - 3 * kappa) / 4, (1 + kappa) / 4])


def harten_tvd_check(c, d) -> bool:
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    if c.shape != d.shape:
        raise ValueError("c and d must have equal length")
    return bool(np.all(c >= 0) and np.all(d >= 0) and np.all(c + d <= 1.0))


def total_variation(u) -> float:
    return float(np.sum(np.abs(np.diff(np.asarray(u, dtype=float)))))


def limited_faces(u, spec: LimiterSpec):
    """Face values ``F_{i+1/2}`` for ``i = 1 .. n-2`` (needs ``u[i-1], u[i+1]``)."""
    u = np.asarray(u, dtype=float)
    dm = u[1:-1] - u[:-2]
    r = regularized_ratio(u[2:] - u[1:-1], dm)
    return u[1:-1] + 0.5 * limiter_phi(spec, r) * dm


def advect_step(u, spec: LimiterSpec, cfl=0.5):
    """One forward-Euler step of ``u_t + u_x = 0``; constant inflow, outflow
    by extrapolation."""
    u = np.asarray(u, dtype=float)
    ext = np.concatenate(([u[0], u[0]], u, [u[-1]]))
    faces = limited_faces(ext, spec)  # faces right of ext[1..n]
    return u - cfl * (faces[1:] - faces[:-1])


def advect_tv_history(u0, spec: LimiterSpec, steps=100, cfl=0.5):
    """TV after each step, starting with ``TV(u0)``."""
    u = np.asarray(u0, dtype=float)
    tv = [total_variation(u)]
    for _ in range(steps):
        u = advect_step(u, spec, cfl)
        tv.append(total_variation(u))
    return np.array(tv), u
