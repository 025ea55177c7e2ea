"""Lubricant closures and the Moes-parameter resolution.

Only ``lam``, ``pH``, ``alpha``, ``z`` and ``p0`` enter the dimensionless
problem.  The physical gauge (E', R, eta0) is carried along so that the
Moes numbers can be recovered from the resolved fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

DEFAULT_GAUGE = {"e_prime": 2.26e11, "radius": 0.0127, "eta0": 0.04}
Z_DEFAULT = 0.68
P0_DEFAULT = 1.98e8
RHO_A = 0.59e9
RHO_B = 1.34


class InvalidStateError(ValueError):
    """Non-physical iterate (e.g. non-positive film thickness)."""


@dataclass(frozen=True)
class PhysicsParams:
    alpha: float
    pH: float
    lam: float
    moes_m: float
    moes_l: float
    eta0: float
    e_prime: float
    radius: float
    us: float
    a: float
    load: float
    z: float = Z_DEFAULT
    p0: float = P0_DEFAULT

    def __post_init__(self):
        for name in ("alpha", "pH", "lam", "moes_m", "moes_l", "eta0", "e_prime",
                     "radius", "us", "a", "load", "z", "p0"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"PhysicsParams.{name} must be positive and finite, got {v}")

    def moes_numbers(self) -> tuple[float, float]:
        """Recompute (M, L) from the physical fields."""
        two_u = self.eta0 * self.us / (self.e_prime * self.radius)
        w = self.load / (self.e_prime * self.radius ** 2)
        return w * two_u ** -0.75, self.alpha * self.e_prime * two_u ** 0.25

    def with_(self, **kw) -> "PhysicsParams":
        return replace(self, **kw)


def resolve_moes(M, L, alpha=1.7e-8, defaults=None, z=Z_DEFAULT, p0=P0_DEFAULT) -> PhysicsParams:
    """Physical operating point for circular-contact Moes numbers (M, L).

    Uses ``M = W (2U)^(-3/4)``, ``L = G (2U)^(1/4)`` with ``W = F/(E' R^2)``,
    ``2U = eta0 us / (E' R)`` and ``G = alpha E'``.
    """
    if not (M > 0 and L > 0 and alpha > 0):
        raise ValueError(f"M, L and alpha must be positive, got {M}, {L}, {alpha}")
    g = dict(DEFAULT_GAUGE)
    if defaults:
        g.update(defaults)
    e, r, eta0 = g["e_prime"], g["radius"], g["eta0"]
    if min(e, r, eta0) <= 0:
        raise ValueError("gauge values E', R, eta0 must be positive")
    G = alpha * e
    two_u = (L / G) ** 4
    W = M * two_u ** 0.75
    F = W * e * r * r
    a = (3.0 * F * r / (2.0 * e)) ** (1.0 / 3.0)
    pH = 3.0 * F / (2.0 * math.pi * a * a)
    us = two_u * e * r / eta0
    lam = 6.0 * eta0 * us * r * r / (a ** 3 * pH)
    return PhysicsParams(alpha=alpha, pH=pH, lam=lam, moes_m=M, moes_l=L, eta0=eta0,
                         e_prime=e, radius=r, us=us, a=a, load=F, z=z, p0=p0)


def viscosity(u, params: PhysicsParams):
    """Dimensionless Roelands viscosity eta(u), eta(0) = 1."""
    base = 1.0 + np.asarray(u, dtype=float) * (params.pH / params.p0)
    if np.any(base <= 0):
        raise ValueError("viscosity undefined for 1 + u pH/p0 <= 0")
    return np.exp((params.alpha * params.p0 / params.z) * (-1.0 + base ** params.z))


def density(u, params: PhysicsParams):
    """Dowson-Higginson density ratio, 1 at u = 0 and below 1.34."""
    p = np.asarray(u, dtype=float) * params.pH
    return (RHO_A + RHO_B * p) / (RHO_A + p)


def epsilon_coef(u, H, params: PhysicsParams):
    """Pointwise eps = rho H^3 / (eta lam)."""
    H = np.asarray(H, dtype=float)
    if np.any(H <= 0):
        raise InvalidStateError("film thickness must be positive to form eps")
    return density(u, params) * H ** 3 / (viscosity(u, params) * params.lam)


def face_average(eps, axis=0):
    """Arithmetic-mean face values between neighbours along ``axis``."""
    eps = np.asarray(eps)
    lo = [slice(None)] * eps.ndim
    hi = [slice(None)] * eps.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (eps[tuple(lo)] + eps[tuple(hi)])
