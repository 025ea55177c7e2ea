"""Local Fourier analysis of the x-line splittings of the kappa-scheme.

Symbols are written in terms of ``alpha1 = eps/h^2`` and ``beta = a/h``.
For a splitting ``L = L+ + L-`` (``L+`` acting on new values: the line
matrix plus the already relaxed line ``j-1``) the smoothing symbol is
``S(theta) = -L-(theta) / L+(theta)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

SPLITTINGS = ("Ls0", "Ls1", "Ls2")


@dataclass(frozen=True)
class FourierSample:
    theta1: float
    theta2: float
    value: complex

    def __post_init__(self):
        if abs(self.theta1) > np.pi + 1e-12 or abs(self.theta2) > np.pi + 1e-12:
            raise ValueError("frequencies must lie in [-pi, pi]")


@dataclass
class SymbolReport:
    mu: float
    rho_2g: float | None = None
    theta1: np.ndarray = None
    theta2: np.ndarray = None
    values: np.ndarray = None
    argmax: tuple = None
    skipped: int = 0
    extra: dict = field(default_factory=dict)

    def samples(self):
        return [FourierSample(float(a), float(b), complex(v))
                for a, b, v in zip(self.theta1.ravel(), self.theta2.ravel(), self.values.ravel())]


def stencil_symbol(stencil: dict, theta1, theta2):
    """``sum c * exp(i (dx theta1 + dy theta2))`` over ``{(dx, dy): c}``."""
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    out = np.zeros(np.broadcast(t1, t2).shape, dtype=complex)
    for (dx, dy), c in stencil.items():
        out += c * np.exp(1j * (dx * t1 + dy * t2))
    return out


def convection_coefficient(kind, kappa):
    return {"Ls0": (5 - 3 * kappa) / 4, "Ls1": (2 - kappa) / 2, "Ls2": 1.0}[kind]


def kappa_stencils(alpha1, beta, kappa, kind="Ls0"):
    """``(L, L+)`` stencils of the kappa operator and a line splitting."""
    if kind not in SPLITTINGS:
        raise ValueError(f"LFA splitting must be one of {SPLITTINGS}, got {kind!r}")
    full = {(-2, 0): beta * (1 - kappa) / 4,
            (-1, 0): beta * (-5 + 3 * kappa) / 4 - alpha1,
            (0, 0): beta * (3 - 3 * kappa) / 4 + 4 * alpha1,
            (1, 0): beta * (1 + kappa) / 4 - alpha1,
            (0, -1): -alpha1, (0, 1): -alpha1}
    c = beta * convection_coefficient(kind, kappa)
    plus = {(-1, 0): -c - alpha1, (0, 0): c + 4 * alpha1, (1, 0): -alpha1, (0, -1): -alpha1}
    return full, plus


def splitting_symbol(alpha1, beta, kappa, theta1, theta2, kind="Ls0"):
    """``-L-/L+`` from the stencil decomposition."""
    full, plus = kappa_stencils(alpha1, beta, kappa, kind)
    lp = stencil_symbol(plus, theta1, theta2)
    lm = stencil_symbol(full, theta1, theta2) - lp
    with np.errstate(divide="ignore", invalid="ignore"):
        return -lm / lp


def kappa_symbol_closed_form(alpha1, beta, kappa, theta1, theta2, printed=False):
    """Closed-form Ls0 smoothing symbol.

    ``printed=True`` reproduces the published expression, whose two
    convection terms in the numerator carry the opposite sign to ``-L-``.
    """
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    c = 1.25 - 0.75 * kappa
    s = 1.0 if printed else -1.0
    num = (alpha1 * np.exp(1j * t2)
           + s * 0.25 * beta * (1 + kappa) * (np.exp(1j * t1) - 1)
           - s * 0.25 * beta * (1 - kappa) * (1 - np.exp(-2j * t1)))
    den = ((-alpha1 - beta * c) * np.exp(-1j * t1) + 4 * alpha1 + beta * c
           - alpha1 * (np.exp(1j * t1) + np.exp(-1j * t2)))
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def theta_grid(n):
    """``n`` points per axis on (-pi, pi], closed at +pi."""
    t = -np.pi + 2 * np.pi * np.arange(1, n + 1) / n
    return np.meshgrid(t, t, indexing="ij")


def high_mask(t1, t2):
    """Complement of (-pi/2, pi/2]^2."""
    low = (t1 > -np.pi / 2) & (t1 <= np.pi / 2) & (t2 > -np.pi / 2) & (t2 <= np.pi / 2)
    return ~low


def smoothing_factor(symbol: Callable, n_samples=128) -> SymbolReport:
    t1, t2 = theta_grid(n_samples)
    vals = symbol(t1, t2)
    mag = np.abs(vals)
    hm = high_mask(t1, t2)
    ok = hm & np.isfinite(mag)
    skipped = int(np.sum(hm & ~np.isfinite(mag)))
    if not ok.any():
        raise ValueError("no valid high-frequency samples")
    masked = np.where(ok, mag, -np.inf)
    k = np.unravel_index(np.argmax(masked), mag.shape)
    return SymbolReport(mu=float(mag[k]), theta1=t1, theta2=t2, values=vals,
                        argmax=(float(t1[k]), float(t2[k])), skipped=skipped)


def smoothing_factor_kappa(alpha1, beta, kappa, n_samples=128, kind="Ls0",
                           variant="stencil") -> SymbolReport:
    """Smoothing factor of an x-line kappa splitting.

    ``variant``: ``"stencil"`` (decomposition of the assembled stencils),
    ``"closed"`` (closed form, Ls0 only) or ``"printed"`` (published closed
    form, Ls0 only).
    """
    if not (alpha1 > 0 or beta > 0):
        raise ValueError("need alpha1 > 0 or beta > 0")
    if variant == "stencil":
        fn = lambda a, b: splitting_symbol(alpha1, beta, kappa, a, b, kind)
    elif variant in ("closed", "printed"):
        if kind != "Ls0":
            raise ValueError("closed-form symbol exists for Ls0 only")
        fn = lambda a, b: kappa_symbol_closed_form(alpha1, beta, kappa, a, b, variant == "printed")
    else:
        raise ValueError(f"unknown variant {variant!r}")
    rep = smoothing_factor(fn, n_samples)
    rep.extra.update(alpha1=alpha1, beta=beta, kappa=kappa, kind=kind, variant=variant)
    return rep


def on_high_boundary(t1, t2, n_samples, tol=None):
    """Whether ``(t1, t2)`` lies on the boundary of the sampled high set."""
    tol = 2 * np.pi / n_samples * 0.5 + 1e-12 if tol is None else tol
    m = max(abs(t1), abs(t2))
    return abs(m - np.pi / 2) <= tol + np.pi / n_samples or abs(m - np.pi) <= tol


# ----------------------------------------------------------------------------
# two-grid analysis

def fw_symbol(t1, t2):
    return 0.25 * (1 + np.cos(t1)) * (1 + np.cos(t2))


def bilinear_symbol(t1, t2):
    return 0.25 * (1 + np.cos(t1)) * (1 + np.cos(t2))


@dataclass
class TwoGridSymbols:
    """Callables of ``(theta1, theta2)``; ``L2h`` is evaluated at ``2 theta``."""

    Lh: Callable
    L2h: Callable
    S: Callable
    R: Callable = fw_symbol
    P: Callable = bilinear_symbol


def two_grid_radius(symbols: TwoGridSymbols, nu1=2, nu2=1, n_samples=64) -> SymbolReport:
    """``sup rho(S^nu2 (I - P L2h^-1 R Lh) S^nu1)`` over low frequencies.

    ``n_samples`` points per axis on (-pi/2, pi/2]; samples where the coarse
    symbol vanishes are skipped.  The partner of a zero frequency is ``+pi``.
    The 4x4 blocks are small, so their spectral radius is taken from a
    direct eigenvalue solve.
    """
    t = -np.pi / 2 + np.pi * np.arange(1, n_samples + 1) / n_samples
    t1, t2 = np.meshgrid(t, t, indexing="ij")
    t1 = t1.ravel()
    t2 = t2.ravel()
    harm = []
    for a1 in (0, 1):
        for a2 in (0, 1):
            h1 = t1 - a1 * np.where(t1 > 0, np.pi, -np.pi)
            h2 = t2 - a2 * np.where(t2 > 0, np.pi, -np.pi)
            harm.append((h1, h2))
    Lh = np.stack([symbols.Lh(a, b) for a, b in harm], axis=1)
    S = np.stack([symbols.S(a, b) for a, b in harm], axis=1)
    R = np.stack([symbols.R(a, b) for a, b in harm], axis=1)
    P = np.stack([symbols.P(a, b) for a, b in harm], axis=1)
    L2 = symbols.L2h(2 * t1, 2 * t2)
    scale = np.max(np.abs(Lh)) if np.size(Lh) else 1.0
    ok = np.abs(L2) > 1e-12 * scale
    n = t1.size
    eye = np.eye(4)[None, :, :]
    C = eye - (P[:, :, None] * (R * Lh)[:, None, :]) / np.where(ok, L2, 1.0)[:, None, None]
    Sd1 = np.stack([np.diag(s) for s in S ** nu1]) if nu1 else np.broadcast_to(eye, (n, 4, 4))
    Sd2 = np.stack([np.diag(s) for s in S ** nu2]) if nu2 else np.broadcast_to(eye, (n, 4, 4))
    M = Sd2 @ C @ Sd1
    rho = np.max(np.abs(np.linalg.eigvals(M)), axis=1)
    rho = np.where(ok, rho, -np.inf)
    k = int(np.argmax(rho))
    rep = SymbolReport(mu=float(np.nan), rho_2g=float(rho[k]), theta1=t1.reshape(n_samples, -1),
                       theta2=t2.reshape(n_samples, -1), values=rho.reshape(n_samples, -1),
                       argmax=(float(t1[k]), float(t2[k])), skipped=int(np.sum(~ok)))
    rep.extra["flag_nonconvergent"] = bool(rep.rho_2g >= 1.0)
    return rep


def kappa_two_grid(alpha1, beta, kappa, kind="Ls0", nu1=2, nu2=1, n_samples=64) -> SymbolReport:
    """Two-grid radius for the kappa operator re-discretised on ``2h``."""
    full_h, _ = kappa_stencils(alpha1, beta, kappa, kind)
    full_2h, _ = kappa_stencils(alpha1 / 4, beta / 2, kappa, kind)
    syms = TwoGridSymbols(
        Lh=lambda a, b: stencil_symbol(full_h, a, b),
        L2h=lambda a, b: stencil_symbol(full_2h, a, b),
        S=lambda a, b: splitting_symbol(alpha1, beta, kappa, a, b, kind))
    rep = two_grid_radius(syms, nu1, nu2, n_samples)
    sm = smoothing_factor_kappa(alpha1, beta, kappa, 2 * n_samples, kind)
    rep.mu = sm.mu
    return rep


def poisson_line_gs_two_grid(nu1=1, nu2=1, n_samples=64) -> SymbolReport:
    """Reference: 5-point Laplacian, x-line lexicographic GS, FW, bilinear."""
    lap = {(0, 0): 4.0, (-1, 0): -1.0, (1, 0): -1.0, (0, -1): -1.0, (0, 1): -1.0}
    lap2 = {k: v / 4 for k, v in lap.items()}
    plus = {(0, 0): 4.0, (-1, 0): -1.0, (1, 0): -1.0, (0, -1): -1.0}
    minus = {(0, 1): -1.0}
    syms = TwoGridSymbols(
        Lh=lambda a, b: stencil_symbol(lap, a, b),
        L2h=lambda a, b: stencil_symbol(lap2, a, b),
        S=lambda a, b: -stencil_symbol(minus, a, b) / stencil_symbol(plus, a, b))
    return two_grid_radius(syms, nu1, nu2, n_samples)


# ----------------------------------------------------------------------------
# measured smoothing on a doubly periodic grid

def periodic_line_sweep(e, full: dict, plus_line: dict):
    """One lexicographic x-line GS sweep for the error equation ``L e = 0``.

    ``e`` is complex ``(n, n)``, periodic in both directions.  ``plus_line``
    holds the in-line part of the splitting (offsets ``(dx, 0)``); the
    line system is circulant and is solved with an FFT along x.
    """
    e = np.array(e, dtype=complex)
    n1, n2 = e.shape
    k = np.arange(n1)
    diag = np.zeros(n1, dtype=complex)
    for (dx, dy), c in plus_line.items():
        if dy:
            raise ValueError("line part must only couple along x")
        diag += c * np.exp(2j * np.pi * k * dx / n1)
    for j in range(n2):
        res = np.zeros(n1, dtype=complex)
        for (dx, dy), c in full.items():
            res -= c * np.roll(e[:, (j + dy) % n2], -dx)
        sigma = np.fft.ifft(np.fft.fft(res) / diag)
        e[:, j] += sigma
    return e


def measured_smoothing(alpha1, beta, kappa, kind, seed_frequency, n=64, discard=None):
    """Amplitude ratio of a seeded Fourier error after one sweep.

    The error ``exp(i (theta1 i + theta2 j))`` (frequencies snapped to the
    periodic grid) is relaxed once; the ratio is measured on the lines
    ``j >= discard`` where the wrap-around of the first line has died out.
    """
    t1, t2 = seed_frequency
    k1 = int(round(t1 * n / (2 * np.pi)))
    k2 = int(round(t2 * n / (2 * np.pi)))
    t1, t2 = 2 * np.pi * k1 / n, 2 * np.pi * k2 / n
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    e0 = np.exp(1j * (t1 * I + t2 * J))
    full, plus = kappa_stencils(alpha1, beta, kappa, kind)
    line = {k: v for k, v in plus.items() if k[1] == 0}
    e1 = periodic_line_sweep(e0, full, line)
    discard = n // 2 if discard is None else discard
    num = np.vdot(e0[:, discard:], e1[:, discard:])
    ratio = abs(num) / np.vdot(e0[:, discard:], e0[:, discard:]).real
    return float(ratio), (t1, t2)
