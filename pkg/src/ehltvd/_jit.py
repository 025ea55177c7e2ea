"""Compiled inner loops shared by the solvers.

Everything here works on plain arrays; the public wrappers live in the
modules that own the corresponding operations.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def banded_solve_inplace(bands, rhs):
    """Gaussian elimination without pivoting on a square band system.

    ``bands[k, i]`` is the coefficient of ``x[i + k - p]`` in row ``i`` with
    ``p = (bands.shape[0] - 1) // 2``.  Both arrays are overwritten; the
    solution is left in ``rhs``.  Returns the index of the first zero pivot,
    or -1 on success.
    """
    nb, n = bands.shape
    p = (nb - 1) // 2
    for i in range(n):
        piv = bands[p, i]
        if piv == 0:
            return i
        for r in range(i + 1, min(n, i + p + 1)):
            a = bands[p - (r - i), r]
            if a == 0:
                continue
            f = a / piv
            for c in range(i, min(n, i + p + 1)):
                bands[c - r + p, r] -= f * bands[c - i + p, i]
            rhs[r] -= f * rhs[i]
    for i in range(n - 1, -1, -1):
        s = rhs[i]
        for c in range(i + 1, min(n, i + p + 1)):
            s -= bands[c - i + p, i] * rhs[c]
        rhs[i] = s / bands[p, i]
    return -1


@njit(cache=True)
def direct_convolution(kernel, u):
    """Dense sum ``w[i, j] = sum u[k, l] * kernel[|i-k|, |j-l|]``.

    O(n^2) per target point; serves as the reference for the fast path.
    """
    nx, ny = u.shape
    w = np.zeros((nx, ny))
    for k in range(nx):
        for l in range(ny):
            ukl = u[k, l]
            if ukl == 0.0:
                continue
            for i in range(nx):
                di = abs(i - k)
                for j in range(ny):
                    w[i, j] += ukl * kernel[di, abs(j - l)]
    return w


@njit(cache=True)
def signed_convolution(kernel, u, cx, cy):
    """``w[i, j] = sum u[k, l] * kernel[i - k + cx, j - l + cy]`` over the
    support of ``kernel`` (a dense, not necessarily symmetric, window)."""
    nx, ny = u.shape
    kx, ky = kernel.shape
    w = np.zeros((nx, ny))
    for i in range(nx):
        for j in range(ny):
            s = 0.0
            for a in range(kx):
                k = i - (a - cx)
                if k < 0 or k >= nx:
                    continue
                for b in range(ky):
                    l = j - (b - cy)
                    if l < 0 or l >= ny:
                        continue
                    s += kernel[a, b] * u[k, l]
            w[i, j] = s
    return w
