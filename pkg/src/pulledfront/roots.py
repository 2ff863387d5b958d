"""Simultaneous polynomial root finding (Aberth-Ehrlich) with Newton polish.

Coefficients are given in ascending order, ``a[0] + a[1] z + ... + a[n] z**n``.
"""

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = ["polyroots"]


def _initial_guesses(a):
    n = len(a) - 1
    # radius from the geometric mean of the roots; the offset angle breaks symmetry
    scale = abs(a[0] / a[-1]) ** (1.0 / n) if a[0] != 0 else 1.0
    bound = 1.0 + np.max(np.abs(a[:-1] / a[-1]))
    radius = min(max(scale, 1e-3), bound)
    k = np.arange(n)
    return radius * np.exp(1j * (2.0 * np.pi * k / n + 0.4))


def polyroots(coeffs, tol=1e-15, max_iter=500, polish=3):
    """All roots of a polynomial by Aberth-Ehrlich iteration.

    Parameters
    ----------
    coeffs : array_like
        Ascending coefficients; trailing zeros (leading powers) are dropped and
        exact zero low-order coefficients are returned as exact zero roots.
    tol : float
        Relative correction size at which iteration stops.
    max_iter : int
        Iteration cap for the simultaneous sweep.
    polish : int
        Number of Newton steps applied to each root afterwards.

    Returns
    -------
    ndarray of complex
        Roots, unordered.
    """
    a = np.asarray(coeffs, dtype=complex)
    nz = np.flatnonzero(a)
    if nz.size == 0:
        raise ValueError("zero polynomial")
    a = a[: nz[-1] + 1]
    n_zero = nz[0]
    a = a[n_zero:]
    zeros = np.zeros(n_zero, dtype=complex)
    n = len(a) - 1
    if n == 0:
        return zeros
    if n == 1:
        return np.concatenate([zeros, [-a[0] / a[1]]])

    da = npoly.polyder(a)
    z = _initial_guesses(a)
    for _ in range(max_iter):
        p = npoly.polyval(z, a)
        dp = npoly.polyval(z, da)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            s = np.sum(1.0 / diff, axis=1) - 1.0
            step = w / (1.0 - w * s)
        step[~np.isfinite(step)] = 0.0
        z = z - step
        if np.all(np.abs(step) <= tol * np.maximum(np.abs(z), 1e-300)):
            break

    for _ in range(polish):
        p = npoly.polyval(z, a)
        dp = npoly.polyval(z, da)
        ok = np.abs(dp) > 0
        z_new = z.copy()
        z_new[ok] = z[ok] - p[ok] / dp[ok]
        # accept a Newton step only when it lowers the residual
        better = np.abs(npoly.polyval(z_new, a)) <= np.abs(p)
        z = np.where(better, z_new, z)
    return np.concatenate([zeros, z])
