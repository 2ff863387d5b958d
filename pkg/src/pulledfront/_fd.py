"""Finite-difference stencils and banded operators shared by front and operator."""

from math import comb

import numpy as np
import scipy.sparse as sp

from .weights import sigma

ACCURACY = 4


def fornberg_weights(z, offsets, k):
    """Weights for the ``k``-th derivative at ``z`` from nodes ``offsets`` (Fornberg 1988)."""
    x = np.asarray(offsets, dtype=float)
    n = x.size
    c = np.zeros((n, k + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, k)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for s in range(mn, 0, -1):
                    c[i, s] = c1 * (s * c[i - 1, s - 1] - c5 * c[i - 1, s]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for s in range(mn, 0, -1):
                c[j, s] = (c4 * c[j, s] - s * c[j, s - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, k]


def centered_width(k):
    return 2 * ((k + 1) // 2) - 1 + ACCURACY


def derivative_coo(n, h, k):
    """COO triplets of a ``k``-th derivative matrix, 4th order everywhere.

    Interior rows use the centered stencil; the outer rows use a one-sided
    window one point wider so the order is kept.
    """
    w = centered_width(k)
    hw = (w - 1) // 2
    wc = fornberg_weights(0, np.arange(-hw, hw + 1), k) / h ** k
    rows, cols, vals = [], [], []
    inner = np.arange(hw, n - hw)
    for j, off in enumerate(range(-hw, hw + 1)):
        rows.append(inner)
        cols.append(inner + off)
        vals.append(np.full(inner.size, wc[j]))
    wb = w + 1
    for i in list(range(hw)) + list(range(n - hw, n)):
        start = min(max(i - hw, 0), n - wb)
        nodes = np.arange(start, start + wb)
        rows.append(np.full(wb, i))
        cols.append(nodes)
        vals.append(fornberg_weights(i, nodes, k) / h ** k)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


class Grid:
    """Uniform grid on ``[-L, L]`` with ``n`` nodes."""

    def __init__(self, L, n):
        if n < 16:
            raise ValueError("grid needs at least 16 nodes")
        self.L = float(L)
        self.n = int(n)
        self.x = np.linspace(-self.L, self.L, self.n)
        self.h = self.x[1] - self.x[0]

    def __eq__(self, other):
        return isinstance(other, Grid) and self.n == other.n and self.L == other.L

    def __hash__(self):
        return hash((self.L, self.n))


def shifted_coefficients(coeffs, eta):
    """Coefficients of ``sum a_j (d - eta)^j`` as a polynomial in ``d``."""
    a = np.asarray(coeffs, dtype=float)
    n = a.size - 1
    return np.array([sum(a[j] * comb(j, k) * (-eta) ** (j - k) for j in range(k, n + 1))
                     for k in range(n + 1)])


def _plain_sum(grid, coeffs):
    R, C, V = [], [], []
    for k, a in enumerate(coeffs):
        if k == 0 or a == 0:
            continue
        r, c, v = derivative_coo(grid.n, grid.h, k)
        R.append(r)
        C.append(c)
        V.append(a * v)
    return R, C, V


def conjugated_operator(grid, coeffs, eta, diag=None):
    """Sparse ``sum_k coeffs[k] * omega d^k omega^{-1} + diag``.

    In the blend region the conjugation is applied entrywise,
    ``D[i, j] * exp(eta (sigma_i - sigma_j))``, so no exponential weight is
    formed as a number. Rows whose stencil lies in ``x >= 1`` use the
    binomially shifted coefficients instead; the stencils are exact on
    linear functions, so the discrete far-field symbol keeps its double
    root exactly where the continuous one has it.
    """
    n, h = grid.n, grid.h
    s = sigma(grid.x)
    R, C, V = _plain_sum(grid, coeffs)
    for i in range(len(R)):
        V[i] = V[i] * np.exp(eta * (s[R[i]] - s[C[i]]))
    shifted = shifted_coefficients(coeffs, eta)
    R2, C2, V2 = _plain_sum(grid, shifted)
    reach = (centered_width(len(coeffs) - 1) + 1) * h
    right = grid.x - reach >= 1.0
    keep = [~right[r] for r in R]
    keep2 = [right[r] for r in R2]
    rows = np.concatenate([r[k] for r, k in zip(R, keep)] + [r[k] for r, k in zip(R2, keep2)])
    cols = np.concatenate([c[k] for c, k in zip(C, keep)] + [c[k] for c, k in zip(C2, keep2)])
    vals = np.concatenate([v[k] for v, k in zip(V, keep)] + [v[k] for v, k in zip(V2, keep2)])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    d = np.where(right, shifted[0], float(coeffs[0])) if len(coeffs) else np.zeros(n)
    if diag is not None:
        d = d + diag
    return (A + sp.diags(d)).tocsr()


def boundary_derivative_rows(grid, side, order):
    """One-sided stencils for derivatives ``0..order`` at an end node.

    Returns ``(cols, W)`` with ``W[j]`` the weights of the ``j``-th derivative.
    """
    n, h = grid.n, grid.h
    width = order + 1 + ACCURACY
    if side == "left":
        cols = np.arange(width)
        z = 0
    else:
        cols = np.arange(n - width, n)
        z = n - 1
    W = np.array([fornberg_weights(z, cols, j) / h ** j for j in range(order + 1)])
    return cols, W


def interpolation_row(grid, x0, points=4):
    """Lagrange weights reproducing ``u(x0)`` from the nearest ``points`` nodes."""
    i = int(np.clip(np.searchsorted(grid.x, x0) - points // 2, 0, grid.n - points))
    cols = np.arange(i, i + points)
    return cols, fornberg_weights(x0, grid.x[cols], 0)


def left_null_rows(M, excluded, tol=1e-9):
    """Rows ``l`` with ``l (M - nu I) = 0`` for each excluded eigenvalue ``nu``.

    Imposing ``l . U = 0`` on the jet ``U = (u, u', ...)`` removes the modes
    ``exp(nu x)``. A repeated eigenvalue contributes one row, which removes
    the top of its Jordan chain only.
    """
    n = M.shape[0]
    rows = []
    seen = []
    for nu in excluded:
        if any(abs(nu - s) <= tol * max(1.0, abs(nu)) for s in seen):
            continue
        seen.append(nu)
        _, _, vh = np.linalg.svd((M - nu * np.eye(n)).T)
        rows.append(np.conj(vh[-1]))
    return np.array(rows).reshape(len(rows), n)


def companion(coeffs):
    """Companion matrix of ``sum coeffs[k] nu^k`` for the jet ``(u, ..., u^{(N-1)})``."""
    a = np.asarray(coeffs, dtype=complex)
    N = a.size - 1
    M = np.zeros((N, N), dtype=complex)
    M[np.arange(N - 1), np.arange(1, N)] = 1.0
    M[-1, :] = -a[:-1] / a[-1]
    return M


def jet_rows(grid, side, L_rows):
    """Sparse rows ``L_rows @ (jet of u at the end node)``."""
    order = L_rows.shape[1] - 1
    cols, W = boundary_derivative_rows(grid, side, order)
    vals = L_rows @ W
    k = L_rows.shape[0]
    return sp.csr_matrix((vals.ravel(), (np.repeat(np.arange(k), cols.size),
                                         np.tile(cols, k))), shape=(k, grid.n))
