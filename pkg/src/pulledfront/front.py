"""Critical front, its tail diagnostics and the linearly growing kernel element.

The traveling-wave equation ``P(d) q + c q' + f(q) = 0`` is solved for the
weighted profile ``w = omega q``. On the right ``w ~ a + b x``, so the tail is
resolved to relative accuracy and the Newton Jacobian is exactly the
discretized weighted linearization.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline
from scipy.special import log_expit

from . import _fd
from .errors import NoConvergence, NonMonotoneWarning, WindowUnderflow, GapFails, GridMismatch
from .kernel import shift_symbol, spatial_roots
from .model import ScalarModel, find_spreading_speed
from .weights import sigma

__all__ = ["FrontProfile", "PsiProfile", "solve_front", "front_decay_fit",
           "gap_condition", "compute_psi"]


@dataclass
class FrontProfile:
    """Front on a uniform grid; ``w`` is the weighted profile ``omega q``."""

    grid: _fd.Grid
    w: np.ndarray
    c_star: float
    eta_star: float
    residual: float
    iterations: int
    monotone: bool
    phase: float = 0.0
    derivatives: dict = field(default_factory=dict)

    @property
    def x(self):
        return self.grid.x

    @property
    def q(self):
        return self.w * np.exp(-self.eta_star * sigma(self.x))

    @property
    def dq(self):
        return self.derivatives.get(1)

    def shifted(self, delta):
        """``q(x - delta)`` by cubic-spline interpolation of ``log q``, on the same grid."""
        spline = CubicSpline(self.x, np.log(np.maximum(self.q, 1e-300)))
        return np.exp(spline(np.clip(self.x - delta, self.x[0], self.x[-1])))


def _nonlinear(model, w, logw_weight):
    """``omega f(omega^{-1} w)`` and its derivative in ``w``."""
    f = model.f
    val = np.zeros_like(w)
    der = np.zeros_like(w)
    # omega^{1-j} w^j = w q^{j-1}
    q = w * np.exp(-logw_weight)
    qp = np.ones_like(w)
    for j in range(1, len(f)):
        val += f[j] * w * qp
        der += j * f[j] * qp
        qp = qp * q
    return val, der


def _assemble(model, grid, c, eta, w, symbol, phase):
    n, m = grid.n, model.m
    logw = eta * sigma(grid.x)
    coeffs = np.array(model.P, dtype=float)
    coeffs[1] += c
    coeffs[0] = 0.0
    lin = _fd.conjugated_operator(grid, coeffs, eta)
    nl, dnl = _nonlinear(model, w, logw)
    F = lin @ w + nl
    J = lin + sp.diags(dnl)
    # left: w = 1 and derivatives 1..m-1 vanish
    cols, W = _fd.boundary_derivative_rows(grid, "left", m - 1)
    Lrows = sp.csr_matrix((W.ravel(), (np.repeat(np.arange(m), cols.size), np.tile(cols, m))),
                          shape=(m, n))
    Lres = Lrows @ w - np.eye(m)[:, 0]
    # right: remove the strong unstable modes of the frozen problem
    roots = spatial_roots(symbol, 0.0)
    M = _fd.companion(symbol.c_coeffs)
    ell = _real_rows(_fd.left_null_rows(M, roots.strong_unstable))
    Rrows = _fd.jet_rows(grid, "right", ell) if ell.shape[0] else sp.csr_matrix((0, n))
    pc, pw = _fd.interpolation_row(grid, 0.0)
    Prow = sp.csr_matrix((pw, (np.zeros(pw.size, int), pc)), shape=(1, n))
    target = 0.5 * np.exp(eta * sigma(0.0)) if phase is None else phase
    interior = slice(m, n - m)
    Jfull = sp.vstack([Lrows, J[interior], Rrows, Prow]).tocsc()
    Ffull = np.concatenate([Lres, F[interior], Rrows @ w, Prow @ w - target])
    return Jfull, Ffull, F[interior]


def _real_rows(ell):
    """Real basis of the span of conjugate-closed complex rows."""
    if not np.iscomplexobj(ell) or np.allclose(ell.imag, 0):
        return np.real(ell)
    stacked = np.vstack([ell.real, ell.imag])
    u, s, vh = np.linalg.svd(stacked)
    return vh[: ell.shape[0]] * s[: ell.shape[0], None]


def _initial_guess(grid, eta):
    # w0 = omega / (1 + exp(eta x)), evaluated in logs
    return np.exp(eta * sigma(grid.x) + log_expit(-eta * grid.x))


def _newton(model, grid, c, eta, w, symbol, tol, max_iter, phase_value):
    it = 0
    J, F, Fi = _assemble(model, grid, c, eta, w, symbol, phase_value)
    nrm = np.max(np.abs(F))
    # roundoff in the stencils scales with the size of w, which grows linearly on the right
    while nrm > tol * max(1.0, np.max(np.abs(w))) and it < max_iter:
        dw = spla.spsolve(J, -F)
        t = 1.0
        for _ in range(20):
            w_new = w + t * dw
            J_new, F_new, Fi_new = _assemble(model, grid, c, eta, w_new, symbol, phase_value)
            if np.max(np.abs(F_new)) < nrm:
                break
            t *= 0.5
        else:
            # no decrease: roundoff floor or a bad guess, decided by the caller
            break
        w, J, F, Fi = w_new, J_new, F_new, Fi_new
        nrm = np.max(np.abs(F))
        it += 1
    return w, nrm / max(1.0, np.max(np.abs(w))), it, Fi


def solve_front(model, ss, L=100.0, n=8192, init=None, tol=1e-10, max_iter=40, phase=0.5,
                continuation_steps=10):
    """Critical front by damped Newton on the weighted traveling-wave equation.

    Parameters
    ----------
    model : ScalarModel
    ss : SpreadingSpeed
    L, n : float, int
        Half-length and node count of the grid.
    init : FrontProfile or None
        Initial profile; default ``(1 - tanh(eta x / 2)) / 2``.
    phase : float
        Value of ``q`` at ``x = 0``.

    Returns
    -------
    FrontProfile

    Raises
    ------
    NoConvergence
    """
    grid = _fd.Grid(L, n)
    eta, c = ss.eta_star, ss.c_star
    symbol = shift_symbol(model, ss)
    target = phase * np.exp(eta * sigma(0.0))
    if init is not None:
        if init.grid != grid:
            raise GridMismatch("initial profile lives on a different grid")
        w0 = init.w.copy()
    else:
        w0 = _initial_guess(grid, eta)
    w, nrm, it, Fi = _newton(model, grid, c, eta, w0, symbol, tol, max_iter, target)
    if nrm > tol and model.order_2m > 2 and init is None:
        w, nrm, it, Fi = _continuation(model, grid, tol, max_iter, target, continuation_steps)
    if not np.isfinite(nrm) or nrm > tol:
        raise NoConvergence(f"front residual {nrm:.3e} after {it} iterations")
    return _finish(model, grid, c, eta, w, Fi, it, phase)


def _continuation(model, grid, tol, max_iter, target_phase, steps):
    """Homotopy from the second-order truncation of ``P`` to the full model."""
    P = np.array(model.P[1:], dtype=float)
    w = None
    it_total = 0
    for s in np.linspace(0.0, 1.0, steps + 1):
        p = P.copy()
        p[2:] *= s
        order = model.order_2m if s > 0 else 2
        sub = ScalarModel(order, tuple(p[:order]), model.f_coeffs, model.name)
        ss = find_spreading_speed(sub, certify=False)
        symbol = shift_symbol(sub, ss)
        target = 0.5 * np.exp(ss.eta_star * sigma(0.0))
        if w is None:
            w = _initial_guess(grid, ss.eta_star)
        else:
            # re-weight the previous profile to the new rate
            w = w * np.exp((ss.eta_star - eta_prev) * sigma(grid.x))
        w, nrm, it, Fi = _newton(sub, grid, ss.c_star, ss.eta_star, w, symbol, tol, max_iter,
                                 target if s < 1 else target_phase)
        it_total += it
        eta_prev = ss.eta_star
        if nrm > tol:
            raise NoConvergence(f"continuation stalled at s = {s:.2f}, residual {nrm:.3e}")
    return w, nrm, it_total, Fi


def _finish(model, grid, c, eta, w, Fi, it, phase):
    m = model.m
    # residual of the unweighted equation on the rows where it is imposed
    nrm = np.max(np.abs(Fi * np.exp(-eta * sigma(grid.x[m:grid.n - m]))))
    derivs = {}
    q = w * np.exp(-eta * sigma(grid.x))
    for k in range(1, model.order_2m):
        Dk = _fd.conjugated_operator(grid, np.eye(k + 1)[k], 0.0)
        derivs[k] = Dk @ q
    monotone = bool(np.all(derivs[1][grid.x > -grid.L + 10] <= 1e-10 * np.max(np.abs(derivs[1]))))
    if not monotone:
        warnings.warn("front is not monotone", NonMonotoneWarning, stacklevel=3)
    return FrontProfile(grid, w, c, eta, float(nrm), it, monotone, phase, derivs)


def front_decay_fit(front, window=(10.0, 30.0)):
    """Fit ``q(x) exp(eta x) = a + b x`` on a window.

    Returns
    -------
    a, b : float
    residual : float
        Relative RMS misfit.

    Raises
    ------
    WindowUnderflow
        When ``q < 1e-14`` somewhere in the window.
    """
    x0, x1 = window
    x = front.x
    sel = (x >= x0) & (x <= x1)
    if x0 <= 0 or x1 >= front.grid.L - 5 or sel.sum() < 4:
        raise ValueError("window must lie inside (0, L - 5)")
    if np.min(front.q[sel]) < 1e-14:
        raise WindowUnderflow(f"q falls below 1e-14 in [{x0}, {x1}]")
    # w = q exp(eta sigma) equals q exp(eta x) for x >= 1
    A = np.column_stack([np.ones(sel.sum()), x[sel]])
    coef, *_ = np.linalg.lstsq(A, front.w[sel], rcond=None)
    res = np.sqrt(np.mean((A @ coef - front.w[sel]) ** 2)) / np.sqrt(np.mean(front.w[sel] ** 2))
    return float(coef[0]), float(coef[1]), float(res)


def gap_condition(model, ss):
    """True when no spatial root decays slower than ``exp(-eta_star x)``.

    In shifted coordinates this excludes strong roots with
    ``0 < Re nu < eta_star``.
    """
    roots = spatial_roots(shift_symbol(model, ss), 0.0)
    strong = np.concatenate([roots.strong_stable, roots.strong_unstable])
    return bool(not np.any((strong.real > 0) & (strong.real < ss.eta_star)))


@dataclass
class PsiProfile:
    grid: _fd.Grid
    psi: np.ndarray
    mu0: float
    mu1: float
    scale: float

    @property
    def x(self):
        return self.grid.x


def compute_psi(front, model, ss, window=None):
    """``psi = omega q'`` normalized so that ``psi(x) / x -> 1``.

    Raises
    ------
    GapFails
    """
    if not gap_condition(model, ss):
        raise GapFails("a strong spatial root decays slower than the critical rate")
    grid = front.grid
    # d w / d(phase) along the discrete front family is an exact null vector of
    # the discrete linearization, unlike a differentiated profile
    J, _, _ = _assemble(model, grid, ss.c_star, ss.eta_star, front.w, shift_symbol(model, ss), None)
    e = np.zeros(J.shape[0])
    e[-1] = 1.0
    raw = spla.spsolve(J, e)
    if window is None:
        window = (0.5 * grid.L, grid.L - 10.0)
    sel = (grid.x >= window[0]) & (grid.x <= window[1])
    A = np.column_stack([np.ones(sel.sum()), grid.x[sel]])
    (b0, b1), *_ = np.linalg.lstsq(A, raw[sel], rcond=None)
    if abs(b1) * window[1] < 1e-4 * abs(b0):
        raise GapFails("psi does not grow linearly; the front tail is a pure exponential")
    psi = raw / b1
    return PsiProfile(grid, psi, float(b0 / b1), 1.0, float(1.0 / b1))
