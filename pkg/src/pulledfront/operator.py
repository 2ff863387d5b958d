"""Discretized weighted linearization about the front and its resolvent.

``L = omega A omega^{-1}`` with ``A = P(d) + c d + f'(q)`` is assembled on the
front's grid. Resolvent problems ``(L - gamma^2) u = g`` are closed with
transparent rows at both ends: at ``x = L`` the jet of ``u`` is restricted
to the modes of the frozen right operator that decay for ``Re gamma > 0``
(the central root ``nu_minus`` and the strong stable roots), and at
``x = -L`` to the modes of the frozen left operator that decay to the left.
At ``gamma = 0`` the right rows allow constants but not linear growth.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.polynomial import polynomial as npoly

from . import _fd
from .errors import CentralRootAmbiguous, GridMismatch, SingularSystem, ResidualLarge
from .kernel import shift_symbol, spatial_roots, build_companion
from .model import region_margin
from .roots import polyroots
from .weights import AlgebraicWeight, weighted_h1_norm, weighted_inner

__all__ = ["WeightedOperator", "ResolventSample", "build_operator", "resolve", "weighted_norm",
           "verify_R0_lipschitz", "extract_R1", "R1Result", "eigen_scan", "EigenReport",
           "resonance_test", "verify_resolvent_blowup", "fit_power"]


def weighted_norm(x, u, r, order=1):
    """``|| <x>^r u ||_{H^order}`` on the grid."""
    return weighted_h1_norm(x, u, AlgebraicWeight(r, r), order=order)


def fit_power(t, y):
    """Least-squares slope of ``log y`` against ``log t`` and its standard error."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([np.ones_like(t), np.log(t)])
    coef, res, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    dof = max(len(t) - 2, 1)
    resid = np.log(y) - A @ coef
    cov = np.linalg.inv(A.T @ A) * (resid @ resid) / dof
    return float(coef[1]), float(np.sqrt(cov[1, 1]))


@dataclass
class WeightedOperator:
    model: object
    ss: object
    grid: _fd.Grid
    matrix: sp.csr_matrix
    symbol: object
    fprime: np.ndarray
    _factor_cache: dict = field(default_factory=dict, repr=False)

    @property
    def x(self):
        return self.grid.x

    @property
    def n(self):
        return self.grid.n

    @property
    def m(self):
        return self.model.m

    def apply(self, u):
        return self.matrix @ u

    def right_rows(self, gamma):
        """Transparent rows at ``x = L`` for the spectral parameter ``gamma``."""
        M = build_companion(self.symbol, gamma).entries
        try:
            roots = spatial_roots(self.symbol, gamma)
            excluded = np.concatenate([[roots.nu_plus], roots.strong_unstable])
        except CentralRootAmbiguous:
            # far from gamma = 0 no central pair exists; growing modes are those with Re nu > 0
            r = polyroots(self.symbol.poly(gamma))
            excluded = r[r.real > 0]
        ell = _fd.left_null_rows(M, excluded)
        return _fd.jet_rows(self.grid, "right", ell)

    def left_rows(self, gamma):
        """Transparent rows at ``x = -L``: no modes growing to the left."""
        lam = gamma * gamma
        a = self.model.dispersion_poly(self.ss.c_star, lam, "minus")
        r = polyroots(a)
        M = _fd.companion(a)
        ell = _fd.left_null_rows(M, r[r.real < 0])
        return _fd.jet_rows(self.grid, "left", ell)

    def mass(self):
        """Identity on the rows where the equation is imposed, zero on boundary rows."""
        d = np.ones(self.n)
        d[: self.m] = 0.0
        d[self.n - self.m:] = 0.0
        return sp.diags(d).tocsr()

    def system(self, gamma, bc_gamma=None):
        """Square matrix of ``L - gamma^2`` with boundary rows for ``bc_gamma``."""
        if bc_gamma is None:
            bc_gamma = gamma
        m, n = self.m, self.n
        body = (self.matrix - (gamma * gamma) * sp.eye(n, format="csr"))[m: n - m]
        return sp.vstack([self.left_rows(bc_gamma), body, self.right_rows(bc_gamma)]).tocsc()

    def boundary_rhs(self, g):
        b = np.array(g, dtype=complex if np.iscomplexobj(g) else float, copy=True)
        b[: self.m] = 0.0
        b[self.n - self.m:] = 0.0
        return b

    def factor(self, gamma, bc_gamma=None):
        """Sparse LU of :meth:`system`, cached per ``gamma``; returns ``(lu, matrix)``."""
        key = (complex(gamma), None if bc_gamma is None else complex(bc_gamma))
        hit = self._factor_cache.get(key)
        if hit is not None:
            return hit
        A = self.system(gamma, bc_gamma)
        if np.all(A.data.imag == 0):
            A = sp.csc_matrix((np.ascontiguousarray(A.data.real), A.indices, A.indptr), shape=A.shape)
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularSystem(str(exc)) from exc
        if len(self._factor_cache) >= 64:
            self._factor_cache.clear()
        self._factor_cache[key] = (lu, A)
        return lu, A


def build_operator(model, ss, front):
    """Assemble the weighted linearization about ``front``.

    Raises
    ------
    GridMismatch
        If the front has no grid or a wrong-sized profile.
    """
    grid = getattr(front, "grid", None)
    if grid is None or front.w.shape != (grid.n,):
        raise GridMismatch("front profile does not match its grid")
    if abs(front.c_star - ss.c_star) > 1e-12 or abs(front.eta_star - ss.eta_star) > 1e-12:
        raise GridMismatch("front was computed for a different spreading speed")
    fprime = npoly.polyval(front.q, npoly.polyder(model.f))
    coeffs = np.array(model.P, dtype=float)
    coeffs[1] += ss.c_star
    coeffs[0] = 0.0
    A = _fd.conjugated_operator(grid, coeffs, ss.eta_star, diag=fprime)
    return WeightedOperator(model, ss, grid, A, shift_symbol(model, ss), fprime)


@dataclass
class ResolventSample:
    gamma: complex
    g: np.ndarray
    u: np.ndarray
    residual: float

    def norm(self, x, r, order=1):
        return weighted_norm(x, self.u, r, order)


def resolve(op, gamma, g, rtol=1e-9, refine=1):
    """Solve ``(L - gamma^2) u = g`` with transparent boundary rows.

    ``g`` may carry a trailing axis of right-hand sides.

    Raises
    ------
    SingularSystem, ResidualLarge
    """
    g = np.asarray(g)
    lu, A = op.factor(gamma)
    b = op.boundary_rhs(g)

    def solve(rhs):
        if np.iscomplexobj(rhs) and not np.iscomplexobj(A.data):
            return lu.solve(np.ascontiguousarray(rhs.real)) + 1j * lu.solve(np.ascontiguousarray(rhs.imag))
        return lu.solve(np.ascontiguousarray(rhs, dtype=np.result_type(rhs, A.dtype)))

    u = solve(b)
    for _ in range(refine):
        u = u + solve(b - A @ u)
    if not np.all(np.isfinite(u)):
        raise SingularSystem(f"non-finite solution at gamma = {gamma}")
    res = np.max(np.abs(b - A @ u))
    scale = max(np.max(np.abs(g)), 1e-300)
    rel = float(res / scale) if np.any(g) else float(res)
    if rel > rtol:
        raise ResidualLarge(f"relative residual {rel:.3e} at gamma = {gamma}")
    return ResolventSample(complex(gamma), g, u, rel)


def verify_R0_lipschitz(op, g, r=2.0, gammas=None):
    """Slope of ``|| u(gamma) - u(0) ||_{H^1_{-r}}`` against ``gamma``.

    Returns
    -------
    dict
        ``gammas``, ``diffs``, ``slope``, ``stderr``.
    """
    if gammas is None:
        gammas = 0.1 * 2.0 ** -np.arange(6)
    gammas = np.asarray(gammas, dtype=float)
    u0 = resolve(op, 0.0, g).u
    diffs = np.array([weighted_norm(op.x, resolve(op, gm, g).u - u0, -r) for gm in gammas])
    if not np.any(diffs > 0):
        return {"gammas": gammas, "diffs": diffs, "slope": float("nan"), "stderr": float("nan")}
    slope, err = fit_power(gammas, diffs)
    return {"gammas": gammas, "diffs": diffs, "slope": slope, "stderr": err}


@dataclass
class R1Result:
    coefficient: float
    nonproportionality: float
    derivative: np.ndarray
    history: list

    def to_dict(self):
        return {"coefficient": self.coefficient, "nonproportionality": self.nonproportionality,
                "history": [float(h) for h in self.history]}


def _project(x, v, psi, r):
    w = AlgebraicWeight(-r, -r)
    kappa = weighted_inner(x, psi, v, w) / weighted_inner(x, psi, psi, w)
    rem = weighted_h1_norm(x, v - kappa * psi, w) / max(weighted_h1_norm(x, v, w), 1e-300)
    return float(np.real(kappa)), float(rem)


def extract_R1(op, psi, g, r=3.0, gamma0=0.02, halvings=3):
    """First-order coefficient of the resolvent at ``gamma = 0``, projected on ``psi``.

    Difference quotients ``(u(gamma) - u(0)) / gamma`` at ``gamma0 2^-j`` are
    extrapolated in pairs; the last extrapolant is projected on ``psi`` in
    ``H^1_{-r}``.

    Returns
    -------
    R1Result
        ``coefficient`` approximates ``int g1 g``; ``history`` holds the
        coefficient from each extrapolated pair.
    """
    psi = getattr(psi, "psi", psi)
    u0 = resolve(op, 0.0, g).u
    quot = []
    for j in range(halvings + 1):
        gm = gamma0 * 2.0 ** -j
        quot.append((resolve(op, gm, g).u - u0) / gm)
    extrap = [2 * quot[j + 1] - quot[j] for j in range(halvings)]
    hist = [_project(op.x, v, psi, r)[0] for v in extrap]
    kappa, rem = _project(op.x, extrap[-1], psi, r)
    return R1Result(kappa, rem, extrap[-1], hist)


@dataclass
class EigenReport:
    eigenvalues: np.ndarray
    margins: np.ndarray
    candidates: np.ndarray
    flagged: np.ndarray
    tube: float
    resonance: dict

    @property
    def unstable(self):
        return bool(self.flagged.size)

    @property
    def regime(self):
        """``unstable-eigenvalue``, ``resonance`` or ``all-clear``."""
        if self.unstable:
            return "unstable-eigenvalue"
        return "resonance" if self.resonance["resonance"] else "all-clear"

    def to_dict(self):
        def c(z):
            return [[float(v.real), float(v.imag)] for v in np.atleast_1d(z)]
        return {"eigenvalues": c(self.eigenvalues), "margins": [float(v) for v in self.margins],
                "candidates": c(self.candidates), "flagged": c(self.flagged), "tube": self.tube,
                "resonance": self.resonance, "regime": self.regime}


def eigen_scan(op, shifts=(1.0, 0.3, 0.05), k=8, tube=None, flag_re=-1e-3):
    """Eigenvalues of the truncated operator near ``shifts``, classified.

    The boundary rows are those of ``gamma = 0``. An eigenvalue is an
    essential-spectrum artifact when its region margin is below ``tube``;
    the rest are candidates, flagged when ``Re lambda >= flag_re``.
    """
    if tube is None:
        tube = 10 * op.grid.h ** 2
    A = op.system(0.0).real.tocsc()
    B = op.mass()
    found = []
    for s in shifts:
        lu = spla.splu((A - s * B).tocsc())
        Op = spla.LinearOperator(A.shape, matvec=lambda v, lu=lu: lu.solve(B @ v), dtype=float)
        try:
            theta = spla.eigs(Op, k=k, which="LM", return_eigenvectors=False, tol=1e-10)
        except spla.ArpackNoConvergence as exc:
            theta = exc.eigenvalues
        theta = theta[np.abs(theta) > 1e-12]
        found.extend(s + 1.0 / theta)
    lam = np.array(found, dtype=complex)
    if lam.size:
        # merge duplicates seen from several shifts
        lam = lam[np.argsort(-lam.real)]
        keep = [0]
        for i in range(1, lam.size):
            if np.min(np.abs(lam[i] - lam[keep])) > 1e-6 * max(1.0, abs(lam[i])):
                keep.append(i)
        lam = lam[keep]
    margins = np.array([region_margin(op.model, op.ss, z) for z in lam])
    cand = lam[margins >= tube]
    flagged = cand[cand.real >= flag_re]
    return EigenReport(lam, margins, cand, flagged, float(tube), resonance_test(op))


def resonance_test(op, window=None, threshold=0.05):
    """Bounded-solution test for ``L u = 0``.

    Solves ``L u = 0`` with the left transparent rows, the strong-unstable
    exclusion rows on the right and the normalization ``u(L) = 1``, then
    fits ``mu0 + mu1 x`` on the right. A resonance is reported when
    ``|mu1| L / max|u|`` on the window is below ``threshold``.
    """
    n, m = op.n, op.m
    x = op.x
    roots = spatial_roots(op.symbol, 0.0)
    M = build_companion(op.symbol, 0.0).entries
    ell = _fd.left_null_rows(M, roots.strong_unstable)
    rows = [op.left_rows(0.0), op.matrix[m: n - m]]
    if ell.shape[0]:
        rows.append(_fd.jet_rows(op.grid, "right", ell))
    norm_row = sp.csr_matrix(([1.0], ([0], [n - 1])), shape=(1, n))
    rows.append(norm_row)
    A = sp.vstack(rows).tocsc()
    b = np.zeros(n, dtype=complex)
    b[-1] = 1.0
    u = spla.spsolve(A, b)
    u = np.real_if_close(u, tol=1e8).real
    if window is None:
        window = (0.5 * op.grid.L, op.grid.L - 10.0)
    sel = (x >= window[0]) & (x <= window[1])
    coef, *_ = np.linalg.lstsq(np.column_stack([np.ones(sel.sum()), x[sel]]), u[sel], rcond=None)
    score = abs(coef[1]) * op.grid.L / np.max(np.abs(u[sel]))
    return {"mu0": float(coef[0]), "mu1": float(coef[1]), "score": float(score),
            "resonance": bool(score < threshold)}


def verify_resolvent_blowup(op, g, r, s, gammas=None, margin=0.1):
    """Blowup exponent of ``|| u(gamma) ||_{H^1_s} / || g ||_{L^2_r}`` along real ``gamma``.

    Returns
    -------
    dict
        ``beta`` (NaN for ``g = 0``), the admissible window and ``in_window``.
    """
    if gammas is None:
        gammas = 0.4 * 2.0 ** -np.arange(5)
    gammas = np.asarray(gammas, dtype=float)
    gnorm = weighted_norm(op.x, g, r, order=0)
    lo = max(0.0, 0.5 - r) - margin
    hi = -s - 1.5 + margin
    out = {"gammas": gammas, "window": (lo, hi), "r": r, "s": s}
    if gnorm == 0:
        out.update(ratios=np.zeros_like(gammas), beta=float("nan"), in_window=False, zero_data=True)
        return out
    ratios = np.array([weighted_norm(op.x, resolve(op, gm, g).u, s) / gnorm for gm in gammas])
    slope, err = fit_power(gammas, ratios)
    beta = -slope
    out.update(ratios=ratios, beta=beta, stderr=err, in_window=bool(lo < beta < hi), zero_data=False)
    return out
