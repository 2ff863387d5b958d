"""Resolvent kernel of the frozen right-hand operator in the critical weight.

In the weight ``exp(eta_star x)`` the linearization at the invaded state
becomes ``L_plus = sum_{k=2}^{2m} c_k d^k`` where ``c_k`` are the Taylor
coefficients of ``d_plus(0, nu - eta_star)``. The kernel ``G`` with
``(L_plus - gamma^2) G = -delta`` is built from the first-order system

    U' = M(gamma) U,

whose companion matrix has the spatial roots ``nu_k(gamma)`` as eigenvalues.
Two of them, ``nu_plus`` and ``nu_minus ~ +-gamma/sqrt(alpha)``, collide at
``gamma = 0``; their spectral projections carry a simple pole ``+-P_{-1}/gamma``.
The kernel splits into

    G = G_heat + (G_c - G_heat) + G_c_tilde + G_h,

a heat-like singular part, its O(gamma) correction, the regular remainder of
the central projections and the part carried by the strong roots.
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (DoubleRootResidual, CentralRootAmbiguous, JordanCollision,
                     BetaZero, OverflowGuard, BoundViolated)
from .roots import polyroots
from .weights import japanese

__all__ = [
    "ConjugatedSymbol", "CompanionMatrix", "SpatialRoots", "ProjectionSplit",
    "KernelDecomposition", "shift_symbol", "build_companion", "spatial_roots",
    "pole_data", "frobenius_projections", "eval_kernel_pieces", "eval_G_odd",
    "fit_nu2", "check_kernel_lemmas", "LemmaReport",
]


@dataclass(frozen=True)
class ConjugatedSymbol:
    """Coefficients ``c_0..c_{2m}`` of ``d_plus(0, nu - eta_star)``.

    ``c_0`` and ``c_1`` are stored as exact zeros once the residual check
    has passed; ``residual`` keeps the discarded magnitude.
    """

    c_coeffs: np.ndarray
    residual: float = 0.0

    @property
    def order(self):
        return len(self.c_coeffs) - 1

    @property
    def m(self):
        return self.order // 2

    @property
    def alpha(self):
        return float(np.real(self.c_coeffs[2]))

    @property
    def nu0(self):
        return 1.0 / np.sqrt(self.alpha)

    @property
    def leading(self):
        return self.c_coeffs[-1]

    def poly(self, gamma):
        """Ascending coefficients of ``sum c_k nu^k - gamma^2``."""
        a = np.asarray(self.c_coeffs, dtype=complex).copy()
        a[0] -= gamma * gamma
        return a

    def __call__(self, nu, gamma=0.0):
        return npoly.polyval(nu, self.poly(gamma))


def shift_symbol(model, ss, tol=1e-8):
    """Binomial expansion of ``P(nu - eta) + c (nu - eta) + f'(0)``.

    Raises
    ------
    DoubleRootResidual
        If ``|c_0| + |c_1| > tol``, i.e. ``eta`` is not at the double root.
    """
    a = model.dispersion_poly(ss.c_star, 0.0, "plus").real
    eta = ss.eta_star
    n = len(a) - 1
    c = np.zeros(n + 1)
    for k in range(n + 1):
        c[k] = sum(a[j] * comb(j, k) * (-eta) ** (j - k) for j in range(k, n + 1))
    resid = abs(c[0]) + abs(c[1])
    if resid > tol:
        raise DoubleRootResidual(f"|c0| + |c1| = {resid:.3e}")
    c[0] = c[1] = 0.0
    return ConjugatedSymbol(c, resid)


@dataclass(frozen=True)
class CompanionMatrix:
    gamma: complex
    entries: np.ndarray


def build_companion(symbol, gamma):
    """First-order system matrix for ``(L_plus - gamma^2) u = 0``.

    Superdiagonal ones and bottom row
    ``[gamma^2, 0, -c_2, ..., -c_{2m-1}] / c_{2m}``.
    """
    n = symbol.order
    c = np.asarray(symbol.c_coeffs, dtype=complex)
    M = np.zeros((n, n), dtype=complex)
    M[np.arange(n - 1), np.arange(1, n)] = 1.0
    M[-1, 0] = gamma * gamma / c[-1]
    M[-1, 1] = 0.0
    M[-1, 2:] = -c[2:-1] / c[-1]
    return CompanionMatrix(complex(gamma), M)


@dataclass(frozen=True)
class SpatialRoots:
    """Roots ordered as ``[nu_plus, nu_minus, strong stable..., strong unstable...]``."""

    gamma: complex
    nu_plus: complex
    nu_minus: complex
    strong_stable: np.ndarray
    strong_unstable: np.ndarray

    @property
    def ordered(self):
        return np.concatenate([[self.nu_plus, self.nu_minus], self.strong_stable,
                               self.strong_unstable])


def spatial_roots(symbol, gamma, separation=5.0):
    """All roots of ``sum c_k nu^k = gamma^2`` with the central pair labeled.

    Raises
    ------
    CentralRootAmbiguous
        If the two smallest roots are not ``separation`` times closer to 0
        than the rest.
    """
    r = polyroots(symbol.poly(gamma))
    order = np.argsort(np.abs(r))
    central, rest = r[order[:2]], r[order[2:]]
    if rest.size and np.max(np.abs(central)) * separation > np.min(np.abs(rest)):
        raise CentralRootAmbiguous(
            f"|central| = {np.max(np.abs(central)):.3e} vs |strong| = {np.min(np.abs(rest)):.3e}")
    target = gamma * symbol.nu0
    if gamma != 0:
        d_plus = np.abs(central - target)
        d_minus = np.abs(central + target)
        if d_plus[0] + d_minus[1] <= d_plus[1] + d_minus[0]:
            nu_p, nu_m = central
        else:
            nu_m, nu_p = central
        if nu_p == nu_m:
            raise CentralRootAmbiguous("central roots coincide")
    else:
        nu_p = nu_m = 0.0j
    ss = np.sort_complex(rest[rest.real < 0])
    uu = np.sort_complex(rest[rest.real > 0])
    if ss.size != uu.size:
        raise CentralRootAmbiguous("strong roots do not split evenly")
    return SpatialRoots(complex(gamma), complex(nu_p), complex(nu_m), ss, uu)


def _covariant(M, roots, k):
    """Frobenius covariant of ``M`` for the simple root ``roots[k]``."""
    n = M.shape[0]
    C = np.eye(n, dtype=complex)
    I = np.eye(n)
    for j, nu in enumerate(roots):
        if j == k:
            continue
        C = C @ (M - nu * I) / (roots[k] - nu)
    return C


@dataclass(frozen=True)
class ProjectionSplit:
    gamma: complex
    roots: SpatialRoots
    P_cs: np.ndarray
    P_cu: np.ndarray
    P_ss: np.ndarray
    P_uu: np.ndarray
    ss_covariants: tuple
    uu_covariants: tuple
    P_minus1: np.ndarray
    beta: complex
    beta_closed: complex
    nu0: float

    @property
    def P_cs_tilde(self):
        return self.P_cs - self.P_minus1 / self.gamma

    @property
    def P_cu_tilde(self):
        return self.P_cu + self.P_minus1 / self.gamma


def _gamma_P_cs(symbol, gamma):
    roots = spatial_roots(symbol, gamma)
    M = build_companion(symbol, gamma).entries
    return gamma * _covariant(M, roots.ordered, 1)


def pole_data(symbol, gamma0=1e-3):
    """Pole matrix ``P_{-1}`` by Richardson extrapolation, and ``beta``.

    ``gamma P_cs(gamma) = P_{-1} + O(gamma)`` is sampled at ``gamma0``,
    ``gamma0/2`` and ``gamma0/4`` and extrapolated to second order.

    Returns
    -------
    P_minus1 : ndarray
    beta : complex
        Top-right entry of ``P_minus1``.
    beta_closed : complex
        ``-(sqrt(alpha)/2) prod_k (-1/nu_k(0))`` over the nonzero roots at 0.
    """
    F = [_gamma_P_cs(symbol, gamma0 / 2 ** j) for j in range(3)]
    R1 = [2 * F[1] - F[0], 2 * F[2] - F[1]]
    P_minus1 = (4 * R1[1] - R1[0]) / 3
    beta = P_minus1[0, -1]
    nonzero = polyroots(symbol.c_coeffs[2:])
    beta_closed = -0.5 * np.sqrt(symbol.alpha) * np.prod(-1.0 / nonzero)
    return P_minus1, complex(beta), complex(beta_closed)


def frobenius_projections(symbol, gamma, roots=None, pole=None, gamma0=1e-3,
                          collision_tol=1e-10):
    """Spectral projections of ``M(gamma)`` onto central and strong roots.

    Parameters
    ----------
    symbol : ConjugatedSymbol
    gamma : complex
        Nonzero, ``Re gamma >= 0``.
    roots : SpatialRoots, optional
    pole : tuple, optional
        Output of :func:`pole_data`, reused across ``gamma``.

    Raises
    ------
    JordanCollision, BetaZero
    """
    if roots is None:
        roots = spatial_roots(symbol, gamma)
    M = build_companion(symbol, gamma).entries
    nu = roots.ordered
    scale = max(1.0, float(np.max(np.abs(nu))))
    diff = np.abs(nu[:, None] - nu[None, :])
    np.fill_diagonal(diff, np.inf)
    if np.min(diff) < collision_tol * scale:
        raise JordanCollision(f"root separation {np.min(diff):.3e}")
    P_cu = _covariant(M, nu, 0)
    P_cs = _covariant(M, nu, 1)
    n_ss = roots.strong_stable.size
    ss_cov = tuple(_covariant(M, nu, 2 + j) for j in range(n_ss))
    uu_cov = tuple(_covariant(M, nu, 2 + n_ss + j) for j in range(roots.strong_unstable.size))
    zero = np.zeros_like(M)
    P_ss = sum(ss_cov, zero)
    P_uu = sum(uu_cov, zero)
    if pole is None:
        pole = pole_data(symbol, gamma0)
    P_minus1, beta, beta_closed = pole
    if abs(beta) < 1e-12:
        raise BetaZero("top-right entry of the pole matrix vanishes")
    return ProjectionSplit(complex(gamma), roots, P_cs, P_cu, P_ss, P_uu, ss_cov,
                           uu_cov, P_minus1, beta, beta_closed, symbol.nu0)


@dataclass
class KernelDecomposition:
    """Sampled kernel pieces; arrays have shape ``(len(orders), len(x))``."""

    gamma: complex
    x: np.ndarray
    orders: tuple
    heat: np.ndarray
    c_minus_heat: np.ndarray
    c_tilde: np.ndarray
    h: np.ndarray

    @property
    def total(self):
        return self.heat + self.c_minus_heat + self.c_tilde + self.h

    @property
    def center(self):
        return self.heat + self.c_minus_heat


def _guarded_exp(rate, x, what):
    expo = np.multiply.outer(rate, x) if np.ndim(rate) else rate * x
    if np.any(np.real(expo) > 700):
        raise OverflowGuard(f"growing exponent in {what}")
    return np.exp(expo)


def eval_kernel_pieces(split, symbol, x, orders=(0,)):
    """Evaluate the four kernel pieces and their regular-part derivatives.

    The strong parts are summed over the strong-root eigenbasis,
    ``sum_k exp(nu_k x) C_k``, and each derivative multiplies a term by
    ``nu_k``.
    """
    x = np.asarray(x, dtype=float)
    g = split.gamma
    c = symbol.leading
    beta = split.beta
    nu0 = split.nu0
    right = x >= 0
    xr, xl = x[right], x[~right]
    nu_p, nu_m = split.roots.nu_plus, split.roots.nu_minus
    e_m = _guarded_exp(nu_m, xr, "central stable")
    e_p = _guarded_exp(nu_p, xl, "central unstable")
    h_r = _guarded_exp(-nu0 * g, xr, "heat")
    h_l = _guarded_exp(nu0 * g, xl, "heat")
    tr_cs = split.P_cs_tilde[0, -1]
    tr_cu = split.P_cu_tilde[0, -1]
    ss = split.roots.strong_stable
    uu = split.roots.strong_unstable
    ss_w = np.array([C[0, -1] for C in split.ss_covariants])
    uu_w = np.array([C[0, -1] for C in split.uu_covariants])
    E_ss = _guarded_exp(ss, xr, "strong stable") if ss.size else np.zeros((0, xr.size))
    E_uu = _guarded_exp(uu, xl, "strong unstable") if uu.size else np.zeros((0, xl.size))

    shape = (len(orders), x.size)
    heat = np.zeros(shape, dtype=complex)
    cmh = np.zeros(shape, dtype=complex)
    ct = np.zeros(shape, dtype=complex)
    hh = np.zeros(shape, dtype=complex)
    pref = -beta / (c * g)
    for i, k in enumerate(orders):
        heat[i, right] = pref * (-nu0 * g) ** k * h_r
        heat[i, ~right] = pref * (nu0 * g) ** k * h_l
        cmh[i, right] = pref * nu_m ** k * e_m - heat[i, right]
        cmh[i, ~right] = pref * nu_p ** k * e_p - heat[i, ~right]
        ct[i, right] = -tr_cs / c * nu_m ** k * e_m
        ct[i, ~right] = tr_cu / c * nu_p ** k * e_p
        if ss.size:
            hh[i, right] = -((ss_w * ss ** k) @ E_ss) / c
        if uu.size:
            hh[i, ~right] = ((uu_w * uu ** k) @ E_uu) / c
    return KernelDecomposition(complex(g), x, tuple(orders), heat, cmh, ct, hh)


def eval_G_odd(gamma, nu0, x, y):
    """Odd-reflected heat kernel ``(exp(-nu0 gamma|x-y|) - exp(-nu0 gamma(x+y))) / gamma``.

    Returns the limit ``2 nu0 min(x, y)`` at ``gamma = 0``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if gamma == 0:
        return 2.0 * nu0 * np.minimum(x, y) + 0.0j
    a = np.abs(x - y)
    b = x + y
    # expm1 form avoids cancellation for small gamma
    return (np.exp(-nu0 * gamma * a) * -np.expm1(-nu0 * gamma * (b - a))) / gamma


def fit_nu2(symbol, gammas=None):
    """Quadratic coefficients of ``nu_plus/nu_minus`` by least squares.

    ``nu -+ nu0 gamma`` is fitted by ``a2 gamma^2 + a3 gamma^3 + a4 gamma^4``
    over eight small real ``gamma``.
    """
    if gammas is None:
        gammas = np.geomspace(2e-3, 2e-2, 8)
    rows = np.array([[g ** 2, g ** 3, g ** 4] for g in gammas])
    out = []
    for sign, attr in ((1, "nu_plus"), (-1, "nu_minus")):
        vals = np.array([getattr(spatial_roots(symbol, g), attr) - sign * symbol.nu0 * g
                         for g in gammas])
        coef = np.linalg.lstsq(rows, vals, rcond=None)[0]
        out.append(coef[0])
    return complex(out[0]), complex(out[1])


@dataclass
class LemmaReport:
    gammas: np.ndarray
    ratios: dict = field(default_factory=dict)
    growth: dict = field(default_factory=dict)
    bounded: dict = field(default_factory=dict)

    def to_dict(self):
        return {"gammas": [float(abs(g)) for g in self.gammas],
                "ratios": {k: [float(v) for v in r] for k, r in self.ratios.items()},
                "growth": {k: float(v) for k, v in self.growth.items()},
                "bounded": dict(self.bounded)}


def check_kernel_lemmas(symbol, gammas, x=None, orders=(0, 1), max_growth=0.2,
                        raise_on_fail=True):
    """Sup-ratios of the kernel estimates along a decreasing ``gamma`` sequence.

    For each estimate the sup over the grid of ``|lhs| / bound-shape`` is
    recorded for every ``gamma``. An estimate is accepted when no ratio grows
    by more than ``max_growth`` from one ``gamma`` to the next.

    Keys in the report:

    ``center-heat/k``
        ``|d^k (G_c - G_heat)| / (|gamma| <x>)``.
    ``center-heat-2/k``
        ``|d^k (G_c - G_heat + beta gamma h / c)| / (|gamma|^2 <x>^2)`` with
        ``h = nu2 x`` on each side.
    ``remainder/k``
        ``|d^k (Gt_c + G_h)(gamma) - d^k (Gt_c + G_h)(gamma_ref)| / (|gamma| <x>)``
        with ``gamma_ref`` far below the sequence.
    ``odd``
        ``|G_odd - 2 nu0 min(x, y)| / (|gamma| <x><y>)`` on a square grid.
    """
    gammas = np.asarray(gammas, dtype=complex)
    if x is None:
        x = np.linspace(-200, 200, 4001)
    x = np.asarray(x, dtype=float)
    pole = pole_data(symbol)
    nu2p, nu2m = fit_nu2(symbol)
    beta = pole[1]
    c = symbol.leading
    jx = japanese(x)
    hfun = np.where(x >= 0, nu2m * x, nu2p * x)
    # derivative of h: nu2 on each side, zero beyond first order
    dh = {0: hfun, 1: np.where(x >= 0, nu2m, nu2p)}

    g_ref = gammas[-1] / 64
    ref = eval_kernel_pieces(frobenius_projections(symbol, g_ref, pole=pole), symbol, x, orders)
    ref_rem = ref.c_tilde + ref.h

    rep = LemmaReport(gammas)
    ys = np.linspace(0, 100, 401)
    X, Y = np.meshgrid(ys, ys, indexing="ij")
    for g in gammas:
        kd = eval_kernel_pieces(frobenius_projections(symbol, g, pole=pole), symbol, x, orders)
        for i, k in enumerate(orders):
            r1 = np.max(np.abs(kd.c_minus_heat[i]) / (abs(g) * jx))
            corr = kd.c_minus_heat[i] + beta * g * dh.get(k, 0.0) / c
            r2 = np.max(np.abs(corr) / (abs(g) ** 2 * jx ** 2))
            rr = np.max(np.abs(kd.c_tilde[i] + kd.h[i] - ref_rem[i]) / (abs(g) * jx))
            rep.ratios.setdefault(f"center-heat/{k}", []).append(r1)
            rep.ratios.setdefault(f"center-heat-2/{k}", []).append(r2)
            rep.ratios.setdefault(f"remainder/{k}", []).append(rr)
        godd = eval_G_odd(g, symbol.nu0, X, Y)
        ro = np.max(np.abs(godd - 2 * symbol.nu0 * np.minimum(X, Y))
                    / (abs(g) * japanese(X) * japanese(Y)))
        rep.ratios.setdefault("odd", []).append(ro)
    failed = []
    for key, vals in rep.ratios.items():
        vals = np.asarray(vals)
        with np.errstate(divide="ignore", invalid="ignore"):
            steps = np.where(vals[:-1] > 0, vals[1:] / vals[:-1] - 1.0, 0.0)
        growth = float(np.max(steps)) if steps.size else 0.0
        rep.growth[key] = growth
        rep.bounded[key] = growth <= max_growth
        if growth > max_growth:
            failed.append(key)
    if failed and raise_on_fail:
        raise BoundViolated(failed[0])
    return rep
