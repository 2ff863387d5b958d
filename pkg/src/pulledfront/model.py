"""Scalar front models, their dispersion relations and the spreading speed.

A model is the parabolic equation

    u_t = P(d/dx) u + f(u),    P(nu) = sum_{k=1}^{2m} p_k nu^k,

with polynomial nonlinearity ``f`` satisfying ``f(0) = f(1) = 0``. In a frame
moving with speed ``c`` the linearizations at the states 0 and 1 have
dispersion relations

    d_plus(lam, nu)  = P(nu) + c nu + f'(0) - lam,
    d_minus(lam, nu) = P(nu) + c nu + f'(1) - lam.

The linear spreading speed is the speed at which ``d_plus(0, .)`` has a
double root at ``nu = -eta_star`` with ``eta_star > 0``.
"""

from dataclasses import dataclass, field, replace
import json
import math

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (ModelInvalid, NoConvergence, DegenerateDoubleRoot,
                     RootCollision, NotPinched, HypothesisViolated)
from .roots import polyroots

__all__ = [
    "ScalarModel", "SpreadingSpeed", "PinchingCertificate", "SpectrumReport",
    "fisher_kpp", "extended_fkpp", "bistable", "turing_amplitude",
    "eval_dispersion_plus", "eval_dispersion_minus", "find_spreading_speed",
    "verify_pinching", "verify_spectrum_hypotheses", "fredholm_border",
    "region_margin",
]


@dataclass(frozen=True)
class ScalarModel:
    """Problem definition.

    Parameters
    ----------
    order_2m : int
        Even order of the differential operator.
    p_coeffs : tuple of float
        Coefficients ``p_1..p_{2m}`` (``p_0 = 0`` is implied).
    f_coeffs : tuple of float
        Ascending coefficients ``f_0..f_d`` of the nonlinearity.
    name : str
    """

    order_2m: int
    p_coeffs: tuple
    f_coeffs: tuple
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "p_coeffs", tuple(float(v) for v in self.p_coeffs))
        object.__setattr__(self, "f_coeffs", tuple(float(v) for v in self.f_coeffs))
        n = self.order_2m
        if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
            raise ModelInvalid(f"order must be an even integer >= 2, got {n!r}")
        if len(self.p_coeffs) != n:
            raise ModelInvalid(f"expected {n} dispersion coefficients p_1..p_{n}, "
                               f"got {len(self.p_coeffs)}")
        m = n // 2
        if not (-1) ** m * self.p_coeffs[-1] < 0:
            raise ModelInvalid("ellipticity sign (-1)^m p_2m < 0 violated")
        if len(self.f_coeffs) < 2:
            raise ModelInvalid("nonlinearity needs at least a linear term")
        f = np.asarray(self.f_coeffs)
        if abs(f[0]) > 1e-12 or abs(npoly.polyval(1.0, f)) > 1e-12:
            raise ModelInvalid("need f(0) = f(1) = 0")
        if self.fprime0 <= 0:
            raise ModelInvalid("need f'(0) > 0")
        if self.fprime1 >= 0:
            raise ModelInvalid("need f'(1) < 0")

    @property
    def m(self):
        return self.order_2m // 2

    @property
    def P(self):
        """Ascending coefficients of P, including the zero constant term."""
        return np.concatenate([[0.0], self.p_coeffs])

    @property
    def f(self):
        return np.asarray(self.f_coeffs)

    @property
    def fprime0(self):
        return float(self.f_coeffs[1])

    @property
    def fprime1(self):
        return float(npoly.polyval(1.0, npoly.polyder(self.f_coeffs)))

    def f_derivative(self, j):
        """Ascending coefficients of the j-th derivative of f."""
        return npoly.polyder(self.f, j) if j else self.f

    def dispersion_poly(self, c, lam=0.0, side="plus"):
        """Ascending coefficients in nu of d_plus or d_minus."""
        a = self.P.astype(complex)
        a[1] += c
        a[0] += (self.fprime0 if side == "plus" else self.fprime1) - lam
        return a

    def to_dict(self):
        return {"order": self.order_2m, "p": list(self.p_coeffs),
                "f": list(self.f_coeffs), "name": self.name}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(int(data["order"]), tuple(data["p"]), tuple(data["f"]),
                       str(data.get("name", "model")))
        except KeyError as exc:
            raise ModelInvalid(f"missing model field {exc}") from None

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class SpreadingSpeed:
    """Linear spreading speed with its certificate."""

    c_star: float
    eta_star: float
    alpha: float
    newton_residual: float
    pinched: bool = False
    border_margin: float = float("nan")

    def to_dict(self):
        return {k: getattr(self, k) for k in
                ("c_star", "eta_star", "alpha", "newton_residual", "pinched",
                 "border_margin")}


# -- example models ------------------------------------------------------------

def fisher_kpp():
    return ScalarModel(2, (0.0, 1.0), (0.0, 1.0, -1.0), "fisher-kpp")


def extended_fkpp(eps=0.1):
    """Fourth order Fisher-KPP, ``P(nu) = nu^2 - eps^2 nu^4``."""
    return ScalarModel(4, (0.0, 1.0, 0.0, -eps * eps), (0.0, 1.0, -1.0),
                       f"extended-fkpp-{eps:g}")


def bistable(mu):
    """Bistable nonlinearity ``u(u+mu)(1-mu-u)`` with amplitude scaled to [0, 1].

    The substitution ``u = (1-mu) U`` moves the invaded state to ``U = 1``
    and keeps ``f'(0) = mu (1-mu)``.
    """
    mu = float(mu)
    f = (0.0, mu * (1 - mu), (1 - mu) * (1 - 2 * mu), -(1 - mu) ** 2)
    return ScalarModel(2, (0.0, 1.0), f, f"bistable-{mu:g}")


def turing_amplitude(d, g0, eps=0.3):
    """Eighth order even model mimicking a coupled pulled/Turing system.

    ``P(nu) = Q(nu^2)`` with ``Q(s) = s + a4 s^2 + a6 s^3 + a8 s^4`` and
    ``f(u) = eps^2 (u - u^3)``. The coefficients are fixed by requiring that
    near ``nu = i`` the symbol reads ``(g0 - 1) eps^2 + d (nu - i)^2`` with
    vanishing slope, which imitates a damped Turing mode with diffusivity
    ``d`` and growth rate ``g0 eps^2``. For small ``eps`` the weighted border
    near the Turing wavenumber is stable roughly when ``d < 2 - g0``.
    """
    e2 = eps * eps
    # Q(-1) = (g0 - 1) eps^2, Q'(-1) = 0, Q''(-1) = -d / 2
    A = np.array([[1.0, -1.0, 1.0],
                  [-2.0, 3.0, -4.0],
                  [2.0, -6.0, 12.0]])
    rhs = np.array([(g0 - 1) * e2 + 1.0, -1.0, -0.5 * d])
    a4, a6, a8 = np.linalg.solve(A, rhs)
    p = (0.0, 1.0, 0.0, a4, 0.0, a6, 0.0, a8)
    return ScalarModel(8, p, (0.0, e2, 0.0, -e2), f"turing-d{d:g}-g{g0:g}")


# -- dispersion relations ----------------------------------------------------------

def eval_dispersion_plus(model, c, lam, nu, deriv=0):
    """``d_plus`` (or its ``deriv``-th nu-derivative) by Horner evaluation."""
    a = npoly.polyder(model.dispersion_poly(c, lam, "plus"), deriv)
    return npoly.polyval(nu, a)


def eval_dispersion_minus(model, c, lam, nu, deriv=0):
    a = npoly.polyder(model.dispersion_poly(c, lam, "minus"), deriv)
    return npoly.polyval(nu, a)


def _second_order_guess(model):
    # speed of the truncation P ~ p1 nu + p2 nu^2
    p1, p2 = model.p_coeffs[0], model.p_coeffs[1]
    if p2 <= 0:
        return None
    eta = math.sqrt(model.fprime0 / p2)
    return 2 * math.sqrt(p2 * model.fprime0) - p1, eta


def _newton_double_root(P, f0, c, eta, tol, max_iter):
    dP = npoly.polyder(P)
    d2P = npoly.polyder(P, 2)

    def F(c, eta):
        nu = -eta
        return np.array([npoly.polyval(nu, P) + c * nu + f0,
                         npoly.polyval(nu, dP) + c])

    res = F(c, eta)
    polished = False
    for _ in range(max_iter):
        nrm = np.max(np.abs(res))
        if nrm <= tol and polished:
            return c, eta, nrm
        # one extra step after reaching tol pushes the residual to roundoff
        polished = nrm <= tol
        nu = -eta
        J = np.array([[nu, -res[1]],
                      [1.0, -npoly.polyval(nu, d2P)]])
        try:
            dc, deta = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        for _ in range(21):
            cn, en = c + step * dc, eta + step * deta
            rn = F(cn, en)
            if np.all(np.isfinite(rn)) and np.max(np.abs(rn)) < nrm:
                break
            step *= 0.5
        else:
            if nrm <= tol:
                return c, eta, nrm
            break
        c, eta, res = cn, en, rn
    nrm = np.max(np.abs(res))
    if nrm <= tol:
        return c, eta, nrm
    raise NoConvergence(f"double-root Newton stalled at residual {nrm:.3e}")


def find_spreading_speed(model, init_c=None, init_eta=None, tol=1e-10,
                         max_iter=60, certify=True):
    """Locate the pinched double root of ``d_plus(0, .)``.

    Newton iteration in ``(c, eta)`` on ``d_plus(0, -eta) = 0`` and
    ``d/dnu d_plus(0, -eta) = 0``. When Newton fails from the given guess
    the higher-order coefficients are switched on gradually, starting from
    the explicit second-order speed.

    Parameters
    ----------
    model : ScalarModel
    init_c, init_eta : float, optional
        Initial guess; defaults to the second-order truncation values.
    tol : float
        Residual tolerance on both equations.
    certify : bool
        Run the pinching continuation and border sampling and store the
        outcome in the returned record.

    Returns
    -------
    SpreadingSpeed
    """
    P = model.P
    f0 = model.fprime0
    guess = _second_order_guess(model)
    if init_c is None or init_eta is None:
        if guess is None:
            raise NoConvergence("no initial guess available")
        init_c, init_eta = guess
    try:
        c, eta, res = _newton_double_root(P, f0, float(init_c), float(init_eta),
                                          tol, max_iter)
        if eta <= 0:
            raise NoConvergence("converged to a non-positive rate")
    except NoConvergence:
        if guess is None:
            raise
        # homotopy in the higher-order coefficients
        c, eta = guess
        base = P.copy()
        base[3:] = 0.0
        for s in np.linspace(0.0, 1.0, 41)[1:]:
            c, eta, res = _newton_double_root(base + s * (P - base), f0, c, eta,
                                              tol, max_iter)
    alpha = 0.5 * float(npoly.polyval(-eta, npoly.polyder(P, 2)))
    if abs(alpha) < 1e-8:
        raise DegenerateDoubleRoot(f"alpha = {alpha:.3e}")
    ss = SpreadingSpeed(float(c), float(eta), alpha, float(res))
    if certify:
        try:
            pinched = verify_pinching(model, ss).pinched
        except (NotPinched, RootCollision):
            pinched = False
        rep = verify_spectrum_hypotheses(model, ss, raise_on_fail=False)
        ss = replace(ss, pinched=bool(pinched), border_margin=rep.right_max_re)
    return ss


# -- pinching ----------------------------------------------------------------------

@dataclass
class PinchingCertificate:
    """Root paths of the two branches emerging from the double root.

    Paths are stored in unshifted coordinates, so pinching means
    ``Re nu_plus + eta_star > 0 > Re nu_minus + eta_star``.
    """

    pinched: bool
    lambdas: np.ndarray
    nu_plus: np.ndarray
    nu_minus: np.ndarray
    max_residual: float
    counts_at_lambda_max: tuple = (0, 0)
    note: str = ("numerical stand-in: branches continued along real lambda "
                 "and checked for separation across Re nu = -eta_star")


def _match(a, nu_pred, others_pred):
    """Root of ``a`` nearest ``nu_pred`` with an isolation ratio."""
    r = polyroots(a)
    d = np.abs(r - nu_pred)
    order = np.argsort(d)
    ratio = d[order[0]] / max(d[order[1]], 1e-300)
    return r[order[0]], ratio


def _track(a_of_lam, lam0, lam1, nu0, depth=0):
    """Continue one root from lam0 to lam1, refining until it is isolated."""
    a0 = a_of_lam(lam0)
    slope = 1.0 / npoly.polyval(nu0, npoly.polyder(a0))
    pred = nu0 + slope * (lam1 - lam0)
    nu, ratio = _match(a_of_lam(lam1), pred, None)
    if ratio > 0.25 or not np.isfinite(nu):
        if depth > 14:
            raise RootCollision(f"lost branch between lambda={lam0:.3e} and {lam1:.3e}")
        mid = 0.5 * (lam0 + lam1)
        nu_mid = _track(a_of_lam, lam0, mid, nu0, depth + 1)
        return _track(a_of_lam, mid, lam1, nu_mid, depth + 1)
    return nu


def verify_pinching(model, ss, lambda_max=None, steps=200, lambda_min=1e-3,
                    tilt=0.05):
    """Certify that the double root is pinched.

    Both roots emerging from ``-eta_star`` are continued along
    ``lam`` log-uniform in ``[lambda_min, lambda_max]``, rotated by the small
    angle ``tilt`` into the upper half plane.

    Returns
    -------
    PinchingCertificate

    Raises
    ------
    NotPinched
        When ``lambda_max <= 0`` or the branches do not separate across
        ``Re nu = -eta_star``.
    RootCollision
        When continuation loses a branch.
    """
    m = model.m
    if lambda_max is None:
        lambda_max = 10.0 * abs(model.p_coeffs[-1]) ** (-1.0 / m)
    if lambda_max <= 0 or steps < 2:
        raise NotPinched("empty lambda range")
    lambda_min = min(lambda_min, 0.5 * lambda_max)
    c, eta, alpha = ss.c_star, ss.eta_star, ss.alpha

    def a_of_lam(lam):
        return model.dispersion_poly(c, lam, "plus")

    # a slightly tilted ray avoids real-axis collisions of unrelated roots
    lams = np.geomspace(lambda_min, lambda_max, steps) * np.exp(1j * tilt)
    roots = polyroots(a_of_lam(lams[0]))
    s = np.sqrt(lams[0] / alpha)
    ip = int(np.argmin(np.abs(roots - (-eta + s))))
    im = int(np.argmin(np.abs(roots - (-eta - s))))
    if ip == im:
        raise RootCollision("could not separate the two branches at lambda_min")
    nu_p = [roots[ip]]
    nu_m = [roots[im]]
    for l0, l1 in zip(lams[:-1], lams[1:]):
        nu_p.append(_track(a_of_lam, l0, l1, nu_p[-1]))
        nu_m.append(_track(a_of_lam, l0, l1, nu_m[-1]))
    nu_p = np.array(nu_p)
    nu_m = np.array(nu_m)
    resid = max(np.max(np.abs([npoly.polyval(v, a_of_lam(l)) for v, l in zip(nu_p, lams)])),
                np.max(np.abs([npoly.polyval(v, a_of_lam(l)) for v, l in zip(nu_m, lams)])))
    sep = np.abs(nu_p - nu_m)
    ok = bool(np.all(nu_p.real + eta > 0) and np.all(nu_m.real + eta < 0)
              and np.all(np.diff(sep[-5:]) > 0))
    final = polyroots(a_of_lam(lams[-1]))
    counts = (int(np.sum(final.real > -eta)), int(np.sum(final.real < -eta)))
    ok = ok and counts == (m, m)
    cert = PinchingCertificate(ok, lams, nu_p, nu_m, float(resid), counts)
    if not ok:
        err = NotPinched("branches do not separate across Re nu = -eta_star")
        err.certificate = cert
        raise err
    return cert


# -- borders and hypotheses ----------------------------------------------------------

def fredholm_border(model, c, eta, side, k):
    """Sampled border ``lam(k)``: ``nu = ik - eta`` (right) or ``nu = ik`` (left)."""
    k = np.asarray(k, dtype=float)
    if side == "right":
        return eval_dispersion_plus(model, c, 0.0, 1j * k - eta) + 0.0j
    if side == "left":
        return eval_dispersion_minus(model, c, 0.0, 1j * k) + 0.0j
    raise ValueError("side must be 'left' or 'right'")


@dataclass
class SpectrumReport:
    """Outcome of border sampling; margins are ``-max Re`` (positive is good)."""

    right_max_re: float
    right_at_zero: complex
    left_max_re: float
    k_max: float
    k_min: float
    eta: float
    passed: bool
    failed: list = field(default_factory=list)

    @property
    def right_margin(self):
        return -self.right_max_re

    @property
    def left_margin(self):
        return -self.left_max_re

    def to_dict(self):
        return {"right_max_re": self.right_max_re,
                "right_at_zero": [self.right_at_zero.real, self.right_at_zero.imag],
                "left_max_re": self.left_max_re, "right_margin": self.right_margin,
                "left_margin": self.left_margin, "k_max": self.k_max,
                "k_min": self.k_min, "eta": self.eta, "passed": self.passed,
                "failed": list(self.failed)}


def default_k_max(model):
    return 10.0 * abs(model.p_coeffs[-1]) ** (-1.0 / model.order_2m)


def verify_spectrum_hypotheses(model, ss, k_max=None, samples=4001, eta=None,
                               zero_tol=1e-8, raise_on_fail=True):
    """Sample the weighted and left borders and check their position.

    Clauses: ``right`` (max Re of the weighted border over ``|k| >= k_min``
    is negative), ``double-root`` (weighted border passes through 0 at
    ``k = 0``), ``left`` (border of the invaded state strictly stable).

    Parameters
    ----------
    eta : float, optional
        Weight rate; defaults to ``ss.eta_star``. A detuned value produces a
        failure with positive ``right_max_re``.
    """
    if k_max is None:
        k_max = default_k_max(model)
    eta = ss.eta_star if eta is None else float(eta)
    k_min = 1e-3 * k_max
    half = samples // 2
    pos = np.unique(np.concatenate([np.linspace(k_min, k_max, half),
                                    np.geomspace(k_min, k_max, half)]))
    ks = np.concatenate([-pos[::-1], pos])
    lam_r = fredholm_border(model, ss.c_star, eta, "right", ks)
    lam_0 = complex(fredholm_border(model, ss.c_star, eta, "right", [0.0])[0])
    lam_l = fredholm_border(model, ss.c_star, 0.0, "left",
                            np.concatenate([ks, [0.0]]))
    rmax = float(np.max(lam_r.real))
    lmax = float(np.max(lam_l.real))
    failed = []
    if rmax >= 0:
        failed.append("right")
    if abs(lam_0) > zero_tol:
        failed.append("double-root")
    if lmax >= 0:
        failed.append("left")
    rep = SpectrumReport(rmax, lam_0, lmax, float(k_max), float(k_min), eta,
                         not failed, failed)
    if failed and raise_on_fail:
        raise HypothesisViolated(failed[0], f"clause '{failed[0]}' failed: "
                                 f"right max Re = {rmax:.3e}, lambda(0) = {lam_0:.3e}, "
                                 f"left max Re = {lmax:.3e}", rep)
    return rep


def region_margin(model, ss, lam):
    """Signed distance-like margin of ``lam`` from the essential spectrum.

    Right of both borders exactly ``m`` roots of ``d_plus(lam, .)`` lie
    right of ``Re nu = -eta_star`` and ``m`` roots of ``d_minus(lam, .)`` lie
    right of ``Re nu = 0``. The margin is the smallest distance of a root
    real part to its dividing line, negated when a count is off.
    """
    m = model.m
    out = np.inf
    for side, line in (("plus", -ss.eta_star), ("minus", 0.0)):
        r = polyroots(model.dispersion_poly(ss.c_star, lam, side))
        gap = float(np.min(np.abs(r.real - line)))
        if int(np.sum(r.real > line)) != m:
            gap = -gap
        out = min(out, gap)
    return out
