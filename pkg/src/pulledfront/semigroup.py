"""Linear evolution ``e^{Lt}`` by contour quadrature and by implicit time-stepping.

The contour route integrates ``e^{lambda t} (lambda - L)^{-1} g`` over a
curve left of which all spectrum lies. For real data the lower half is the
mirror image of the upper half, so only the upper half is integrated and
``e^{Lt} g = Im(J) / pi`` with ``J`` the upper-half integral.

The tangent contour is parameterized in ``gamma = sqrt(lambda)`` as
``gamma(a) = eps + i a + c2 a^2`` near the origin and continued by a
straight ray in ``lambda``. The keyhole contour is a circle of radius
``c0 / t`` with two rays.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import TangencyFitFailed, QuadratureUnconverged, StepsizeUnderflow
from .model import fredholm_border, region_margin
from .operator import resolve, weighted_norm, extract_R1, fit_power

__all__ = ["ContourSpec", "TangencyFit", "SemigroupSample", "fit_border_tangency",
           "tangent_contour", "keyhole_contour", "apply_semigroup_contour",
           "apply_semigroup_timestep", "verify_semigroup_asymptotics", "keyhole_decay",
           "contour_nodes", "integrate_bdf2"]

LOG_EPS = 37.0  # exp(-37) < 1e-16


@dataclass(frozen=True)
class TangencyFit:
    gamma1: float
    gamma2: float
    c2_border: float
    c2: float
    a_star: float


@dataclass(frozen=True)
class ContourSpec:
    """Upper half of a contour; see module docstring.

    ``kind`` is ``"tangent"`` (uses ``a_star``, ``c2``, ``eps``) or
    ``"keyhole"`` (uses ``c0``, ``phi0``). ``ray_angle`` is the direction of
    the straight continuation in the ``lambda`` plane.
    """

    kind: str
    ray_angle: float
    nodes: int = 64
    a_star: float = 0.5
    c2: float = 0.1
    eps: float = 0.0
    c0: float = 1.0
    phi0: float = 2 * np.pi / 3


def fit_border_tangency(model, ss, a_star=0.5, safety=0.1, k_fit=0.05, samples=40,
                        checks=200, max_halvings=12):
    """Quadratic tangency of the weighted border in the ``gamma`` plane.

    The right border ``lambda(k)`` is mapped by the principal square root and
    ``gamma(k) = i gamma1 k + gamma2 k^2 + O(k^3)`` is fitted on both
    branches. The contour coefficient is ``c2 = max(gamma2 / gamma1^2, 0) +
    safety``; ``a_star`` is halved until every sampled arc node lies strictly
    inside the resolvent set.

    Raises
    ------
    TangencyFitFailed
    """
    if a_star <= 0:
        raise TangencyFitFailed("empty arc")
    k = np.linspace(k_fit / samples, k_fit, samples)
    c2b, g1s, g2s = [], [], []
    for sgn in (1.0, -1.0):
        lam = fredholm_border(model, ss.c_star, ss.eta_star, "right", sgn * k).astype(complex)
        gam = np.sqrt(lam)
        im = np.abs(gam.imag)
        # Re gamma = c2b (Im gamma)^2 + O(|Im gamma|^3) along the mapped border
        cb = np.linalg.lstsq(np.column_stack([im ** 2, im ** 3]), gam.real, rcond=None)[0][0]
        gamma1 = np.linalg.lstsq(np.column_stack([k, k ** 2]), im, rcond=None)[0][0]
        if gamma1 <= 0:
            raise TangencyFitFailed("border is not tangent to the imaginary axis")
        c2b.append(cb)
        g1s.append(gamma1)
        g2s.append(cb * gamma1 ** 2)
    c2b = max(c2b)
    g1, g2 = float(np.mean(g1s)), float(max(g2s))
    c2 = max(c2b, 0.0) + safety
    for _ in range(max_halvings):
        a = np.linspace(a_star / checks, a_star, checks)
        ok = True
        for sgn in (1.0, -1.0):
            lam = (1j * sgn * a + c2 * a * a) ** 2
            if min(region_margin(model, ss, z) for z in lam) <= 0:
                ok = False
                break
        if ok:
            return TangencyFit(float(g1), float(g2), float(c2b), float(c2), float(a_star))
        a_star *= 0.5
    raise TangencyFitFailed("no arc length keeps the contour off the border")


def _ray_angle(model, ss, lam0, t_min, theta=3 * np.pi / 4, checks=60, tries=10):
    """Steepen the ray until its sampled points stay in the resolvent set."""
    for _ in range(tries):
        S = _ray_length(lam0, theta, t_min)
        s = np.linspace(0.0, S, checks)[1:]
        pts = lam0 + s * np.exp(1j * theta)
        if min(region_margin(model, ss, z) for z in pts) > 0:
            return theta
        theta = 0.5 * (theta + np.pi / 2)
    raise TangencyFitFailed("no admissible ray direction")


def _ray_length(lam0, theta, t):
    """Length after which ``exp(Re lambda t)`` is below machine precision."""
    return max((LOG_EPS + lam0.real * t) / (abs(np.cos(theta)) * t), 1.0)


def tangent_contour(model, ss, t_min=1.0, eps=0.0, nodes=64, fit=None):
    if fit is None:
        fit = fit_border_tangency(model, ss)
    gam_end = eps + 1j * fit.a_star + fit.c2 * fit.a_star ** 2
    theta = _ray_angle(model, ss, gam_end ** 2, t_min)
    return ContourSpec("tangent", theta, nodes, fit.a_star, fit.c2, eps)


def keyhole_contour(model, ss, t_min=1.0, c0=1.0, phi0=2 * np.pi / 3, nodes=64):
    theta = _ray_angle(model, ss, (c0 / t_min) * np.exp(1j * phi0), t_min, theta=phi0)
    return ContourSpec("keyhole", theta, nodes, c0=c0, phi0=theta)


def _gauss(n, a, b):
    z, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * z + 0.5 * (b + a), 0.5 * (b - a) * w


def contour_nodes(spec, t, nodes=None, panels=2):
    """Nodes ``lambda_j`` and weights ``w_j`` of the upper half, ``dlambda`` included."""
    n = spec.nodes if nodes is None else nodes
    lam, wts = [], []
    if spec.kind == "tangent":
        edges = np.linspace(0.0, spec.a_star, panels + 1)
        for a0, a1 in zip(edges[:-1], edges[1:]):
            a, w = _gauss(n, a0, a1)
            g = spec.eps + 1j * a + spec.c2 * a * a
            lam.append(g * g)
            wts.append(w * 2 * g * (1j + 2 * spec.c2 * a))
        lam_end = (spec.eps + 1j * spec.a_star + spec.c2 * spec.a_star ** 2) ** 2
    elif spec.kind == "keyhole":
        rad = spec.c0 / t
        edges = np.linspace(0.0, spec.phi0, panels + 1)
        for p0, p1 in zip(edges[:-1], edges[1:]):
            p, w = _gauss(n, p0, p1)
            z = rad * np.exp(1j * p)
            lam.append(z)
            wts.append(w * 1j * z)
        lam_end = rad * np.exp(1j * spec.phi0)
    else:
        raise ValueError(f"unknown contour kind {spec.kind!r}")
    S = _ray_length(lam_end, spec.ray_angle, t)
    # the integrand decays exponentially along the ray: grade the panels
    edges = S * np.array([0.0, 0.05, 0.2, 0.5, 1.0])
    e = np.exp(1j * spec.ray_angle)
    for s0, s1 in zip(edges[:-1], edges[1:]):
        s, w = _gauss(n, s0, s1)
        lam.append(lam_end + s * e)
        wts.append(w * e)
    return np.concatenate(lam), np.concatenate(wts)


@dataclass
class SemigroupSample:
    t: float
    g: np.ndarray
    u: np.ndarray
    method: str
    info: dict = field(default_factory=dict)

    def norm(self, x, r, order=1):
        return weighted_norm(x, self.u, r, order)


def _contour_sum(op, spec, t, g, nodes):
    lam, w = contour_nodes(spec, t, nodes)
    J = 0.0
    for z, wz in zip(lam, w):
        gam = np.sqrt(z)
        if gam.real < 0:
            gam = -gam
        u = resolve(op, gam, g).u
        # (lambda - L)^{-1} = -(L - gamma^2)^{-1}
        J = J - wz * np.exp(z * t) * u
    return np.imag(J) / np.pi


def apply_semigroup_contour(op, spec, t, g, rtol=1e-6, max_doublings=3, norm_r=-2.0):
    """``e^{Lt} g`` by composite Gauss-Legendre quadrature on ``spec``.

    The node count is doubled until the ``H^1_{norm_r}`` change is below
    ``rtol``.

    Raises
    ------
    QuadratureUnconverged
    """
    n = spec.nodes
    prev = _contour_sum(op, spec, t, g, n)
    for _ in range(max_doublings):
        n *= 2
        cur = _contour_sum(op, spec, t, g, n)
        scale = max(weighted_norm(op.x, cur, norm_r), 1e-300)
        change = weighted_norm(op.x, cur - prev, norm_r) / scale
        if change <= rtol:
            return SemigroupSample(t, g, cur, "contour", {"nodes": n, "change": change})
        prev = cur
    raise QuadratureUnconverged(f"relative change {change:.3e} with {n} nodes")


def _factor(A, B, beta_dt):
    return spla.splu((B - beta_dt * A).tocsc())


def _interp3(tt, uu, s):
    l0 = (s - tt[1]) * (s - tt[2]) / ((tt[0] - tt[1]) * (tt[0] - tt[2]))
    l1 = (s - tt[0]) * (s - tt[2]) / ((tt[1] - tt[0]) * (tt[1] - tt[2]))
    l2 = (s - tt[0]) * (s - tt[1]) / ((tt[2] - tt[0]) * (tt[2] - tt[1]))
    return l0 * uu[0] + l1 * uu[1] + l2 * uu[2]


def integrate_bdf2(op, t, g, source=None, callback=None, rtol=1e-8, atol=1e-14, dt0=1e-4,
                   dt_max=5.0, times=None, max_steps=200000):
    """Integrate ``u_t = L u + N(u)`` by variable-step BDF2 with a backward Euler start.

    ``L`` is implicit; the optional ``source`` ``N`` is explicit, extrapolated
    linearly from the last two accepted states. The local error is the Milne
    estimate ``2/11 |corrector - quadratic predictor|``. The step is only
    rescaled when the proposed change is below 0.7 or above 1.6, so
    factorizations are reused.

    Parameters
    ----------
    source : callable, optional
        ``source(t, u)``; called once per accepted state.
    callback : callable, optional
        ``callback(t, u, N)`` after every accepted step.
    times : array_like, optional
        Output times in ``[0, t]``; values are interpolated quadratically.

    Returns
    -------
    final : ndarray
    outputs : dict
        Maps each requested time to the state.
    steps : int

    Raises
    ------
    StepsizeUnderflow
    """
    g = np.asarray(g, dtype=float)
    pending = sorted(float(s) for s in ([] if times is None else times))
    outputs = {}
    if t == 0:
        return g.copy(), {s: g.copy() for s in pending}, 0
    A = op.system(0.0).real.tocsr()
    B = op.mass()
    Bd = B.diagonal()
    if g.ndim > 1:
        Bd = Bd[:, None]
    interior = slice(op.m, op.n - op.m)

    def rate(s, u):
        return np.zeros_like(u) if source is None else source(s, u)

    hist_t, hist_u = [0.0], [g.copy()]
    hist_N = [rate(0.0, g)]
    if callback is not None:
        callback(0.0, g, hist_N[0])
    dt = min(dt0, t)
    lu = _factor(A, B, dt)
    u1 = lu.solve(Bd * (g + dt * hist_N[0]))
    hist_t.append(dt)
    hist_u.append(u1)
    hist_N.append(rate(dt, u1))
    if callback is not None:
        callback(dt, u1, hist_N[-1])
    steps, lu_key = 1, None

    def emit(upto):
        while pending and pending[0] <= upto + 1e-12:
            s = pending.pop(0)
            if len(hist_t) < 3 or s <= hist_t[0]:
                j = int(np.argmin(np.abs(np.array(hist_t) - s)))
                outputs[s] = hist_u[j]
            else:
                outputs[s] = _interp3(hist_t, hist_u, s)

    emit(dt)
    dt_prev = dt
    while hist_t[-1] < t - 1e-14:
        if steps >= max_steps:
            raise StepsizeUnderflow("step budget exhausted")
        dt = min(dt, t - hist_t[-1])
        w = dt / dt_prev
        beta = (1 + w) / (1 + 2 * w)
        if (dt, w) != lu_key:
            lu = _factor(A, B, beta * dt)
            lu_key = (dt, w)
        a1 = (1 + w) ** 2 / (1 + 2 * w)
        a0 = w * w / (1 + 2 * w)
        un, um = hist_u[-1], hist_u[-2]
        Nx = (1 + w) * hist_N[-1] - w * hist_N[-2]
        unew = lu.solve(Bd * (a1 * un - a0 * um + beta * dt * Nx))
        if len(hist_t) >= 3:
            p = _interp3(hist_t, hist_u, hist_t[-1] + dt)
            err = (2.0 / 11.0) * np.max(np.abs((unew - p)[interior]))
        else:
            err = 0.0
        ratio = err / (atol + rtol * np.max(np.abs(unew)))
        if ratio > 1.0:
            dt *= max(0.2, 0.9 * ratio ** (-1.0 / 3.0))
            if dt < 1e-12:
                raise StepsizeUnderflow(f"dt = {dt:.3e} at t = {hist_t[-1]:.4g}")
            continue
        tn = hist_t[-1] + dt
        Nn = rate(tn, unew)
        hist_t.append(tn)
        hist_u.append(unew)
        hist_N.append(Nn)
        if len(hist_u) > 3:
            hist_u.pop(0)
            hist_t.pop(0)
            hist_N.pop(0)
        steps += 1
        if callback is not None:
            callback(tn, unew, Nn)
        emit(tn)
        dt_prev = dt
        fac = 0.9 * ratio ** (-1.0 / 3.0) if ratio > 0 else 2.0
        if fac < 0.7 or fac > 1.6:
            dt = min(dt * min(fac, 2.0), dt_max)
    emit(t)
    return hist_u[-1], outputs, steps


def apply_semigroup_timestep(op, t, g, rtol=1e-8, atol=1e-14, dt0=1e-4, dt_max=5.0,
                             times=None, max_steps=200000):
    """``e^{Lt} g`` by :func:`integrate_bdf2` without a source.

    ``g`` may carry a trailing axis of independent right-hand sides.

    Returns
    -------
    SemigroupSample
        ``u`` at ``t``; ``info["outputs"]`` maps the requested times to values.

    Raises
    ------
    StepsizeUnderflow
    """
    g = np.asarray(g, dtype=float)
    u, outputs, steps = integrate_bdf2(op, t, g, rtol=rtol, atol=atol, dt0=dt0, dt_max=dt_max,
                                       times=times, max_steps=max_steps)
    return SemigroupSample(float(t), g, u, "timestep", {"outputs": outputs, "steps": steps})


def verify_semigroup_asymptotics(op, psi, g, r=2.6, times=None, window=(20.0, 200.0),
                                 gamma0=0.02):
    """Leading ``t^{-3/2}`` profile and the decay of the remainder.

    The prediction is ``kappa / (2 sqrt(pi)) t^{-3/2} psi`` with ``kappa``
    the first-order resolvent coefficient of ``g``. The remainder measured
    in ``H^1_{-r}`` decays like ``t^{-(r + 3/2) / 2}`` for exponentially
    localized ``g`` (the ``gamma^2`` term of the resolvent integrates to
    zero), so ``r`` just above 5/2 exhibits the ``t^{-2}`` rate.

    Returns
    -------
    dict
        ``kappa``, remainder norms and their fitted slope.
    """
    psi_v = getattr(psi, "psi", psi)
    if times is None:
        times = np.geomspace(window[0], window[1], 16)
    R1 = extract_R1(op, psi_v, g, r=r, gamma0=gamma0)
    sample = apply_semigroup_timestep(op, float(max(times)), g, times=times)
    outs = sample.info["outputs"]
    pred_c = R1.coefficient / (2 * np.sqrt(np.pi))
    norms, rem = [], []
    for s in times:
        u = outs[float(s)]
        norms.append(weighted_norm(op.x, u, -r))
        rem.append(weighted_norm(op.x, u - pred_c * s ** -1.5 * psi_v, -r))
    sel = (times >= window[0]) & (times <= window[1])
    slope, err = fit_power(times[sel], np.array(rem)[sel])
    lead, _ = fit_power(times[sel], np.array(norms)[sel])
    return {"kappa": R1.coefficient, "alpha_linear": pred_c, "times": times,
            "norms": np.array(norms), "remainder": np.array(rem), "remainder_slope": slope,
            "remainder_stderr": err, "leading_slope": lead}


def keyhole_decay(op, g, s, times, window=(10.0, 300.0), beta_max=None, margin=0.15,
                  spot_times=(), contour=None):
    """Decay exponent of ``|| e^{Lt} g ||_{H^1_s}`` for weakly localized data.

    Time-stepping gives the trajectory. For each entry of ``spot_times`` the
    keyhole contour value is computed as a cross-check.

    Returns
    -------
    dict
        ``exponent`` (positive for decay), ``threshold`` ``1 - beta_max / 2
        - margin`` when ``beta_max`` is given, and contour spot checks.
    """
    times = np.asarray(times, dtype=float)
    sample = apply_semigroup_timestep(op, float(times.max()), g, times=times)
    outs = sample.info["outputs"]
    norms = np.array([weighted_norm(op.x, outs[float(t)], s) for t in times])
    sel = (times >= window[0]) & (times <= window[1])
    slope, err = fit_power(times[sel], norms[sel])
    out = {"times": times, "norms": norms, "exponent": -slope, "stderr": err}
    if beta_max is not None:
        out["threshold"] = 1 - beta_max / 2 - margin
        out["passed"] = bool(-slope >= out["threshold"])
    spots = []
    for ts in spot_times:
        spec = contour or keyhole_contour(op.model, op.ss, t_min=ts)
        cu = apply_semigroup_contour(op, spec, ts, g, norm_r=s).u
        ref = outs[float(ts)] if float(ts) in outs else apply_semigroup_timestep(op, ts, g).u
        spots.append({"t": float(ts), "relative_difference":
                      float(weighted_norm(op.x, cu - ref, s) / weighted_norm(op.x, ref, s))})
    out["spot_checks"] = spots
    return out
