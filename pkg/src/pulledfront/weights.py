"""Exponential and algebraic weights and discrete weighted norms.

Both weights interpolate between their two plateaus on ``[-1, 1]`` with C1
ramps. The exponential weight uses

    sigma(x) = 0 (x <= -1),  (x+1)^2/4 (|x| <= 1),  x (x >= 1),

so ``omega_eta = exp(eta sigma)`` and products of exponential weights add
their rates exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarse

__all__ = ["sigma", "dsigma", "ramp", "dramp", "japanese", "ExponentialWeight",
           "AlgebraicWeight", "eval_exp_weight", "eval_alg_weight",
           "weighted_h1_norm", "weighted_inner"]


def sigma(x):
    x = np.asarray(x, dtype=float)
    return np.where(x <= -1, 0.0, np.where(x >= 1, x, 0.25 * (x + 1) ** 2))


def dsigma(x):
    x = np.asarray(x, dtype=float)
    return np.clip(0.5 * (x + 1), 0.0, 1.0)


def ramp(x):
    """C1 ramp from 0 (x <= -1) to 1 (x >= 1), piecewise quadratic."""
    x = np.asarray(x, dtype=float)
    left = 0.5 * (x + 1) ** 2
    right = 1.0 - 0.5 * (1 - x) ** 2
    return np.where(x <= -1, 0.0, np.where(x >= 1, 1.0, np.where(x < 0, left, right)))


def dramp(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) >= 1, 0.0, 1.0 - np.abs(x))


def japanese(x):
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


@dataclass(frozen=True)
class ExponentialWeight:
    eta: float

    def __call__(self, x):
        return eval_exp_weight(self, x)

    def log(self, x):
        """``eta * sigma(x)``, safe for large ``x``."""
        return self.eta * sigma(x)

    def log_derivative(self, x):
        return self.eta * dsigma(x)


@dataclass(frozen=True)
class AlgebraicWeight:
    r_minus: float
    r_plus: float

    def exponent(self, x):
        return self.r_minus + (self.r_plus - self.r_minus) * ramp(x)

    def __call__(self, x):
        return eval_alg_weight(self, x)


def eval_exp_weight(w, x):
    return np.exp(w.eta * sigma(x))


def eval_alg_weight(w, x):
    return japanese(x) ** w.exponent(x)


def _check_grid(x):
    x = np.asarray(x, dtype=float)
    if x.size < 8:
        raise GridTooCoarse(f"need at least 8 grid points, got {x.size}")
    return x


def _weight_values(x, weight):
    if weight is None:
        return np.ones_like(x)
    if isinstance(weight, (AlgebraicWeight, ExponentialWeight)):
        return weight(x)
    if callable(weight):
        return np.asarray(weight(x), dtype=float)
    return np.asarray(weight, dtype=float)


def weighted_h1_norm(x, g, weight=None, order=1):
    """Discrete ``|| rho g ||_{L^2} `` plus ``|| rho g' ||_{L^2}`` in quadrature.

    Parameters
    ----------
    x : ndarray
        Uniform grid.
    g : ndarray
        Grid function; a trailing axis of samples is allowed.
    weight : AlgebraicWeight, callable, array or None
        Multiplier applied outside the derivative.
    order : int
        0 for the weighted L2 norm, 1 for H1.

    Returns
    -------
    float or ndarray
    """
    x = _check_grid(x)
    g = np.asarray(g)
    rho = _weight_values(x, weight)
    if g.ndim > 1:
        rho = rho[:, None]
    dens = np.abs(rho * g) ** 2
    if order >= 1:
        dg = np.gradient(g, x, axis=0, edge_order=2)
        dens = dens + np.abs(rho * dg) ** 2
    return np.sqrt(np.trapezoid(dens, x, axis=0))


def weighted_inner(x, a, b, weight=None, order=1):
    """Inner product matching :func:`weighted_h1_norm` (conjugate-linear in ``a``)."""
    x = _check_grid(x)
    rho2 = _weight_values(x, weight) ** 2
    dens = np.conj(a) * b * rho2
    if order >= 1:
        da = np.gradient(a, x, edge_order=2)
        db = np.gradient(b, x, edge_order=2)
        dens = dens + np.conj(da) * db * rho2
    return np.trapezoid(dens, x)
