"""Nonlinear perturbations of the critical front and their decay rates.

The perturbation ``v = u - q`` is evolved in the weighted variable
``p = omega v``:

    p_t = L p + omega N(q, omega^{-1} p),
    N(q, v) = f(q + v) - f(q) - f'(q) v = sum_{j >= 2} b_j(q) v^j,

with ``b_j = f^{(j)} / j!``. Writing ``omega N = p sum_j b_j (e^{-eta sigma} p)^{j-1}``
only the decaying factor ``e^{-eta sigma}`` is ever formed. ``L`` is treated
implicitly and the nonlinearity explicitly (variable-step IMEX BDF2).
"""

from dataclasses import dataclass, field, asdict
from math import comb

import numpy as np

from .errors import BlowupDetected, GridMismatch, PsiUnavailable
from .operator import extract_R1, fit_power, weighted_norm
from .semigroup import integrate_bdf2
from .weights import AlgebraicWeight, japanese, ramp, sigma, weighted_inner

__all__ = ["PerturbationConfig", "DecayExperiment", "initial_data", "nonlinear_term",
           "classify_regime", "run_perturbation", "estimate_alpha_star",
           "amplitude_linearity", "localization_sweep"]

RECIPES = ("gaussian", "tail", "shifted-front")
TAIL_OFFSET = 0.6
BLOWUP_FACTOR = 1e3


@dataclass
class PerturbationConfig:
    """Initial data and measurement for one nonlinear run.

    Attributes
    ----------
    recipe : {"gaussian", "tail", "shifted-front"}
        ``gaussian``: ``amplitude exp(-((x - center) / width)^2)``;
        ``tail``: ``amplitude chi_+(x) <x>^{-r - 0.6}``;
        ``shifted-front``: ``omega (q(x - amplitude) - q(x))``.
    r : float
        Localization class of the data, ``||p0||_{H^1_r}`` is recorded.
    s : float or None
        Measurement weight; ``-r`` when None.
    """

    recipe: str = "gaussian"
    amplitude: float = 1e-2
    r: float = 2.0
    s: float = None
    T: float = 300.0
    center: float = 5.0
    width: float = 1.0
    t_fit_min: float = 10.0
    samples: int = 16
    rtol: float = 1e-7

    def __post_init__(self):
        if self.recipe not in RECIPES:
            raise ValueError(f"unknown recipe {self.recipe!r}; expected one of {RECIPES}")
        if self.T * 0.8 <= self.t_fit_min:
            raise ValueError("horizon too short for the fit window [t_fit_min, 0.8 T]")
        if self.samples < 12:
            raise ValueError("the decay fit needs at least 12 samples")

    @property
    def measure(self):
        return -self.r if self.s is None else self.s

    def output_times(self):
        early = np.geomspace(0.1, self.t_fit_min, 8, endpoint=False)
        fit = np.geomspace(self.t_fit_min, 0.8 * self.T, self.samples)
        late = np.geomspace(0.8 * self.T, self.T, 4)[1:]
        return np.unique(np.concatenate([early, fit, late]))


@dataclass
class DecayExperiment:
    config: PerturbationConfig
    times: np.ndarray
    norms: np.ndarray
    exponent: float
    stderr: float
    regime: str
    window: tuple
    passed: object
    initial_norm: float
    theta: np.ndarray
    k_ratio: np.ndarray
    snapshots: dict = field(repr=False, default_factory=dict)
    p_tilde: np.ndarray = field(repr=False, default=None)
    tail_bound: float = float("nan")
    steps: int = 0
    alpha_star: float = float("nan")
    remainder_slope: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def theta_growth(self):
        """``Theta(T) / Theta(t_fit_min)``; stays near one once the rate is reached."""
        i = int(np.searchsorted(self.times, self.config.t_fit_min))
        return float(self.theta[-1] / self.theta[i])

    def to_dict(self):
        lo, hi = self.window
        return {"config": asdict(self.config), "exponent": self.exponent, "stderr": self.stderr,
                "regime": self.regime, "window": [lo, hi], "passed": self.passed,
                "initial_norm": self.initial_norm, "theta_growth": self.theta_growth,
                "k_ratio_max": float(np.max(self.k_ratio)), "tail_bound": self.tail_bound,
                "steps": self.steps, "alpha_star": self.alpha_star,
                "remainder_slope": self.remainder_slope, **self.extra}

    def rows(self):
        """Time series ``(t, norm, theta, k_ratio)``."""
        return np.column_stack([self.times, self.norms, self.theta, self.k_ratio])


def initial_data(x, front, config):
    """Weighted initial perturbation ``p0`` on the grid ``x``."""
    a = config.amplitude
    if config.recipe == "gaussian":
        return a * np.exp(-((x - config.center) / config.width) ** 2)
    if config.recipe == "tail":
        return a * ramp(x - 1.0) * japanese(x) ** (-config.r - TAIL_OFFSET)
    # omega q(x - delta) - omega q(x); both grow linearly on the right
    return front.shifted(a) * np.exp(front.eta_star * sigma(x)) - front.w


def taylor_coefficients(f, q):
    """``b_j(q) = f^{(j)}(q) / j!`` for ``j = 0..deg f``, one row per ``j``."""
    f = np.asarray(f, dtype=float)
    d = f.size - 1
    q = np.asarray(q, dtype=float)
    return np.array([sum(f[k] * comb(k, j) * q ** (k - j) for k in range(j, d + 1))
                     for j in range(d + 1)])


def nonlinear_term(p, b, decay):
    """``omega N`` for weighted perturbation ``p``.

    ``b`` are Taylor coefficients from :func:`taylor_coefficients` and
    ``decay = exp(-eta sigma)``.
    """
    if b.shape[0] <= 2:
        return np.zeros_like(p)
    v = p * decay
    acc = b[-1]
    for j in range(b.shape[0] - 2, 1, -1):
        acc = acc * v + b[j]
    return acc * v * p


def classify_regime(r, s):
    """Decay regime for data in ``H^1_r`` measured in ``H^1_s``.

    Returns
    -------
    regime : str
        ``localized`` (``r > 3/2``, ``s = -r``), ``moderate``
        (``1/2 < r < 3/2``, ``s < r - 2``), ``minimal``
        (``-3/2 < r < 1/2``, ``s < r - 2``) or ``none``.
    best : float
        Supremum of the guaranteed decay exponent, NaN for ``none``.
    window : tuple
        Pass window for the fitted exponent.
    """
    if r > 1.5 and np.isclose(s, -r):
        return "localized", 1.5, (1.35, 1.7)
    if 0.5 < r < 1.5 and s < r - 2:
        best = 1 + (r - 1.5 + min(1.0, -0.5 - s)) / 2
        return "moderate", best, (best - 0.15, np.inf)
    if -1.5 < r < 0.5 and s < r - 2:
        best = 1 - (0.5 - r) / 2
        return "minimal", best, (best - 0.15, best + 0.25)
    return "none", float("nan"), (-np.inf, np.inf)


def run_perturbation(op, front, config, model=None, p0=None):
    """Evolve ``p = omega v`` and fit its decay in ``H^1_s``.

    Parameters
    ----------
    op : WeightedOperator
    front : FrontProfile
        Must share ``op``'s grid.
    config : PerturbationConfig
    p0 : ndarray, optional
        Weighted initial data replacing the recipe of ``config``.

    Returns
    -------
    DecayExperiment

    Raises
    ------
    GridMismatch, BlowupDetected, StepsizeUnderflow
    """
    if front.grid != op.grid:
        raise GridMismatch("front and operator live on different grids")
    model = model or op.model
    x = op.x
    if p0 is None:
        p0 = initial_data(x, front, config)
    elif np.shape(p0) != x.shape:
        raise GridMismatch("initial data does not match the grid")
    p0 = np.asarray(p0, dtype=float)
    b = taylor_coefficients(model.f, front.q)
    decay = np.exp(-front.eta_star * sigma(x))
    limit = BLOWUP_FACTOR * max(np.max(np.abs(p0)), 1e-300)
    acc = {"t": 0.0, "N": None, "int": np.zeros_like(p0)}

    def source(t, p):
        return nonlinear_term(p, b, decay)

    def monitor(t, p, N):
        if not np.all(np.isfinite(p)) or np.max(np.abs(p)) > limit:
            raise BlowupDetected(f"perturbation exceeded {BLOWUP_FACTOR:g} x its initial size at t = {t:.4g}")
        if acc["N"] is not None:
            acc["int"] += 0.5 * (t - acc["t"]) * (N + acc["N"])
        acc["t"], acc["N"] = t, N

    times = config.output_times()
    _, outputs, steps = integrate_bdf2(op, config.T, p0, source=source, callback=monitor,
                                       rtol=config.rtol, atol=1e-14 * max(config.amplitude, 1e-300),
                                       times=times)
    s = config.measure
    norms = np.array([weighted_norm(x, outputs[float(t)], s) for t in times])
    regime, best, window = classify_regime(config.r, s)
    sel = (times >= config.t_fit_min) & (times <= 0.8 * config.T + 1e-9)
    if np.all(norms[sel] > 0):
        slope, err = fit_power(times[sel], norms[sel])
    else:
        slope, err = -np.inf, 0.0
    exponent = -slope
    rate = best if np.isfinite(best) else 0.0
    theta = np.maximum.accumulate((1 + times) ** rate * norms)
    r = config.r
    k_ratio = np.array([
        weighted_norm(x, nonlinear_term(outputs[float(t)], b, decay), r)
        / max(weighted_norm(x, outputs[float(t)], -r) ** 2, 1e-300) for t in times])
    passed = bool(window[0] <= exponent <= window[1]) if regime != "none" else None
    # the nonlinearity decays at least like ||p||^2 ~ t^{-3}: bound the neglected tail by N(T) T / 2
    tail = weighted_norm(x, acc["N"], r) * config.T / 2 if acc["N"] is not None else 0.0
    return DecayExperiment(config, times, norms, float(exponent), float(err), regime, window,
                           passed, float(weighted_norm(x, p0, r)), theta, k_ratio,
                           {float(t): outputs[float(t)] for t in times}, p0 + acc["int"],
                           float(tail), steps)


def _coefficient(x, u, psi, weight):
    return float(weighted_inner(x, psi, u, weight).real / weighted_inner(x, psi, psi, weight).real)


def estimate_alpha_star(experiment, psi, op=None, r=None, window=(20.0, None), gamma0=0.02,
                        halvings=2):
    """Coefficient of the ``t^{-3/2} psi`` profile and decay of the remainder.

    ``kappa(t)``, the ``H^1_{-r}`` projection of ``p(t)`` on ``psi``, is fitted
    as ``kappa(t) t^{3/2} = alpha + beta / t`` over the window; the next
    term of the expansion decays like ``t^{-5/2}``. When
    ``op`` is given, ``alpha`` is also predicted from the first-order
    resolvent coefficient of ``p0 + int_0^T omega N`` at ``gamma0 2^-j``.

    Returns
    -------
    dict
        ``alpha_star``, ``remainder_slope``, ``remainder_stderr`` and, with
        ``op``, ``alpha_linear`` (one per ``gamma0`` halving),
        ``gamma_spread`` and ``prediction_error``.

    Raises
    ------
    PsiUnavailable
    """
    if psi is None:
        raise PsiUnavailable("no linearly growing kernel element; the gap condition fails")
    psi_v = getattr(psi, "psi", psi)
    cfg = experiment.config
    r = -cfg.measure if r is None else r
    x = op.x if op is not None else np.asarray(psi.x)
    weight = AlgebraicWeight(-r, -r)
    t0 = window[0]
    t1 = 0.8 * cfg.T if window[1] is None else window[1]
    ts = np.array([t for t in experiment.times if t0 <= t <= t1 + 1e-9])
    if ts.size < 4:
        raise ValueError("too few samples in the asymptotic window")
    kap = np.array([_coefficient(x, experiment.snapshots[float(t)], psi_v, weight) for t in ts])
    A = np.column_stack([np.ones_like(ts), 1.0 / ts])
    (alpha, _), *_ = np.linalg.lstsq(A, kap * ts ** 1.5, rcond=None)
    rem = np.array([weighted_norm(x, experiment.snapshots[float(t)] - alpha * t ** -1.5 * psi_v, -r)
                    for t in ts])
    slope, err = fit_power(ts, rem)
    out = {"alpha_star": float(alpha), "remainder_slope": slope, "remainder_stderr": err,
           "window": [float(t0), float(t1)]}
    if op is not None:
        preds = [extract_R1(op, psi_v, experiment.p_tilde, gamma0=gamma0 * 2.0 ** -j).coefficient
                 / (2 * np.sqrt(np.pi)) for j in range(halvings + 1)]
        out["alpha_linear"] = [float(a) for a in preds]
        out["gamma_spread"] = float((max(preds) - min(preds)) / abs(preds[-1]))
        out["prediction_error"] = float(abs(alpha - preds[-1]) / abs(preds[-1]))
    experiment.alpha_star = out["alpha_star"]
    experiment.remainder_slope = slope
    experiment.extra.update({k: v for k, v in out.items() if k not in ("alpha_star",)})
    return out


def amplitude_linearity(op, front, config, psi, **kwargs):
    """``alpha*`` at ``amplitude`` and ``amplitude / 2``.

    Returns
    -------
    dict
        Both estimates and ``ratio = alpha(eps / 2) / alpha(eps)``, which is
        1/2 to leading order in the amplitude.
    """
    full = run_perturbation(op, front, config)
    a_full = estimate_alpha_star(full, psi, **kwargs)["alpha_star"]
    half_cfg = PerturbationConfig(**{**asdict(config), "amplitude": config.amplitude / 2})
    half = run_perturbation(op, front, half_cfg)
    a_half = estimate_alpha_star(half, psi, **kwargs)["alpha_star"]
    ratio = a_half / a_full
    return {"alpha_full": a_full, "alpha_half": a_half, "ratio": float(ratio),
            "linearity_error": float(abs(ratio - 0.5) / 0.5), "experiments": (full, half)}


def localization_sweep(op, front, rs, ss, amplitude=1e-2, T=300.0, **config_kwargs):
    """Decay exponents for tail data ``chi_+ <x>^{-r - 0.6}`` measured in ``H^1_s``.

    ``rs`` and ``ss`` are paired entrywise.

    Returns
    -------
    dict
        ``rows`` (one dict per pair) and ``ordered``: whether the exponents
        increase strictly with the regime (minimal < moderate < localized).
    """
    if len(rs) != len(ss):
        raise ValueError("rs and ss must have equal length")
    rows = []
    for r, s in zip(rs, ss):
        cfg = PerturbationConfig(recipe="tail", amplitude=amplitude, r=float(r), s=float(s), T=T,
                                 **config_kwargs)
        exp = run_perturbation(op, front, cfg)
        regime, best, window = classify_regime(r, s)
        rows.append({"r": float(r), "s": float(s), "regime": regime, "best_rate": best,
                     "window": [window[0], window[1]], "exponent": exp.exponent,
                     "stderr": exp.stderr, "passed": exp.passed,
                     "theta_growth": exp.theta_growth})
    rank = {"minimal": 0, "moderate": 1, "localized": 2}
    ranked = [(rank[row["regime"]], row["exponent"]) for row in rows if row["regime"] in rank]
    ordered = all(a[1] < b[1] for a in ranked for b in ranked if a[0] < b[0])
    return {"rows": rows, "ordered": bool(ordered)}
