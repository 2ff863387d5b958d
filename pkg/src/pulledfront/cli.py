"""Command-line driver: ``pulledfront <subcommand> --config run.json``.

Every run writes ``<outdir>/<run-id>/manifest.json`` (resolved config and
file list), ``report.json`` and plot-ready CSV files. Exit status is 0 on
success, 2 when a hypothesis or verification check fails and 1 on errors.

Environment
-----------
PULLEDFRONT_OUTDIR
    Output directory when neither the config nor ``--outdir`` gives one.
PULLEDFRONT_THREADS
    Thread limit for the BLAS and LAPACK pools.
"""

import argparse
import copy
import hashlib
import json
import os
import sys
import tempfile

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import ConfigInvalid, HypothesisViolated, NotPinched, PulledFrontError, RootCollision
from .model import (ScalarModel, bistable, extended_fkpp, fisher_kpp, find_spreading_speed,
                    fredholm_border, region_margin, turing_amplitude, verify_pinching,
                    verify_spectrum_hypotheses, default_k_max)

SUBCOMMANDS = ("speed", "spectrum", "kernel", "front", "resolvent", "semigroup", "simulate",
               "sweep", "verify-all")

_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "model": {
            "type": "object",
            "oneOf": [
                {"required": ["preset"], "not": {"required": ["order"]}},
                {"required": ["order", "p", "f"], "not": {"required": ["preset"]}},
            ],
            "properties": {
                "preset": {"enum": ["fisher-kpp", "extended-fkpp", "bistable", "turing"]},
                "eps": _NUM, "mu": _NUM, "d": _NUM, "g0": _NUM,
                "order": {"type": "integer", "minimum": 2, "multipleOf": 2},
                "p": _NUMS, "f": _NUMS, "name": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {"L": {"type": "number", "exclusiveMinimum": 0},
                           "n": {"type": "integer", "minimum": 16, "maximum": 65536}},
            "additionalProperties": False,
        },
        "weights": {
            "type": "object",
            "properties": {"eta": {"type": ["number", "null"]}, "r_minus": _NUM, "r_plus": _NUM},
            "additionalProperties": False,
        },
        "experiment": {"type": "object"},
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}, "run_id": {"type": "string",
                                                               "pattern": "^[A-Za-z0-9._-]+$"}},
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS = {"grid": {"L": 200.0, "n": 8192}, "weights": {"eta": None, "r_minus": 2.0, "r_plus": 2.0},
            "experiment": {}, "output": {}, "seed": 0}


# -- configuration -------------------------------------------------------------

def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _set_path(cfg, assignment):
    key, sep, raw = assignment.partition("=")
    if not sep:
        raise ConfigInvalid(f"--set expects key=value, got {assignment!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigInvalid(f"--set {key}: {p} is not an object")
    node[parts[-1]] = value


def load_config(path, overrides=()):
    """Read, override and validate a run configuration.

    Raises
    ------
    ConfigInvalid
        With the offending line for syntax errors and the field path for
        schema violations.
    FileNotFoundError
    """
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"{path}: top level must be an object")
    for a in overrides:
        _set_path(raw, a)
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            field = ".".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{field}: {e.message}")
        raise ConfigInvalid(f"{path}: " + "; ".join(lines))
    return _merge(DEFAULTS, raw)


def build_model(block):
    preset = block.get("preset")
    if preset == "fisher-kpp":
        return fisher_kpp()
    if preset == "extended-fkpp":
        return extended_fkpp(block.get("eps", 0.1))
    if preset == "bistable":
        return bistable(block.get("mu", 0.4))
    if preset == "turing":
        return turing_amplitude(block.get("d", 4.5), block.get("g0", -4.0), block.get("eps", 0.1))
    return ScalarModel.from_dict(block)


# -- output --------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def _atomic_write(path, text):
    d = os.path.dirname(path)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def format_csv(header, rows):
    """CSV text with round-trip (17 significant digit) numbers."""
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(v if isinstance(v, str) else format(float(v), ".17g") for v in row))
    return "\n".join(out) + "\n"


class RunWriter:
    def __init__(self, outdir, run_id, subcommand, config):
        self.dir = os.path.join(outdir, run_id)
        os.makedirs(self.dir, exist_ok=True)
        self.files = []
        self.subcommand = subcommand
        self.config = config
        self.run_id = run_id

    def csv(self, name, header, rows):
        _atomic_write(os.path.join(self.dir, name), format_csv(header, rows))
        self.files.append(name)

    def finish(self, report, status):
        _atomic_write(os.path.join(self.dir, "report.json"),
                      json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
        manifest = {"subcommand": self.subcommand, "run_id": self.run_id, "status": status,
                    "version": __version__, "numpy": np.__version__,
                    "config": self.config, "files": sorted(self.files + ["report.json"])}
        _atomic_write(os.path.join(self.dir, "manifest.json"),
                      json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")


# -- shared setup ----------------------------------------------------------------

class Context:
    """Lazily computed objects shared by the subcommands."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.model = build_model(cfg["model"])
        self.exp = cfg["experiment"]
        self._ss = self._front = self._op = self._psi = None

    @property
    def ss(self):
        if self._ss is None:
            self._ss = find_spreading_speed(self.model)
        return self._ss

    @property
    def front(self):
        if self._front is None:
            from .front import solve_front
            g = self.cfg["grid"]
            self._front = solve_front(self.model, self.ss, L=g["L"], n=g["n"])
        return self._front

    @property
    def op(self):
        if self._op is None:
            from .operator import build_operator
            self._op = build_operator(self.model, self.ss, self.front)
        return self._op

    @property
    def psi(self):
        if self._psi is None:
            from .front import compute_psi
            self._psi = compute_psi(self.front, self.model, self.ss)
        return self._psi

    def gaussian(self, center=None, width=None):
        e = self.exp
        c = e.get("center", 5.0) if center is None else center
        w = e.get("width", 1.0) if width is None else width
        return np.exp(-((self.op.x - c) / w) ** 2)

    def ensemble(self, size):
        rng = np.random.default_rng(self.cfg["seed"])
        cs = rng.uniform(-5.0, 5.0, size)
        ws = rng.uniform(0.5, 3.0, size)
        return np.column_stack([self.gaussian(c, w) for c, w in zip(cs, ws)])


def _border_rows(model, ss, eta):
    k = np.linspace(-default_k_max(model), default_k_max(model), 801)
    rows = []
    for side, e in (("right", eta), ("left", 0.0)):
        lam = fredholm_border(model, ss.c_star, e, side, k)
        rows += [(side, kk, z.real, z.imag) for kk, z in zip(k, lam)]
    return rows


# -- subcommands -----------------------------------------------------------------

def cmd_speed(ctx, out):
    ss = ctx.ss
    try:
        pinched = verify_pinching(ctx.model, ss).pinched
    except (NotPinched, RootCollision):
        pinched = False
    rep = verify_spectrum_hypotheses(ctx.model, ss, raise_on_fail=False)
    out.csv("border.csv", ["side", "k", "re_lambda", "im_lambda"], _border_rows(ctx.model, ss, ss.eta_star))
    report = {"model": ctx.model.to_dict(), "speed": ss.to_dict(), "pinched": pinched,
              "spectrum": rep.to_dict()}
    return report, bool(pinched and rep.passed)


def cmd_spectrum(ctx, out):
    ss = ctx.ss
    eta = ctx.cfg["weights"]["eta"]
    rep = verify_spectrum_hypotheses(ctx.model, ss, eta=eta, raise_on_fail=False)
    out.csv("border.csv", ["side", "k", "re_lambda", "im_lambda"],
            _border_rows(ctx.model, ss, rep.eta))
    report = {"speed": ss.to_dict(), "spectrum": rep.to_dict()}
    ok = rep.passed
    if ctx.exp.get("point_spectrum", False):
        from .operator import eigen_scan
        eig = eigen_scan(ctx.op)
        report["eigen_scan"] = eig.to_dict()
        report["regime"] = eig.regime
        ok = ok and eig.regime == "all-clear"
    return report, ok


def cmd_kernel(ctx, out):
    from .kernel import (check_kernel_lemmas, eval_kernel_pieces, frobenius_projections,
                         shift_symbol)
    sym = shift_symbol(ctx.model, ctx.ss)
    gammas = ctx.exp.get("gammas", [0.1 * 2.0 ** -j for j in range(5)])
    x_max = ctx.exp.get("x_max", 50.0)
    orders = tuple(ctx.exp.get("orders", [0, 1]))
    x = np.linspace(-x_max, x_max, int(ctx.exp.get("points", 401)))
    rows = []
    for g in gammas:
        kd = eval_kernel_pieces(frobenius_projections(sym, g), sym, x, orders)
        for i, k in enumerate(orders):
            for j in range(x.size):
                rows.append([g, k, x[j]] + [v for piece in (kd.heat, kd.c_minus_heat, kd.c_tilde, kd.h)
                                            for v in (piece[i, j].real, piece[i, j].imag)])
    header = ["gamma", "order", "x"] + [f"{p}_{c}" for p in ("heat", "center", "c_tilde", "h")
                                        for c in ("re", "im")]
    out.csv("kernel.csv", header, rows)
    lem = check_kernel_lemmas(sym, gammas, raise_on_fail=False)
    ok = all(lem.bounded.values())
    return {"symbol": {"c": sym.c_coeffs, "alpha": sym.alpha, "nu0": sym.nu0},
            "lemmas": lem.to_dict()}, ok


def cmd_front(ctx, out):
    from .front import front_decay_fit, gap_condition
    from .errors import GapFails, WindowUnderflow
    fr = ctx.front
    report = {"speed": ctx.ss.to_dict(), "residual": fr.residual, "iterations": fr.iterations,
              "monotone": fr.monotone, "gap_condition": gap_condition(ctx.model, ctx.ss)}
    try:
        a, b, res = front_decay_fit(fr, tuple(ctx.exp.get("window", (10.0, 30.0))))
        report["decay_fit"] = {"a": a, "b": b, "relative_misfit": res}
    except WindowUnderflow as exc:
        report["decay_fit"] = {"error": str(exc)}
    try:
        psi = ctx.psi.psi
        report["psi"] = {"mu0": ctx.psi.mu0, "scale": ctx.psi.scale}
    except GapFails as exc:
        psi = np.full(fr.x.size, np.nan)
        report["psi"] = {"error": str(exc)}
    out.csv("profile.csv", ["x", "q", "dq", "psi"],
            zip(fr.x, fr.q, fr.dq, psi))
    return report, fr.monotone


def cmd_resolvent(ctx, out):
    from .operator import verify_R0_lipschitz, extract_R1
    g = ctx.gaussian()
    lip = verify_R0_lipschitz(ctx.op, g, r=ctx.exp.get("r", 2.0))
    out.csv("lipschitz.csv", ["gamma", "difference_norm"], zip(lip["gammas"], lip["diffs"]))
    report = {"lipschitz": lip}
    ok = 0.9 <= lip["slope"] <= 1.1
    try:
        r1 = extract_R1(ctx.op, ctx.psi, g)
        report["R1"] = r1.to_dict()
    except PulledFrontError as exc:
        report["R1"] = {"error": str(exc)}
    return report, ok


def cmd_semigroup(ctx, out):
    from .semigroup import (fit_border_tangency, tangent_contour, verify_semigroup_asymptotics)
    e = ctx.exp
    times = np.geomspace(e.get("t_min", 20.0), e.get("t_max", 200.0), int(e.get("samples", 16)))
    res = verify_semigroup_asymptotics(ctx.op, ctx.psi, ctx.gaussian(), r=e.get("r", 2.6),
                                       times=times, window=(times[0], times[-1]))
    pred = np.abs(res["alpha_linear"]) * times ** -1.5 * \
        np.array([_psi_norm(ctx, e.get("r", 2.6))] * times.size)
    out.csv("semigroup.csv", ["t", "norm", "predicted_norm", "remainder"],
            zip(times, res["norms"], pred, res["remainder"]))
    fit = fit_border_tangency(ctx.model, ctx.ss)
    spec = tangent_contour(ctx.model, ctx.ss, fit=fit)
    a = np.linspace(0.0, spec.a_star, 64)
    gam = spec.eps + 1j * a + spec.c2 * a * a
    margin = [region_margin(ctx.model, ctx.ss, z * z) if aa > 0 else 0.0 for aa, z in zip(a, gam)]
    out.csv("contour.csv", ["a", "re_gamma", "im_gamma", "border_margin"],
            zip(a, gam.real, gam.imag, margin))
    lo, hi = e.get("slope_window", [-2.4, -1.6])
    report = {"asymptotics": {k: v for k, v in res.items() if k not in ("times",)},
              "contour": {"a_star": spec.a_star, "c2": spec.c2, "ray_angle": spec.ray_angle}}
    return report, bool(lo <= res["remainder_slope"] <= hi)


def _psi_norm(ctx, r):
    from .operator import weighted_norm
    return weighted_norm(ctx.op.x, ctx.psi.psi, -r)


def _perturbation_config(exp):
    from .simulate import PerturbationConfig
    keys = PerturbationConfig.__dataclass_fields__
    unknown = set(exp) - set(keys) - {"estimate_alpha"}
    if unknown:
        raise ConfigInvalid(f"experiment: unknown field(s) {sorted(unknown)}")
    return PerturbationConfig(**{k: v for k, v in exp.items() if k in keys})


def cmd_simulate(ctx, out):
    from .simulate import run_perturbation, estimate_alpha_star
    cfg = _perturbation_config(ctx.exp)
    exp = run_perturbation(ctx.op, ctx.front, cfg)
    if ctx.exp.get("estimate_alpha", cfg.r > 2.5):
        estimate_alpha_star(exp, ctx.psi, op=ctx.op)
    out.csv("timeseries.csv", ["t", "norm", "theta", "k_ratio"], exp.rows())
    ok = exp.passed is not False
    if ctx.exp.get("estimate_alpha", cfg.r > 2.5):
        ok = ok and -2.4 <= exp.remainder_slope <= -1.6
    return {"experiment": exp.to_dict()}, ok


def cmd_sweep(ctx, out):
    from .simulate import localization_sweep
    e = ctx.exp
    rs = e.get("r", [1.0, 0.0, 2.0])
    ss = e.get("s", [-1.5, -3.0, -2.0])
    res = localization_sweep(ctx.op, ctx.front, rs, ss, amplitude=e.get("amplitude", 1e-2),
                             T=e.get("T", 300.0))
    out.csv("sweep.csv", ["r", "s", "exponent", "stderr", "window_low", "window_high"],
            [(row["r"], row["s"], row["exponent"], row["stderr"], row["window"][0],
              row["window"][1]) for row in res["rows"]])
    ok = res["ordered"] and all(row["passed"] is not False for row in res["rows"])
    return res, ok


def cmd_verify_all(ctx, out):
    """Hypotheses, kernel estimates, resolvent, linear decay and one nonlinear run."""
    from .kernel import check_kernel_lemmas, shift_symbol
    from .operator import verify_R0_lipschitz, weighted_norm, fit_power
    from .semigroup import apply_semigroup_timestep, verify_semigroup_asymptotics
    from .simulate import PerturbationConfig, run_perturbation
    checks = {}
    rep = verify_spectrum_hypotheses(ctx.model, ctx.ss, raise_on_fail=False)
    checks["hypotheses"] = {"passed": rep.passed, **rep.to_dict()}
    try:
        pinched = verify_pinching(ctx.model, ctx.ss).pinched
    except (NotPinched, RootCollision):
        pinched = False
    checks["pinching"] = {"passed": bool(pinched)}
    lem = check_kernel_lemmas(shift_symbol(ctx.model, ctx.ss), [0.1 * 2.0 ** -j for j in range(5)],
                              raise_on_fail=False)
    checks["kernel"] = {"passed": all(lem.bounded.values()), **lem.to_dict()}
    g = ctx.gaussian()
    lip = verify_R0_lipschitz(ctx.op, g)
    checks["lipschitz"] = {"passed": bool(0.9 <= lip["slope"] <= 1.1), **lip}
    times = np.geomspace(10.0, 300.0, 16)
    G = ctx.ensemble(int(ctx.exp.get("ensemble", 8)))
    x = ctx.op.x
    gn = np.array([weighted_norm(x, G[:, j], 2.0) for j in range(G.shape[1])])
    s = apply_semigroup_timestep(ctx.op, times[-1], G, times=times)
    env = np.array([max(weighted_norm(x, s.info["outputs"][float(t)][:, j], -2.0) / gn[j]
                        for j in range(G.shape[1])) for t in times])
    slope, err = fit_power(times, env)
    checks["linear_decay"] = {"passed": bool(-1.7 <= slope <= -1.35), "slope": slope, "stderr": err}
    asym = verify_semigroup_asymptotics(ctx.op, ctx.psi, g)
    checks["asymptotics"] = {"passed": bool(-2.4 <= asym["remainder_slope"] <= -1.6),
                             "remainder_slope": asym["remainder_slope"], "kappa": asym["kappa"]}
    exp = run_perturbation(ctx.op, ctx.front, PerturbationConfig(recipe="tail", r=2.0))
    checks["nonlinear"] = {"passed": bool(exp.passed), "exponent": exp.exponent,
                           "theta_growth": exp.theta_growth}
    out.csv("checks.csv", ["check", "passed"], [(k, str(v["passed"])) for k, v in checks.items()])
    return {"checks": checks}, all(v["passed"] for v in checks.values())


COMMANDS = {"speed": cmd_speed, "spectrum": cmd_spectrum, "kernel": cmd_kernel,
            "front": cmd_front, "resolvent": cmd_resolvent, "semigroup": cmd_semigroup,
            "simulate": cmd_simulate, "sweep": cmd_sweep, "verify-all": cmd_verify_all}


def _parser():
    p = argparse.ArgumentParser(prog="pulledfront", description=__doc__.split("\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--outdir", help="output directory (overrides config and environment)")
    p.add_argument("--run-id", help="run identifier; defaults to a hash of the resolved config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. grid.n=4096 (value parsed as JSON)")
    return p


def run_id_for(subcommand, cfg):
    digest = hashlib.sha256(json.dumps(_jsonable(cfg), sort_keys=True).encode()).hexdigest()
    return f"{subcommand}-{digest[:12]}"


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
    except (OSError, ConfigInvalid) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    outdir = (args.outdir or cfg["output"].get("dir") or os.environ.get("PULLEDFRONT_OUTDIR")
              or "runs")
    run_id = args.run_id or cfg["output"].get("run_id") or run_id_for(args.subcommand, cfg)
    threads = os.environ.get("PULLEDFRONT_THREADS")
    try:
        limit = int(threads) if threads else None
    except ValueError:
        print(f"error: PULLEDFRONT_THREADS must be an integer, got {threads!r}", file=sys.stderr)
        return 1
    try:
        with threadpool_limits(limits=limit):
            ctx = Context(cfg)
            writer = RunWriter(outdir, run_id, args.subcommand, cfg)
            try:
                report, ok = COMMANDS[args.subcommand](ctx, writer)
            except HypothesisViolated as exc:
                report, ok = {"hypothesis_violated": exc.clause, "message": str(exc)}, False
            writer.finish(report, "passed" if ok else "failed")
    except (PulledFrontError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(os.path.join(outdir, run_id))
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
