"""Command-line front end.

    melnikov-sign classify --alpha 1 --eta 1
    melnikov-sign zeros --config p1.json
    melnikov-sign orbit --config p1.json --epsilon 1e-3 --phi-seed 0
    melnikov-sign reproduce-p1 --n 2

Exit codes: 0 success, 1 computational failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .closed_form import tau0, v_of
from .errors import (
    MelnikovError,
    NewtonDivergence,
    NoPeriodAnnulus,
    ParseError,
    SimulationError,
    TimeLimitExceeded,
)
from .melnikov import melnikov, melnikov_grid, melnikov_values, thread_count
from .model import Parameters, annulus_info, classify
from .numerics import DEFAULT_TOL, ToleranceConfig, loglog_slope
from .perturbation import PerturbationExpr, check_periodicity, parse
from .simulator import (
    ExtendedPoint,
    continuation,
    delta3_tilde,
    find_periodic_orbit,
    flow_concat,
)

DEFAULT_VERIFY_EPS = (1e-2, 5e-3, 2.5e-3, 1.25e-3)


class UsageError(Exception):
    """Bad flags or configuration (exit code 2)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_schema(name: str) -> dict:
    text = resources.files("melnikov_sign").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class ModelConfig:
    alpha: float
    eta: float
    sigma: float = 2.0 * math.pi
    f: str = "0"
    epsilon: float = 0.0

    def parameters(self, epsilon: float | None = None) -> Parameters:
        eps = self.epsilon if epsilon is None else epsilon
        return Parameters(self.alpha, self.eta, self.sigma, eps)

    def perturbation(self) -> PerturbationExpr:
        return parse(self.f)


def build_config(args) -> ModelConfig:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
        try:
            jsonschema.validate(data, load_schema("config"))
        except jsonschema.ValidationError as exc:
            raise UsageError(f"config {args.config}: {exc.message}") from None
    for key in ("alpha", "eta", "sigma", "f", "epsilon"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    missing = [k for k in ("alpha", "eta") if k not in data]
    if missing:
        raise UsageError(f"missing {', '.join(missing)} (give --config or flags)")
    cfg = ModelConfig(**{k: data[k] for k in ("alpha", "eta", "sigma", "f", "epsilon") if k in data})
    try:
        cfg.parameters()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def build_tol(args) -> ToleranceConfig:
    changes = {}
    for item in getattr(args, "tol", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects KEY=VALUE, got {item!r}")
        changes[key.strip()] = value.strip()
    try:
        return DEFAULT_TOL.override(**changes)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    except ValueError as exc:
        raise UsageError(f"bad --tol value: {exc}") from None


def _expr(cfg: ModelConfig) -> PerturbationExpr:
    try:
        f = cfg.perturbation()
    except ParseError as exc:
        raise UsageError(f"f: {exc}") from None
    if not check_periodicity(f, cfg.sigma):
        print(f"warning: f = {cfg.f!r} does not look {cfg.sigma!r}-periodic in t", file=sys.stderr)
    return f


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _json_num(x: float):
    return float(x) if math.isfinite(x) else None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(payload: dict, out: str | None, schema: str) -> None:
    jsonschema.validate(payload, load_schema(schema))
    _emit(json.dumps(payload, indent=2) + "\n", out)


def _csv(header, rows, trailer: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    if trailer:
        buf.write(f"# {trailer}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _interval(iv):
    return [_json_num(iv[0]), _json_num(iv[1])]


def _fmt_interval(iv) -> str:
    return f"({iv[0]:g},{iv[1]:g})"


def cmd_classify(args) -> int:
    alpha = args.alpha
    eta = args.eta
    if alpha is None or eta is None:
        cfg = build_config(args)
        alpha, eta = cfg.alpha, cfg.eta
    case = classify(alpha, eta)
    payload = {"case": case.tag.value, "index": case.index, "description": case.describe(),
               "annulus": None}
    text = case.describe()
    try:
        info = annulus_info(case)
    except NoPeriodAnnulus:
        pass
    else:
        payload["annulus"] = {"D": _interval(info.domain_D), "I": _interval(info.image_I),
                              "tau0_monotone_sign": info.tau0_monotone_sign}
        text += f"; annulus D={_fmt_interval(info.domain_D)}, I={_fmt_interval(info.image_I)}"
    if args.json:
        _emit_json(payload, args.out, "classify")
    else:
        _emit(text + "\n", args.out)
    return 0


def _portrait_one(y0, params, f, t1, tol):
    """(rows, trailer, ok) for one initial condition (0, 0, y0)."""
    start = ExtendedPoint(0.0, 0.0, y0)
    if t1 is None:
        try:
            t1 = 2.0 * tau0(y0, params)
        except (NoPeriodAnnulus, ValueError):
            t1 = 20.0 * params.sigma
    rows = []
    trailer = None
    ok = True
    try:
        segments = flow_concat(start, t1, params, f, tol).segments
    except TimeLimitExceeded as exc:
        segments, trailer, ok = exc.segments, f"TimeLimit: {exc}", False
    except SimulationError as exc:
        segments, trailer, ok = exc.segments, f"{type(exc).__name__}: {exc}", False
    for seg in segments:
        label = seg.region.label
        for t, th, x, y in zip(seg.tau, seg.theta, seg.x, seg.y):
            rows.append((float(t), float(th), float(x), float(y), label))
    return rows, trailer, ok


def cmd_portrait(args) -> int:
    cfg = build_config(args)
    tol = build_tol(args)
    f = _expr(cfg)
    params = cfg.parameters()
    y0s = args.y0
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    threads = min(thread_count(), len(y0s))
    work = lambda y0: _portrait_one(y0, params, f, args.t1, tol)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, y0s))
    else:
        results = [work(y0) for y0 in y0s]
    summary = []
    for i, (y0, (rows, trailer, ok)) in enumerate(zip(y0s, results)):
        path = outdir / f"portrait_{i:03d}.csv"
        path.write_text(_csv(("tau", "theta", "x", "y", "region"), rows, trailer))
        summary.append({"y0": y0, "file": str(path), "ok": ok, "note": trailer})
    sys.stdout.write(json.dumps({"trajectories": summary}, indent=2) + "\n")
    return 0 if any(s["ok"] for s in summary) else 1


def cmd_melnikov(args) -> int:
    cfg = build_config(args)
    tol = build_tol(args)
    f = _expr(cfg)
    params = cfg.parameters()
    if args.samples < 2:
        raise UsageError("--samples must be >= 2")
    phis = [k * cfg.sigma / args.samples for k in range(args.samples)]
    values = melnikov_values(phis, params, f, tol)
    _emit(_csv(("phi", "M"), [(p, float(v)) for p, v in zip(phis, values)]), args.out)
    return 0


def zeros_payload(cfg: ModelConfig, f, tol, samples: int) -> dict:
    res = melnikov_grid(cfg.parameters(), f, samples, tol)
    return {
        "sigma": cfg.sigma,
        "samples": samples,
        "degenerate_flat": res.degenerate_flat,
        "zeros": [{"phi_star": z.phi_star, "dM": z.dM} for z in res.zeros],
        "non_simple": [{"phi_star": z.phi_star, "dM": z.dM} for z in res.non_simple],
    }


def cmd_zeros(args) -> int:
    cfg = build_config(args)
    tol = build_tol(args)
    f = _expr(cfg)
    if args.samples < 16:
        raise UsageError("--samples must be >= 16")
    _emit_json(zeros_payload(cfg, f, tol, args.samples), args.out, "zeros")
    return 0


def ladder(epsilon: float, rungs: int = 10) -> list[float]:
    """epsilon * 2^-k for k = rungs..0, increasing."""
    return [epsilon * 2.0 ** -k for k in range(rungs, -1, -1)]


def solve_orbit(epsilon, phi_seed, params, f, tol):
    """Newton from the Melnikov seed; falls back to continuation in eps."""
    try:
        return find_periodic_orbit(epsilon, phi_seed, params, f, tol), "newton"
    except (NewtonDivergence, SimulationError):
        pass
    branch = continuation(ladder(epsilon), phi_seed, params, f, tol)
    if branch.failure or not branch:
        raise NewtonDivergence(branch.failure or "continuation produced no orbit")
    return branch[-1], "continuation"


def cmd_orbit(args) -> int:
    cfg = build_config(args)
    tol = build_tol(args)
    f = _expr(cfg)
    eps = cfg.epsilon if args.epsilon is None else args.epsilon
    params = cfg.parameters(eps)
    phi_seed = args.phi_seed
    if phi_seed is None:
        zeros = melnikov_grid(params, f, 256, tol).zeros
        if not zeros:
            raise NewtonDivergence("M has no simple zero to seed from; pass --phi-seed")
        phi_seed = zeros[0].phi_star
    orbit, method = solve_orbit(eps, phi_seed, params, f, tol)
    vstar = v_of(0.5 * cfg.sigma, params)
    payload = {
        "epsilon": eps,
        "sigma": cfg.sigma,
        "phi_seed": phi_seed,
        "theta0": orbit.theta0,
        "y0": orbit.y0,
        "residual": orbit.residual,
        "v_half_sigma": vstar,
        "seed_distance": orbit.seed_distance,
        "matches_theoremA": abs(orbit.y0 - vstar) <= 10.0 * abs(eps),
        "method": method,
    }
    _emit_json(payload, args.out, "orbit")
    return 0


def verify_payload(cfg: ModelConfig, f, tol, eps_list, n_theta: int) -> dict:
    params = cfg.parameters(0.0)
    thetas = [k * cfg.sigma / n_theta for k in range(n_theta)]
    per_theta = []
    sup = [0.0] * len(eps_list)
    for th in thetas:
        m = melnikov(th, params, f, tol)
        vals = [delta3_tilde(th, e, params, f, tol) for e in eps_list]
        errs = [abs(v - m) for v in vals]
        sup = [max(a, b) for a, b in zip(sup, errs)]
        slope = loglog_slope(list(zip(eps_list, errs)))
        per_theta.append({"theta0": th, "M": m, "delta3_tilde": vals, "errors": errs,
                          "slope": _json_num(slope)})
    slope = loglog_slope(list(zip(eps_list, sup)))
    return {
        "eps_list": list(eps_list),
        "sup_errors": sup,
        "slope": _json_num(slope),
        "within_tolerance": bool(abs(slope - 1.0) <= 0.15),
        "per_theta": per_theta,
    }


def cmd_verify(args) -> int:
    cfg = build_config(args)
    tol = build_tol(args)
    f = _expr(cfg)
    eps_list = args.epsilon_list or list(DEFAULT_VERIFY_EPS)
    if len(eps_list) < 3:
        raise UsageError("--epsilon-list needs at least three values")
    payload = verify_payload(cfg, f, tol, eps_list, args.thetas)
    _emit_json(payload, args.out, "verify")
    return 0 if payload["within_tolerance"] else 1


MATCH_TOL = 1e-4


def p1_row(k: int, alpha: float, eta: float, beta: float, epsilon: float, tol=DEFAULT_TOL) -> dict:
    """Locate the 2*pi*(2k-1)/beta periodic orbit and compare y0 with both closed forms."""
    sigma = 2.0 * math.pi * (2 * k - 1) / beta
    f = parse(f"sin({beta!r}*t)")
    params = Parameters(alpha, eta, sigma, 0.0)
    r = math.sqrt(eta)
    v_half = v_of(0.5 * sigma, params)
    p1_formula = alpha / r * math.tanh(math.pi * r * (2 * k - 1) / beta)
    half_v_sigma = 0.5 * v_of(sigma, params)
    row = {"k": k, "sigma": sigma, "epsilon": epsilon, "v_half_sigma": v_half,
           "p1_formula": p1_formula, "half_v_sigma": half_v_sigma}
    try:
        zeros = melnikov_grid(params, f, 64 * (2 * k - 1), tol).zeros
        if not zeros:
            raise NewtonDivergence("M has no simple zero")
        phi = zeros[0].phi_star
        branch = continuation(ladder(epsilon), phi, params, f, tol)
        if branch.failure:
            raise NewtonDivergence(branch.failure)
        orbit, half = branch[-1], branch[-2]
    except MelnikovError as exc:
        row.update(ok=False, error=str(exc))
        return row
    y_extrap = 2.0 * half.y0 - orbit.y0
    candidates = {"v_half_sigma": v_half, "p1_formula": p1_formula, "half_v_sigma": half_v_sigma}
    matches = sorted(name for name, value in candidates.items() if abs(y_extrap - value) <= MATCH_TOL)
    row.update(
        ok=orbit.residual <= tol.newton_tol and abs(orbit.y0 - v_half) <= 10.0 * epsilon,
        phi_star=phi,
        theta0=orbit.theta0,
        y0=orbit.y0,
        y0_half_eps=half.y0,
        residual=orbit.residual,
        y0_extrapolated=y_extrap,
        err_v_half_sigma=abs(y_extrap - v_half),
        err_p1_formula=abs(y_extrap - p1_formula),
        err_half_v_sigma=abs(y_extrap - half_v_sigma),
        matches=matches,
    )
    return row


def reproduce_p1(n: int, alpha: float, eta: float, beta: float, epsilon: float,
                 tol=DEFAULT_TOL) -> dict:
    case = classify(alpha, eta)
    if case.index != 1:
        raise UsageError(f"reproduce-p1 needs C1 parameters (alpha > 0, eta > 0), got {case.tag.value}")
    rows = [p1_row(k, alpha, eta, beta, epsilon, tol) for k in range(1, n + 1)]
    return {"alpha": alpha, "eta": eta, "beta": beta, "epsilon": epsilon, "n": n,
            "match_tol": MATCH_TOL, "rows": rows}


def _p1_table(payload: dict) -> str:
    lines = [f"{'k':>2} {'period':>12} {'y0(eps)':>20} {'y0(eps->0)':>20} "
             f"{'v(sigma/2)':>20} {'P1 formula':>20}  matches"]
    for r in payload["rows"]:
        if not r["ok"] and "y0" not in r:
            lines.append(f"{r['k']:>2} {r['sigma']:>12.6f}  FAILED: {r.get('error', '')}")
            continue
        lines.append(
            f"{r['k']:>2} {r['sigma']:>12.6f} {r['y0']:>20.15f} {r['y0_extrapolated']:>20.15f} "
            f"{r['v_half_sigma']:>20.15f} {r['p1_formula']:>20.15f}  {','.join(r['matches']) or 'none'}")
    return "\n".join(lines) + "\n"


def cmd_reproduce_p1(args) -> int:
    tol = build_tol(args)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    payload = reproduce_p1(args.n, args.alpha, args.eta, args.beta, args.epsilon, tol)
    jsonschema.validate(payload, load_schema("reproduce_p1"))
    if args.json:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        sys.stdout.write(_p1_table(payload))
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    return 0 if all(r["ok"] for r in payload["rows"]) else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _model_args(p: argparse.ArgumentParser, with_epsilon=True) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON file with alpha, eta, sigma, f, epsilon")
    p.add_argument("--alpha", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--f", help="perturbation expression in t, x, y")
    if with_epsilon:
        p.add_argument("--epsilon", type=float)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--tol", action="append", metavar="KEY=VALUE",
                   help="override a tolerance, e.g. --tol zero_tol=1e-8 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="melnikov-sign",
                                     description="Melnikov analysis of x'' + alpha*sign(x) = eta*x + eps*f(t, x, x').")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="case C1..C9 and annulus intervals")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--alpha", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("portrait", help="trajectories as CSV, one file per y0")
    _model_args(p)
    p.add_argument("--y0", type=_float_list, required=True, help="comma-separated initial velocities")
    p.add_argument("--t1", type=float, help="duration (default: one unperturbed period)")
    p.set_defaults(func=cmd_portrait)

    p = sub.add_parser("melnikov", help="M(phi) on a uniform grid as CSV")
    _model_args(p, with_epsilon=False)
    p.add_argument("--samples", type=int, default=256)
    p.set_defaults(func=cmd_melnikov)

    p = sub.add_parser("zeros", help="simple zeros of M as JSON")
    _model_args(p, with_epsilon=False)
    p.add_argument("--samples", type=int, default=256)
    p.set_defaults(func=cmd_zeros)

    p = sub.add_parser("orbit", help="periodic orbit of the perturbed system as JSON")
    _model_args(p)
    p.add_argument("--phi-seed", type=float)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("verify", help="O(eps) convergence of the scaled displacement to M")
    _model_args(p, with_epsilon=False)
    p.add_argument("--epsilon-list", type=_float_list)
    p.add_argument("--thetas", type=int, default=8)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reproduce-p1", help="periodic orbits for f = sin(beta t), k = 1..n")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--json", action="store_true")
    p.add_argument("--tol", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_reproduce_p1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    try:
        thread_count()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except MelnikovError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
