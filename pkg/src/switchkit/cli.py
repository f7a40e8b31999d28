"""Command-line interface.

Subcommands: simulate, characteristics, estimate, recover, example, pipeline.
Settings come from an optional JSON config (``--config``) overridden by
flags. Exit codes: 0 success, 2 usage or configuration error, 3 numerical
precision failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import formats
from .characteristics import build_characteristics, covariance, curve
from .errors import (
    DomainError,
    MonotonicityError,
    ParameterError,
    PrecisionError,
    RangeError,
    ResolutionError,
    SwitchkitError,
    TailError,
    ValidationError,
)
from .estimators import estimate_E, estimate_P, estimate_R, estimate_stationary_mean, smooth_derivative
from .laws import law_from_dict, make_exponential
from .process import ProcessSpec, simulate_nonstationary, simulate_stationary, simulate_two_sided
from .recovery import extract_divisors, validate_pair
from .scenarios import common_divisor_example, gamma_nonmonotone_example, round_trip, scaled_common_example

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4


class UsageError(Exception):
    pass


def exit_code_for(err: BaseException) -> int:
    if isinstance(err, (ValidationError, TailError)):
        return EXIT_VALIDATION
    if isinstance(err, (PrecisionError, ArithmeticError)):
        return EXIT_NUMERIC
    if isinstance(err, (UsageError, ParameterError, DomainError, RangeError, ResolutionError)):
        return EXIT_USAGE
    return EXIT_VALIDATION if isinstance(err, SwitchkitError) else EXIT_USAGE


# ---------------------------------------------------------------------------
# configuration


def load_config(path) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: top level must be a JSON object")
    return cfg


def _setting(args, cfg: dict, name: str, default=None):
    v = getattr(args, name, None)
    if v is not None:
        return v
    return cfg.get(name, default)


def _law(args, cfg: dict, side: str):
    raw = getattr(args, side, None)
    source = f"--{side}"
    if raw is not None:
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as e:
            raise UsageError(f"{source}:{e.lineno}:{e.colno}: {e.msg}") from e
    else:
        raw = cfg.get(side)
        source = f"config field {side!r}"
    if raw is None:
        return make_exponential(1.0)
    try:
        return law_from_dict(raw)
    except SwitchkitError as e:
        raise UsageError(f"{source}: {e}") from e


def _spec(args, cfg: dict) -> ProcessSpec:
    p = float(_setting(args, cfg, "p", 1.0))
    try:
        return ProcessSpec(_law(args, cfg, "plus"), _law(args, cfg, "minus"), p)
    except ParameterError as e:
        raise UsageError(f"field 'p': {e}") from e


def _positive(name, value):
    if value is None or not float(value) > 0:
        raise UsageError(f"--{name.replace('_', '-')} must be positive, got {value}")
    return float(value)


def _rng(args, cfg):
    return np.random.default_rng(int(_setting(args, cfg, "seed", 0)))


def _time_grid(args, cfg, t0=0.0, default_max=10.0, default_points=201):
    t_max = _positive("t_max", _setting(args, cfg, "t_max", default_max))
    points = int(_setting(args, cfg, "points", default_points))
    if points < 2:
        raise UsageError("--points must be at least 2")
    return np.linspace(t0, t_max, points)


def _threads(args, cfg) -> int:
    th = int(_setting(args, cfg, "threads", 1))
    if th < 1:
        raise UsageError(f"--threads must be at least 1, got {th}")
    return th


def _s_grid(text):
    try:
        lo, hi, num = text.split(",")
        return np.logspace(np.log10(float(lo)), np.log10(float(hi)), int(num))
    except ValueError as e:
        raise UsageError(f"--s-grid expects 'lo,hi,num', got {text!r}") from e


def _write_out(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args, cfg) -> int:
    spec = _spec(args, cfg)
    rng = _rng(args, cfg)
    horizon = _positive("horizon", _setting(args, cfg, "horizon", 10.0))
    stationary = bool(args.stationary or cfg.get("stationary", False))
    two_sided = bool(args.two_sided or cfg.get("two_sided", False))
    delta = _setting(args, cfg, "delta")
    t_min = _setting(args, cfg, "t_min")
    if stationary:
        traj = simulate_stationary(spec, -horizon if t_min is None else float(t_min), horizon, rng)
    elif two_sided:
        traj = simulate_two_sided(spec, -horizon if t_min is None else float(t_min), horizon, rng, delta)
    else:
        traj = simulate_nonstationary(spec, horizon, rng, delta)
    _write_out(formats.write_trajectory(traj), _setting(args, cfg, "out"))
    return EXIT_OK


def cmd_characteristics(args, cfg) -> int:
    spec = _spec(args, cfg)
    cs = build_characteristics(spec)
    out = _setting(args, cfg, "out")
    if _setting(args, cfg, "s_grid"):
        s = _s_grid(_setting(args, cfg, "s_grid"))
        cols = {"s": s}
        for name in ("LE_plus", "LE_minus", "LP_plus", "LP_minus", "LPt_plus", "LPt_minus", "LR", "LEd_plus", "LEd_minus"):
            cols[name] = np.asarray(getattr(cs, name)(s), dtype=float)
        _write_out(formats.write_table(cols, meta={"content": "transforms"}), out)
        return EXIT_OK
    t = _time_grid(args, cfg)
    kw = dict(
        order=int(_setting(args, cfg, "gs_order", 14)),
        method=_setting(args, cfg, "method", "gs"),
        precision=_setting(args, cfg, "precision", "double"),
    )
    cols = {"t": t}
    for name in ("E_plus", "E_minus", "P_plus", "P_minus", "Pt_plus", "Pt_minus"):
        cols[name] = curve(cs, name, t, **kw)
    cols["R"] = covariance(spec, t, cs=cs, **kw)
    _write_out(formats.write_table(cols, meta={"content": "characteristics"}), out)
    return EXIT_OK


def cmd_estimate(args, cfg) -> int:
    spec = _spec(args, cfg)
    rng = _rng(args, cfg)
    kind = _setting(args, cfg, "kind", "E_plus")
    n = int(_setting(args, cfg, "n_paths", 100_000))
    if n < 100:
        raise UsageError("--n-paths must be at least 100")
    t = _time_grid(args, cfg)
    th = _threads(args, cfg)
    if kind in ("E_plus", "E_minus", "E"):
        table = estimate_E(spec, {"E_plus": 1, "E_minus": -1, "E": None}[kind], t, n, rng, th)
    elif kind in ("P_plus", "P_minus"):
        table = estimate_P(spec, 1 if kind == "P_plus" else -1, t, n, rng, th)
    elif kind == "R":
        table = estimate_R(spec, t, n, float(_setting(args, cfg, "u", 0.0)), rng, th)
    elif kind == "stationary_mean":
        table = estimate_stationary_mean(spec, t, n, rng, th)
    else:
        raise UsageError(f"unknown --kind {kind!r}")
    _write_out(formats.write_estimate(table), _setting(args, cfg, "out"))
    return EXIT_OK


def cmd_recover(args, cfg) -> int:
    e_plus = _setting(args, cfg, "e_plus")
    e_minus = _setting(args, cfg, "e_minus")
    out_dir = _setting(args, cfg, "out_dir")
    if not (e_plus and e_minus and out_dir):
        raise UsageError("recover needs --e-plus, --e-minus and --out-dir")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    Ep, Em = formats.read_estimate(e_plus), formats.read_estimate(e_minus)
    gp, gm = Ep.to_grid_function(), Em.to_grid_function()
    s_text = _setting(args, cfg, "s_grid")
    s = _s_grid(s_text) if s_text else np.logspace(-1, 1, 41)
    tail_eps = float(_setting(args, cfg, "tail_eps", 1e-4))
    window = int(_setting(args, cfg, "window", 9))
    check = validate_pair(gp, gm, tail_eps=tail_eps)
    report = {
        "limits_ok": check["limits_ok"],
        "monotone": check["monotone"],
        "cm_probe": check["cm_probe"],
        "verdict": check["verdict"],
        "gamma": check["gamma"],
    }
    code = EXIT_OK
    try:
        pair = extract_divisors(gp, gm, smooth_derivative(Ep, window), smooth_derivative(Em, window), tail_eps=tail_eps)
    except ValidationError as e:
        report.update(error=str(e), error_type=type(e).__name__)
        if isinstance(e, MonotonicityError):
            report["monotone"] = False
        code = EXIT_VALIDATION
    else:
        report.update(alpha=pair.alpha, beta=pair.beta, gamma=pair.gamma, alpha_integral=pair.alpha_integral, renorm_factors=pair.renorm)
        formats.write_table(
            {"t": pair.f_X.grid, "f_X": pair.f_X.values, "f_Y": pair.f_Y.values, "se_X": pair.f_X.se, "se_Y": pair.f_Y.se},
            out_dir / "divisors.csv",
            meta={"content": "divisor_densities"},
        )
        formats.write_table(
            {"s": s, "psi_plus": pair.psi_plus(s), "psi_minus": pair.psi_minus(s)},
            out_dir / "psi.csv",
            meta={"content": "recovered_transforms"},
        )
    formats.dump_json(report, out_dir / "report.json")
    sys.stdout.write(formats.dump_json(report))
    return code


def cmd_example(args, cfg) -> int:
    divisor = None
    if args.divisor:
        try:
            divisor = law_from_dict(json.loads(args.divisor))
        except (json.JSONDecodeError, SwitchkitError) as e:
            raise UsageError(f"--divisor: {e}") from e
    if args.name == "common_divisor":
        res = common_divisor_example(args.alpha if args.alpha is not None else 1 / 3, divisor)
    elif args.name == "scaled_common":
        res = scaled_common_example(args.a, args.b, args.alpha if args.alpha is not None else 0.5, divisor)
    else:
        res = gamma_nonmonotone_example()
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        formats.write_table(res["table"], d / f"{args.name}.csv", meta={"content": args.name})
        formats.dump_json(res["report"], d / f"{args.name}.json")
    sys.stdout.write(formats.dump_json(res["report"]))
    return EXIT_OK


def cmd_pipeline(args, cfg) -> int:
    spec = _spec(args, cfg)
    rng = _rng(args, cfg)
    n = int(_setting(args, cfg, "n_paths", 1_000_000))
    if n < 100:
        raise UsageError("--n-paths must be at least 100")
    summary = round_trip(
        spec,
        n,
        rng,
        t_max=float(_setting(args, cfg, "t_max", 25.0)),
        points=int(_setting(args, cfg, "points", 501)),
        tol=float(_setting(args, cfg, "tol", 5e-2)),
        threads=_threads(args, cfg),
    )
    _write_out(formats.dump_json(summary), _setting(args, cfg, "out"))
    return EXIT_OK if summary["pass"] else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its fields")
    common.add_argument("--seed", type=int, help="RNG seed (default 0)")
    common.add_argument("--threads", type=int, help="worker threads for Monte Carlo (default 1)")
    common.add_argument("--gs-order", type=int, help="Gaver-Stehfest order (default 14)")
    common.add_argument("--tail-eps", type=float, help="tail tolerance for forward transforms (default 1e-4)")
    common.add_argument("--out", help="output file (default stdout)")

    spec_args = argparse.ArgumentParser(add_help=False)
    spec_args.add_argument("--plus", help="JSON law descriptor for T+")
    spec_args.add_argument("--minus", help="JSON law descriptor for T-")
    spec_args.add_argument("--p", type=float, help="probability that the initial sign is +1")

    grid_args = argparse.ArgumentParser(add_help=False)
    grid_args.add_argument("--t-max", type=float)
    grid_args.add_argument("--points", type=int)

    parser = argparse.ArgumentParser(prog="switchkit", description="asymmetric switch process toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, spec_args], help="simulate one trajectory")
    p.add_argument("--horizon", type=float)
    p.add_argument("--t-min", type=float, help="left end for two-sided or stationary paths")
    p.add_argument("--delta", type=int, choices=(1, -1))
    p.add_argument("--stationary", action="store_true")
    p.add_argument("--two-sided", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("characteristics", parents=[common, spec_args, grid_args], help="analytic characteristics")
    p.add_argument("--s-grid", help="dump transforms on a log grid 'lo,hi,num' instead")
    p.add_argument("--method", choices=("gs", "talbot"))
    p.add_argument("--precision", choices=("double", "extended"))
    p.set_defaults(func=cmd_characteristics)

    p = sub.add_parser("estimate", parents=[common, spec_args, grid_args], help="Monte Carlo estimates")
    p.add_argument("--kind", choices=("E_plus", "E_minus", "E", "P_plus", "P_minus", "R", "stationary_mean"))
    p.add_argument("--n-paths", type=int)
    p.add_argument("--u", type=float, help="base point for R")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("recover", parents=[common], help="recover switching laws from E curves")
    p.add_argument("--e-plus")
    p.add_argument("--e-minus")
    p.add_argument("--out-dir")
    p.add_argument("--window", type=int, help="Savitzky-Golay window (default 9)")
    p.add_argument("--s-grid")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("example", parents=[common], help="worked examples")
    p.add_argument("name", choices=("common_divisor", "scaled_common", "gamma_nonmonotone"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=2.0)
    p.add_argument("--divisor", help="JSON law descriptor of the common divisor")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("pipeline", parents=[common, spec_args, grid_args], help="simulate, estimate, recover, compare")
    p.add_argument("--n-paths", type=int)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (UsageError, SwitchkitError, ArithmeticError) as e:
        print(f"switchkit {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return exit_code_for(e)
    except OSError as e:
        print(f"switchkit {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
