"""Command-line front end.

Subcommands::

    analyze       run the three-stage rank analysis and print the stage table
    trajectories  write x*, y* and the L-sensitivities along one direction as CSV
    taylor-check  residual profile of the first-order approximant of an expression
    list-models   show the built-in models

Exit codes: 0 natural verdict, 2 partial only, 3 no full-rank direction,
1 numerical failure (or a failed taylor check), 64 usage errors,
65 invalid model documents.
"""

import argparse
import json
import os
import sys

import numpy as np

from .errors import (
    IntegrationError,
    InvalidInputError,
    LDSercError,
    ModelError,
    PreconditionError,
)
from .ldcore import taylor_decay_ok, taylor_residual_profile
from .lserc import ABS_FLOOR, RANK_TOL, AlgoConfig, algorithm1, format_report
from .modelkit import BUILTIN_NAMES, DOCUMENTS, builtin, parse_model, vector_function
from .sensint import DEFAULT_STEP, MODES, Grid, integrate_sensitivity, trajectory_csv

EXIT_NATURAL = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2
EXIT_NONE = 3
EXIT_USAGE = 64
EXIT_MODEL = 65

DEFAULT_SCALES = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _reals(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals or not all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError(f"expected finite numbers, got {text!r}")
    return vals


def _nonneg(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative: {text!r}")
    return v


def _positive(text):
    v = _nonneg(text)
    if v == 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _count(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative: {text!r}")
    return v


def build_parser():
    parser = _Parser(prog="ldserc", description="Rank tests for nonsmooth ODE models.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def model_flags(p):
        p.add_argument("--model", required=True,
                       help="built-in name or path to a model JSON document")
        p.add_argument("--mode", choices=MODES, default="identifiability")
        p.add_argument("--step", type=_positive, default=DEFAULT_STEP, help="RK4 step")

    a = sub.add_parser("analyze", help="run primary/twin/singularity probing")
    model_flags(a)
    a.add_argument("--direction", type=_reals, action="append",
                   help="primary direction (repeatable); default +-e_i")
    a.add_argument("--twin", type=_nonneg, default=0.0, help="twin offset (0 disables)")
    a.add_argument("--sing", type=_nonneg, default=0.0, help="singularity step (0 disables)")
    a.add_argument("--sing-relative", action="store_true",
                   help="scale the singularity step by |theta*|/|dtheta|")
    a.add_argument("--q", type=_count, default=0, help="singularity recursion depth")
    a.add_argument("--samples", type=_reals, help="sample times")
    a.add_argument("--theta", type=_reals, help="reference parameters (default: model's)")
    a.add_argument("--rank-tol", type=_positive, default=RANK_TOL)
    a.add_argument("--abs-floor", type=_positive, default=ABS_FLOOR)
    a.add_argument("--report", help="write the JSON report here")
    a.add_argument("--json", action="store_true", help="print the JSON report instead of the table")

    t = sub.add_parser("trajectories", help="emit sensitivity trajectories as CSV")
    model_flags(t)
    t.add_argument("--direction", type=_reals, action="append",
                   help="probing direction (default e_1)")
    t.add_argument("--theta", type=_reals)
    t.add_argument("--t0", type=float)
    t.add_argument("--tf", type=float)
    t.add_argument("--csv", help="output path (default: standard output)")

    c = sub.add_parser("taylor-check", help="decay of the first-order approximation error")
    c.add_argument("--expr", action="append", required=True,
                   help="s-expression in x0, x1, ... (repeatable for vector functions)")
    c.add_argument("--at", type=_reals, required=True, help="base point")
    c.add_argument("--direction", type=_reals, action="append",
                   help="direction (repeatable); default +-e_i")
    c.add_argument("--scales", type=_reals, default=list(DEFAULT_SCALES),
                   help="strictly decreasing positive scales, at least three")
    c.add_argument("--json", action="store_true")

    m = sub.add_parser("list-models", help="show the built-in models")
    m.add_argument("--json", action="store_true")
    return parser


def load_model(source):
    """A built-in name or a path to a model document."""
    if source in DOCUMENTS:
        return builtin(source)
    if not os.path.exists(source):
        raise ModelError(
            f"{source!r} is neither a built-in ({', '.join(BUILTIN_NAMES)}) nor a file"
        )
    try:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelError(f"cannot read {source}: {exc}") from None
    return parse_model(text)


def exit_code(report):
    """Map a report to the exit-code contract."""
    if report.probes and all(p.error for p in report.probes):
        return EXIT_ERROR
    return {"natural": EXIT_NATURAL, "partial": EXIT_PARTIAL}.get(report.summary, EXIT_NONE)


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_analyze(args, out):
    spec = load_model(args.model)
    cfg = AlgoConfig.for_model(
        spec,
        theta_star=args.theta,
        directions=args.direction,
        sample_times=args.samples,
        eps_twin=args.twin,
        eps_sing=args.sing,
        q=args.q,
        rank_tol=args.rank_tol,
        abs_floor=args.abs_floor,
        step=args.step,
        mode=args.mode,
        sing_relative=args.sing_relative,
    )
    for d in cfg.directions:
        if len(d) != spec.n_p:
            raise InvalidInputError(f"direction {list(d)} has length {len(d)}, model has n_p={spec.n_p}")
    if len(cfg.theta_star) != spec.n_p:
        raise InvalidInputError(f"--theta needs {spec.n_p} values")
    if cfg.mode == "observability" and not spec.observability_ready:
        raise PreconditionError(
            f"model {spec.name!r} is not set up for observability (need n_p == n_x and f0 = p)"
        )
    # configuration problems are usage errors, not per-probe failures
    Grid(spec.t0, spec.tf, cfg.step).snap(cfg.sample_times)
    if len(cfg.sample_times) * spec.n_y < spec.n_p:
        raise InvalidInputError(
            f"{len(cfg.sample_times)} sample times x n_y={spec.n_y} < n_p={spec.n_p}"
        )
    report = algorithm1(spec, cfg)
    text = report.to_json() + "\n"
    if args.report:
        _write(args.report, text)
    out.write(text if args.json else format_report(report) + "\n")
    for r in report.all_reports():
        for p in r.probes:
            if p.error:
                print(f"probe d={p.d.tolist()} at theta={r.theta.tolist()}: {p.error}",
                      file=sys.stderr)
    return exit_code(report)


def cmd_trajectories(args, out):
    spec = load_model(args.model)
    if args.direction and len(args.direction) > 1:
        raise UsageError("trajectories takes a single --direction")
    d = args.direction[0] if args.direction else np.eye(spec.n_p)[0]
    t0 = spec.t0 if args.t0 is None else args.t0
    tf = spec.tf if args.tf is None else args.tf
    grid = Grid(t0, tf, args.step)
    traj = integrate_sensitivity(spec, grid, d, args.mode, args.theta)
    text = trajectory_csv(traj)
    if args.csv:
        _write(args.csv, text)
    else:
        out.write(text)
    return 0


def cmd_taylor_check(args, out):
    scales = np.asarray(args.scales, dtype=float)
    if scales.size < 3:
        raise UsageError("taylor-check needs at least three scales")
    if np.any(scales <= 0) or np.any(np.diff(scales) >= 0):
        raise UsageError("scales must be positive and strictly decreasing")
    x0 = np.asarray(args.at, dtype=float)
    n = x0.size
    if args.direction:
        dirs = [np.asarray(d, dtype=float) for d in args.direction]
        if any(d.size != n for d in dirs):
            raise UsageError(f"directions must have length {n}")
    else:
        dirs = [s * e + 0.0 for e in np.eye(n) for s in (1.0, -1.0)]
    f = vector_function(args.expr, n)
    rows, ok = [], True
    for d in dirs:
        r = taylor_residual_profile(f, x0, d, scales)
        passed = taylor_decay_ok(scales, r)
        ok &= passed
        rows.append({"d": d.tolist(), "residuals": r.tolist(), "pass": passed})
    if args.json:
        out.write(json.dumps({"at": x0.tolist(), "scales": scales.tolist(),
                              "profiles": rows, "pass": ok}, indent=2) + "\n")
    else:
        out.write("scales: " + " ".join(f"{a:.1e}" for a in scales) + "\n")
        for row in rows:
            res = " ".join(f"{v:.3e}" for v in row["residuals"])
            tag = "PASS" if row["pass"] else "FAIL"
            out.write(f"d={row['d']}: {res}  {tag}\n")
        out.write(("PASS" if ok else "FAIL") + "\n")
    return 0 if ok else EXIT_ERROR


def cmd_list_models(args, out):
    items = []
    for name in BUILTIN_NAMES:
        s = builtin(name)
        items.append({"name": name, "n_x": s.n_x, "n_u": s.n_u, "n_p": s.n_p, "n_y": s.n_y,
                      "theta_star": list(s.theta_star), "observability": s.observability_ready})
    if args.json:
        out.write(json.dumps(items, indent=2) + "\n")
        return 0
    for it in items:
        out.write(f"{it['name']:<12} n_x={it['n_x']} n_u={it['n_u']} n_p={it['n_p']} "
                  f"n_y={it['n_y']} theta*={it['theta_star']}\n")
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "trajectories": cmd_trajectories,
    "taylor-check": cmd_taylor_check,
    "list-models": cmd_list_models,
}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (InvalidInputError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except LDSercError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as exc:
        # --help
        return exc.code if isinstance(exc.code, int) else 0


if __name__ == "__main__":
    sys.exit(main())
