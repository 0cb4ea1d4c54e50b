"""Command-line front end: demonstrations and benchmark tables as TSV.

Exit codes: 0 success, 2 malformed input or a domain/validation error,
3 numerical failure (overflow, divergence, non-convergence).  Output is
tab-separated with a single '#'-prefixed header line, deterministic for
identical flags and seed.
"""

import argparse
import sys

import numpy as np

from . import oracle
from .branching import load_spline, spline_eval_delta
from .core import DeltaScalar
from .errors import (ComputeOverflowError, ConvergenceError, DivDiffError,
                     InvalidInputError)
from .expr import eval_delta, eval_plain, parse
from .linalg import DeltaMatrix, DeltaVector, load_matrix, solve_delta
from .optim import QuadraticObjective
from .stagnation import run_quadratic_experiment

USAGE_EXIT = 2
NUMERICAL_EXIT = 3


def _fmt(v):
    return repr(float(v))


def _rel_err(value, reference):
    if value == reference:
        return 0.0
    if reference == 0.0:
        return float("inf")
    return abs(value - reference) / abs(reference)


def _parse_floats(text, what):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise InvalidInputError(f"bad {what} list: {text!r}") from None


def _emit(lines, path):
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _parsed_expression(args):
    if args.expr is None:
        raise InvalidInputError("an expression is required (-e)")
    x = _parse_floats(args.x, "x") if args.x else []
    expression = parse(args.expr, max(len(x), 1))
    return expression, x


def cmd_eval(args):
    expression, x = _parsed_expression(args)
    value = eval_plain(expression, x)
    _emit(["# value", _fmt(value)], args.output)
    return 0


def cmd_delta(args):
    expression, x = _parsed_expression(args)
    s = _parse_floats(args.s, "s") if args.s else [0.0] * len(x)
    if len(s) != len(x):
        raise InvalidInputError(f"x has {len(x)} entries but s has {len(s)}")
    naive = eval_plain(expression, [xi + si for xi, si in zip(x, s)]) \
        - eval_plain(expression, x)
    cdd = eval_delta(expression, x, s)[1]
    ref = oracle.oracle_delta(expression, x, s)
    lines = [
        "# naive\tcdd\toracle\tnaive_abs_err\tnaive_rel_err\tcdd_abs_err\tcdd_rel_err",
        "\t".join(_fmt(v) for v in (
            naive, cdd, ref,
            abs(naive - ref), _rel_err(naive, ref),
            abs(cdd - ref), _rel_err(cdd, ref))),
    ]
    _emit(lines, args.output)
    return 0


def cmd_sweep(args):
    expression, x = _parsed_expression(args)
    if not (args.sweep_hi > args.sweep_lo > 0.0):
        raise InvalidInputError(
            f"sweep bounds must satisfy hi > lo > 0, got "
            f"{args.sweep_hi!r} .. {args.sweep_lo!r}")
    if args.points < 2:
        raise InvalidInputError(f"need at least 2 sweep points, got {args.points}")
    direction = _parse_floats(args.s, "s") if args.s else [1.0] * len(x)
    if len(direction) != len(x):
        raise InvalidInputError(
            f"x has {len(x)} entries but s has {len(direction)}")
    grad = oracle.oracle_gradient(expression, x)
    grid = np.logspace(np.log10(args.sweep_hi), np.log10(args.sweep_lo),
                       args.points)
    lines = ["# s\tnaive_rel_err\tcdd_rel_err\ttaylor_rel_err"]
    for mag in grid:
        s = [mag * d for d in direction]
        ref = oracle.oracle_delta(expression, x, s)
        naive = eval_plain(expression, [xi + si for xi, si in zip(x, s)]) \
            - eval_plain(expression, x)
        cdd = eval_delta(expression, x, s)[1]
        taylor = float(sum(g * si for g, si in zip(grad, s)))
        lines.append("\t".join(_fmt(v) for v in (
            mag, _rel_err(naive, ref), _rel_err(cdd, ref),
            _rel_err(taylor, ref))))
    _emit(lines, args.output)
    return 0


def cmd_spline_demo(args):
    if args.spline is None:
        raise InvalidInputError("a spline file is required (--spline)")
    with open(args.spline) as fh:
        sp = load_spline(fh)
    x = _parse_floats(args.x, "x") if args.x else [0.0]
    s = _parse_floats(args.s, "s") if args.s else [0.0]
    point, step = x[0], s[0]
    cdd = spline_eval_delta(sp, DeltaScalar(point, step)).delta
    ref = oracle.oracle_spline_delta(sp, point, step)
    lines = [
        "# x\tdx\tcdd\toracle\tabs_err\trel_err",
        "\t".join(_fmt(v) for v in (
            point, step, cdd, ref, abs(cdd - ref), _rel_err(cdd, ref))),
    ]
    _emit(lines, args.output)
    return 0


def cmd_solve_demo(args):
    if not args.matrix:
        raise InvalidInputError("a matrix file is required (--matrix)")
    with open(args.matrix[0]) as fh:
        a_values = load_matrix(fh)
    n = a_values.shape[0]
    if len(args.matrix) > 1:
        with open(args.matrix[1]) as fh:
            a_deltas = load_matrix(fh)
        if a_deltas.shape != a_values.shape:
            raise InvalidInputError(
                "perturbation matrix shape differs from the base matrix")
    else:
        a_deltas = np.zeros_like(a_values)
    b_values = np.array(_parse_floats(args.x, "x") if args.x else [1.0] * n)
    b_deltas = np.array(_parse_floats(args.s, "s") if args.s else [0.0] * n)
    if b_values.shape != (n,) or b_deltas.shape != (n,):
        raise InvalidInputError(f"right-hand side lists must have {n} entries")
    out = solve_delta(DeltaMatrix(a_values, a_deltas),
                      DeltaVector(b_values, b_deltas))
    ref = oracle.oracle_solve_delta(a_values, a_deltas, b_values, b_deltas)
    lines = ["# i\tdx_cdd\tdx_oracle\tabs_err"]
    for k in range(n):
        lines.append("\t".join([str(k)] + [_fmt(v) for v in (
            out.deltas[k], ref[k], abs(out.deltas[k] - ref[k]))]))
    _emit(lines, args.output)
    return 0


def cmd_stagnation_demo(args):
    if not args.cond >= 1.0:
        raise InvalidInputError(f"condition number must be >= 1, got {args.cond!r}")
    if args.dim < 1:
        raise InvalidInputError(f"dimension must be positive, got {args.dim}")
    spectrum = np.logspace(0.0, np.log10(args.cond), args.dim)
    rng = np.random.default_rng(args.seed)
    d = -(1.0 + 0.25 * rng.uniform(size=args.dim))
    q = QuadraticObjective(np.diag(spectrum), d)
    report = run_quadratic_experiment(q, np.zeros(args.dim), args.max_iters,
                                      method=args.method)
    lines = ["# rule\titerations\tfinal_rel_err\tstop_reason"]
    for run in (report.objective_run, report.difference_run):
        lines.append("\t".join([run.rule, str(run.iterations),
                                _fmt(run.final_error), run.stop_reason]))
    lines.append(f"# ratio\t{_fmt(report.error_ratio)}")
    _emit(lines, args.output)
    obj_err = report.objective_run.final_error
    diff_err = report.difference_run.final_error
    return 0 if diff_err <= obj_err else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="divdiff",
        description="Accurate finite differences f(x+s)-f(x) for tiny steps.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sweep=False, demo=False):
        p.add_argument("-e", "--expr", help="expression over x0..x9")
        p.add_argument("-x", help="comma-separated base point")
        p.add_argument("-s", help="comma-separated step (sweep: direction)")
        p.add_argument("-o", "--output", help="write output to a file")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized suites")
        if sweep:
            p.add_argument("--sweep-hi", type=float, default=1e-1)
            p.add_argument("--sweep-lo", type=float, default=1e-20)
            p.add_argument("--points", type=int, default=20)
        if demo:
            p.add_argument("--dim", type=int, default=8)
            p.add_argument("--cond", type=float, default=1e4)
            p.add_argument("--method", choices=("sd", "newton"), default="sd")
            p.add_argument("--max-iters", type=int, default=500000)
        p.add_argument("--spline", help="spline definition file")
        p.add_argument("--matrix", action="append",
                       help="matrix file (give twice for base and perturbation)")

    handlers = {
        "eval": (cmd_eval, {}),
        "delta": (cmd_delta, {}),
        "sweep": (cmd_sweep, {"sweep": True}),
        "spline-demo": (cmd_spline_demo, {}),
        "solve-demo": (cmd_solve_demo, {}),
        "stagnation-demo": (cmd_stagnation_demo, {"demo": True}),
    }
    for name, (handler, kwargs) in handlers.items():
        p = sub.add_parser(name)
        common(p, **kwargs)
        p.set_defaults(handler=handler)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ComputeOverflowError, ConvergenceError) as exc:
        print(f"divdiff: numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    except DivDiffError as exc:
        print(f"divdiff: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except OSError as exc:
        print(f"divdiff: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
