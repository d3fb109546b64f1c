"""Command-line interface.

Exit codes: 0 success / feasible, 2 parse or input error, 3 unstable
system, 4 not certified, 5 solver failure.
"""

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .errors import DimensionError, InvalidInput, SolverFailure, UnstableSystem
from .files import ParseError, load_system, write_csv
from .lti import StateSpace, simulate
from .posnorm import DEFAULT_TOL, bound_sweep, hinf_norm
from .rnn import RnnModel, RnnTemplate, certify, region_sweep, simulate_rnn

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_UNSTABLE = 3
EXIT_INFEASIBLE = 4
EXIT_SOLVER = 5

log = logging.getLogger("posgain")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load(path, want):
    try:
        model = load_system(path)
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {path}: {exc.strerror}") from None
    except ParseError as exc:
        raise CliError(EXIT_PARSE, f"parse error: {exc}") from None
    except UnstableSystem as exc:
        raise CliError(EXIT_UNSTABLE, f"{path}: {exc}") from None
    if want == "statespace" and not isinstance(model, StateSpace):
        raise CliError(EXIT_PARSE, f"{path}: expected a statespace document")
    if want == "rnn":
        if isinstance(model, RnnTemplate):
            try:
                model = model.base_model()
            except UnstableSystem as exc:
                raise CliError(EXIT_UNSTABLE, f"{path}: {exc}") from None
        if not isinstance(model, RnnModel):
            raise CliError(EXIT_PARSE, f"{path}: expected an rnn document")
    if want == "template" and not isinstance(model, RnnTemplate):
        if not isinstance(model, RnnModel):
            raise CliError(EXIT_PARSE, f"{path}: expected an rnn document")
        model = RnnTemplate(model.Lambda, model.Win, model.Wout)
    return model


def _emit(args, text):
    if not args.quiet:
        print(text)


def _grid(spec, name):
    try:
        lo, hi, steps = spec.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise CliError(EXIT_PARSE, f"--{name} must be lo:hi:steps, got {spec!r}") from None
    if steps < 1:
        raise CliError(EXIT_PARSE, f"--{name} needs at least one step")
    return np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])


def cmd_norm(args):
    sys_ = _load(args.system, "statespace")
    try:
        value = hinf_norm(sys_, args.tol)
    except UnstableSystem as exc:
        raise CliError(EXIT_UNSTABLE, str(exc)) from None
    print(f"{value:.10g}")
    return EXIT_OK


def cmd_bounds(args):
    sys_ = _load(args.system, "statespace")
    try:
        report = bound_sweep(sys_, args.nmax, args.tol)
    except UnstableSystem as exc:
        raise CliError(EXIT_UNSTABLE, str(exc)) from None
    rows = [(r.N, r.upper, r.lower, report.hinf) for r in report.rows]
    text = write_csv(args.out, ["N", "upper", "lower", "hinf"], rows)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    _emit(args, f"# hinf={report.hinf:.10g} best_upper={report.best_upper!s} "
                f"best_lower={report.best_lower!s}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def _cert_rows(verdict):
    rows = []
    for test, values in sorted(verdict.witnesses.items()):
        for name, M in sorted(values.items()):
            M = np.atleast_2d(M)
            for (i, j), x in np.ndenumerate(M):
                rows.append((test, name, i, j, float(x)))
    return rows


def cmd_rnn_check(args):
    rnn = _load(args.system, "rnn")
    verdict = certify(rnn, N=args.lift, tol=args.tol)
    if verdict.ssg_cop_feasible is None:
        for note in verdict.notes:
            print(f"note: {note}", file=sys.stderr)
        raise CliError(EXIT_SOLVER, "solver could not decide the small-gain tests")
    fmt = lambda x: "n/a" if x is None else f"{x:.10g}"
    _emit(args, f"SSG: {'feasible' if verdict.ssg_feasible else 'infeasible'}")
    _emit(args, f"SSG+COP: {'feasible' if verdict.ssg_cop_feasible else 'infeasible'}")
    _emit(args, f"gamma0: {fmt(verdict.gamma0)}")
    _emit(args, f"gamma0+ (N={args.lift}): {fmt(verdict.gamma0_plus)}")
    _emit(args, f"gamma1: {fmt(verdict.gamma1)}")
    _emit(args, f"certified gain: {fmt(verdict.certified_gain)}")
    for note in verdict.notes:
        _emit(args, f"note: {note}")
    if args.out:
        write_csv(args.out, ["test", "matrix", "row", "col", "value"], _cert_rows(verdict))
    return EXIT_OK if verdict.ssg_cop_feasible else EXIT_INFEASIBLE


def cmd_sweep(args):
    template = _load(args.system, "template")
    a_vals, b_vals = _grid(args.a, "a"), _grid(args.b, "b")
    cells = region_sweep(template, a_vals, b_vals)
    rows = [(c.a, c.b, c.classification) for c in cells]
    text = write_csv(args.out, ["a", "b", "classification"], rows)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    counts = {}
    for c in cells:
        counts[c.classification] = counts.get(c.classification, 0) + 1
    _emit(args, "# " + " ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return EXIT_OK


def _input_signal(kind, K, channels, rng):
    if kind == "impulse":
        w = np.zeros((K, channels))
        w[0] = 1.0
    elif kind == "step":
        w = np.ones((K, channels))
    else:
        w = rng.random((K, channels))
    return w


def cmd_simulate(args):
    try:
        model = load_system(args.system)
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {args.system}: {exc.strerror}") from None
    except ParseError as exc:
        raise CliError(EXIT_PARSE, f"parse error: {exc}") from None
    except UnstableSystem as exc:
        raise CliError(EXIT_UNSTABLE, str(exc)) from None
    rng = np.random.default_rng(args.seed)
    K = args.steps
    if isinstance(model, RnnTemplate):
        model = model.base_model()
    try:
        if isinstance(model, StateSpace):
            w = _input_signal(args.input, K, model.nw, rng)
            z, x = simulate(model, w, K)
            header = ["k"] + [f"w{i}" for i in range(model.nw)] + \
                [f"z{i}" for i in range(model.nz)] + [f"x{i}" for i in range(model.n)]
            data = np.hstack([w, z, x[:K]])
        else:
            s = _input_signal(args.input, K, model.m, rng)
            v = _input_signal(args.input, K, model.n, rng)
            x, z, w = simulate_rnn(model, s, v, K)
            header = ["k"] + [f"s{i}" for i in range(model.m)] + [f"v{i}" for i in range(model.n)] \
                + [f"w{i}" for i in range(model.m)] + [f"z{i}" for i in range(model.m)] \
                + [f"x{i}" for i in range(model.n)]
            data = np.hstack([s, v, w, z, x[:K]])
    except (DimensionError, InvalidInput) as exc:
        raise CliError(EXIT_PARSE, str(exc)) from None
    rows = [[k] + list(r) for k, r in enumerate(data)]
    text = write_csv(args.out, header, rows)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL,
                        help="relative bisection tolerance (default %(default)g)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized inputs")
    common.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    common.add_argument("--quiet", action="store_true", help="suppress summary output")

    p = argparse.ArgumentParser(
        prog="posgain",
        description="Positive l2-induced norm bounds and ReLU RNN stability certificates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("norm", parents=[common], help="l2-induced (H-infinity) norm")
    s.add_argument("system")
    s.set_defaults(func=cmd_norm)

    s = sub.add_parser("bounds", parents=[common],
                       help="upper/lower bounds on the positive norm for N = 1..nmax")
    s.add_argument("system")
    s.add_argument("--nmax", type=int, default=20)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("rnn-check", parents=[common], help="small-gain stability tests")
    s.add_argument("system")
    s.add_argument("--lift", type=int, default=4, help="lifting order for gamma0+")
    s.set_defaults(func=cmd_rnn_check)

    s = sub.add_parser("sweep", parents=[common], help="(a, b) parameter region sweep")
    s.add_argument("system")
    s.add_argument("--a", default="-8:8:17", help="lo:hi:steps")
    s.add_argument("--b", default="-8:8:17", help="lo:hi:steps")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("simulate", parents=[common], help="trajectory dump")
    s.add_argument("system")
    s.add_argument("--input", choices=["impulse", "step", "random"], default="impulse",
                   help="random draws seeded nonnegative uniform samples")
    s.add_argument("--steps", type=int, default=50)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SolverFailure as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
