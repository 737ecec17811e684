"""Command-line front end: ``gridflow {validate,build,solve,bench,generate}``.

Results are JSON on stdout (or ``--out``); diagnostics go to stderr, one
line each. Exit status is 0 on success, 1 on a domain error (invalid
feeder, singular branch, non-convergence) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

from . import bench
from .admittance import build, check_diagonal_dominance, check_minor_symmetry
from .errors import FeederSemanticError, GridflowError
from .model import FORMAT_VERSION, feeder_from_dict, load_feeder, parse_feeder, serialize_feeder, validate_feeder
from .powerflow import METHODS, SolveOptions, solve
from .sparse import compress, memory_positions, to_dict

FORMAT_NOTE = (
    f"Feeders are JSON documents in gridflow feeder format v{FORMAT_VERSION}: "
    "n_nodes, slack, optional slack_voltage, branches (from, to, z, b_from, b_to "
    "as 3x3 [re, im] pairs) and loads (node, connection wye|delta, s). Node "
    "indices are 0-based. A feeder path that does not exist is looked up in "
    "$GRIDFLOW_FIXTURES and then in the bundled fixtures."
)


class UsageError(Exception):
    pass


def fixtures_dir():
    return Path(str(resources.files("gridflow") / "fixtures"))


def resolve_feeder(name):
    """First existing file among ``name``, ``$GRIDFLOW_FIXTURES/...`` and the bundled fixtures."""
    path = Path(name)
    candidates = [path]
    env = os.environ.get("GRIDFLOW_FIXTURES")
    for root in ([Path(env)] if env else []) + [fixtures_dir()]:
        candidates += [root / path, root / path.name]
    for cand in candidates:
        if cand.is_file():
            return cand
    raise UsageError(f"{name}: feeder file not found")


def _emit(text, out):
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def cmd_validate(args):
    path = resolve_feeder(args.feeder)
    text = path.read_text(encoding="utf-8")
    try:
        diags = validate_feeder(parse_feeder(text))
    except FeederSemanticError:
        # syntax and schema are fine; list warnings alongside the errors
        diags = validate_feeder(feeder_from_dict(json.loads(text)))
    for d in diags:
        print(str(d), file=sys.stderr)
    ok = not any(d.severity == "error" for d in diags)
    report = {
        "feeder": str(path),
        "valid": ok,
        "diagnostics": [
            {"severity": d.severity, "path": d.path, "message": d.message} for d in diags
        ],
    }
    _emit(json.dumps(report, indent=2), None)
    return 0 if ok else 1


def cmd_build(args):
    feeder = load_feeder(resolve_feeder(args.feeder))
    y = build(feeder)
    Y = compress(y)
    dominance = check_diagonal_dominance(y)
    report = {
        "n_nodes": feeder.n_nodes,
        "n_branches": len(feeder.branches),
        "nnz": Y.nnz,
        "mem_dense": (3 * feeder.n_nodes) ** 2,
        "mem_sparse": memory_positions(Y),
        "shapes": {k: list(v) for k, v in Y.shapes().items()},
        "minor_symmetry_deviation": check_minor_symmetry(y),
        "min_row_sum_margin": float(dominance.row_sum_margin.min()),
    }
    if args.dump_tensor:
        Path(args.dump_tensor).write_text(json.dumps(to_dict(Y)) + "\n", encoding="utf-8")
    _emit(json.dumps(report, indent=2), None)
    return 0


def cmd_solve(args):
    opts = _options(args)
    feeder = load_feeder(resolve_feeder(args.feeder))
    report = solve(compress(build(feeder)), feeder, opts)
    _emit(report.to_json(indent=2), args.out)
    if not report.converged:
        print(
            f"error: solve did not converge ({report.status} after {report.iterations} iterations)",
            file=sys.stderr,
        )
        return 1
    return 0


def _options(args):
    try:
        return SolveOptions(tol=args.tol, max_iter=args.max_iter, method=args.method)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_bench(args):
    try:
        cfg = bench.BenchConfig(
            n_nodes=args.nodes, trials=args.trials, seed=args.seed, coupling=args.coupling
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = bench.run_benchmark(cfg)
    _emit(report.to_json(indent=2) if args.json else report.to_table(), None)
    return 0


def cmd_generate(args):
    try:
        feeder = bench.generate_radial(args.nodes, args.seed, args.coupling)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(serialize_feeder(feeder, indent=2), args.out)
    return 0


def make_parser():
    parser = argparse.ArgumentParser(
        prog="gridflow",
        description="Three-phase feeder admittance hypermatrices and load flow.",
        epilog=FORMAT_NOTE,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=FORMAT_NOTE)
        p.set_defaults(func=func)
        return p

    p = add("validate", cmd_validate, "Check a feeder file and list its diagnostics.")
    p.add_argument("feeder")

    p = add("build", cmd_build, "Build and compress the admittance hypermatrix of a feeder.")
    p.add_argument("feeder")
    p.add_argument("--dump-tensor", metavar="PATH", help="write {D, F, M, C, E} as JSON")

    p = add("solve", cmd_solve, "Run the constant-power load flow of a feeder.")
    p.add_argument("feeder")
    p.add_argument("--tol", type=float, default=1e-8, metavar="R")
    p.add_argument("--max-iter", type=int, default=200, metavar="K")
    p.add_argument("--method", choices=METHODS, default="zbus")
    p.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")

    p = add("bench", cmd_bench, "Time the sparse contraction against the dense matvec.")
    p.add_argument("--nodes", type=int, default=119, metavar="N")
    p.add_argument("--trials", type=int, default=50, metavar="T")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--coupling", choices=bench.COUPLINGS, default="full")
    p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = add("generate", cmd_generate, "Write a random radial feeder.")
    p.add_argument("--nodes", type=int, default=119, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--coupling", choices=bench.COUPLINGS, default="full")
    p.add_argument("--out", metavar="PATH", help="write the feeder here instead of stdout")
    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gridflow {args.command}: {exc}", file=sys.stderr)
        return 2
    except (GridflowError, ValueError, OSError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
