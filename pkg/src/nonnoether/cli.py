"""Command-line entry point.

Exit status: 0 when every gate passes, 2 when a gate fails, 1 for usage,
parse or load errors. Diagnostics go to stderr; reports are written to
``--out``.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .dsl.expr import ExprSyntaxError, UnknownIdentifier
from .dsl.system import DocumentError, catalog_document, catalog_names, default_x0, load_system, resolve_document
from .dynamics import TrajectoryConfig
from .errors import IntegrationError, MissingSymmetryError, NumericalDomainError, ValidationError
from .reports import dumps, gates_passed, run_check, run_integrate, run_invariants
from .tolerances import scaled

EXIT_OK, EXIT_USAGE, EXIT_GATE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_float(text: str) -> float:
    v = float(text)
    if not (np.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nonnoether", description="Gates and invariants for Hamiltonian systems with a symmetry.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--system", required=True, help="catalog name or path to a .toml/.json system file")
    common.add_argument("--seed", type=int, default=0, help="seed for random sample points (default 0)")
    common.add_argument("--tol-scale", type=_positive_float, default=1.0, help="multiply every upper tolerance")
    common.add_argument("--out", default=".", help="directory for report files (default: current directory)")

    p = sub.add_parser("check", parents=[common], help="run every gate and write a JSON report")
    p.add_argument("--points", type=_positive_int, default=20, help="number of random sample points")

    p = sub.add_parser("invariants", parents=[common], help="evaluate the invariant bundle at points")
    p.add_argument("--points", type=_positive_int, default=20, help="number of random sample points")
    p.add_argument("--at", type=_floats, action="append", help="explicit point, comma separated (repeatable)")
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("integrate", parents=[common], help="integrate and report invariant drift (JSON + CSV)")
    p.add_argument("--dt", type=_positive_float, default=1e-3)
    p.add_argument("--steps", type=_positive_int, default=1000)
    p.add_argument("--stride", type=_positive_int, default=10, help="store every N-th step")
    p.add_argument("--x0", type=_floats, help="initial point, comma separated (default from the system file)")

    sub.add_parser("catalog", help="list the built-in systems")
    return parser


def _log(msg: str):
    print(msg, file=sys.stderr)


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    _log(f"wrote {path}")
    return path


def _summarize(report):
    for name, gate in report["gates"].items():
        status = "pass" if gate["passed"] else "FAIL"
        if not gate.get("gated", True):
            status += " (not gated)"
        _log(f"  {name:<16} {status}")


def _check_dim(args_point, dim, flag):
    if len(args_point) != dim:
        raise ValueError(f"{flag} needs {dim} values, got {len(args_point)}")
    return np.asarray(args_point, dtype=float)


def _run(args) -> int:
    if args.command == "catalog":
        for name in catalog_names():
            print(f"{name}\t{catalog_document(name).description}")
        return EXIT_OK

    tol = scaled(args.tol_scale)
    doc = resolve_document(args.system)
    try:
        system = load_system(doc, seed=args.seed)
    except ValidationError as exc:
        _log(f"{doc.name}: load gate failed")
        for f in exc.failures:
            _log(f"  {f['gate']}: {f['detail']}")
        return EXIT_GATE
    out = Path(args.out)
    stem = system.name or Path(args.system).stem
    _log(f"{stem}: {args.command}")

    if args.command == "check":
        report = run_check(system, args.points, args.seed, tol)
        _write(out, f"{stem}-check.json", dumps(report))
    elif args.command == "invariants":
        if args.at:
            pts = np.array([_check_dim(p, system.dim, "--at") for p in args.at])
        else:
            pts = system.sample_points(args.points, args.seed)
        report, csv_text = run_invariants(system, pts, args.seed, tol)
        if args.format == "json":
            _write(out, f"{stem}-invariants.json", dumps(report))
        else:
            _write(out, f"{stem}-invariants.csv", csv_text)
    else:
        x0 = _check_dim(args.x0, system.dim, "--x0") if args.x0 else default_x0(doc, system)
        cfg = TrajectoryConfig(dt=args.dt, steps=args.steps, stride=args.stride)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report, csv_text = run_integrate(system, x0, cfg, tol)
        for w in caught:
            _log(f"warning: {w.message}")
        _write(out, f"{stem}-drift.json", dumps(report))
        _write(out, f"{stem}-trajectory.csv", csv_text)

    _summarize(report)
    return EXIT_OK if gates_passed(report) else EXIT_GATE


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors, --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _run(args)
    except (FileNotFoundError, DocumentError, ExprSyntaxError, UnknownIdentifier, MissingSymmetryError,
            ValueError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except (IntegrationError, NumericalDomainError) as exc:
        _log(f"error: {exc}")
        return EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
