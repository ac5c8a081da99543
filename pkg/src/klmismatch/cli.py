"""Command-line entry point: ``klmismatch {bounds,simulate,witness,verify,plot}``.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 I/O error,
4 empty simulation result.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from pathlib import Path

from . import bounds as B
from .core import log_divisor, parse_base
from .errors import EmptyResultError, KLMismatchError, MalformedFileError
from .formats import read_curve_csv, read_points_csv, write_curve_csv, write_points_csv
from .plot import render_svg
from .simulator import SimConfig, bound_violations, parse_grid, simulate_arrays
from .verify import SUITES, run_suite
from .witness import WitnessSpec, build_witness, gap_row, GAP_HEADER, kind_for, witness_gap

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO, EXIT_EMPTY = 0, 1, 2, 3, 4
BASE_ENV = "KLMISMATCH_LOG_BASE"


class UsageError(Exception):
    pass


def _base_arg(value: str) -> float:
    try:
        return parse_base(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_base(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--base",
        type=_base_arg,
        default=None,
        help=f"log base for divergences: natural (default) or two; env {BASE_ENV}",
    )


def _resolve_base(args) -> float:
    if args.base is not None:
        return args.base
    try:
        return parse_base(os.environ.get(BASE_ENV) or None)
    except ValueError as exc:
        raise UsageError(f"{BASE_ENV}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="klmismatch",
        description="KL-divergence bounds on the classification error mismatch.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="write bound curves as CSV")
    p.add_argument("--kinds", default="nussbaum,refined", help="comma list of " + ",".join(B.KINDS))
    p.add_argument("--t", type=float, default=None, help="Bayes-error threshold (refined bound)")
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--out", default=".", help="output directory")
    _add_base(p)

    p = sub.add_parser("simulate", help="Monte Carlo point cloud under E* <= t")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--obs", type=int, default=6)
    p.add_argument("--t", type=float, default=0.08)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--witness-mix", type=float, default=0.3)
    p.add_argument("--concentration", type=float, default=0.1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="points CSV path")
    _add_base(p)

    p = sub.add_parser("witness", help="evaluate an equality-attaining construction")
    p.add_argument("family", choices=("nussbaum", "refined"))
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--obs", type=int, default=2)
    p.add_argument("--header", action="store_true", help="print the CSV header first")
    _add_base(p)

    p = sub.add_parser("verify", help="run randomized verification suites")
    p.add_argument("--suite", default="all", help="one of " + ", ".join(SUITES))
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=float, default=0.08)
    p.add_argument("--grid", default="0.1:0.7:0.1", help="oracle deltas, start:stop:step or list")
    p.add_argument("--trials", type=int, default=10_000, help="oracle search evaluations per delta")

    p = sub.add_parser("plot", help="render points and curves to SVG")
    p.add_argument("--points", required=True)
    p.add_argument("--curves", nargs="*", default=[])
    p.add_argument("--out", required=True)
    p.add_argument("--ymax", type=float, default=None)
    _add_base(p)
    return parser


def cmd_bounds(args) -> int:
    base = _resolve_base(args)
    if args.grid < 2:
        raise UsageError("--grid must be at least 2")
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    if not kinds:
        raise UsageError("--kinds is empty")
    parsed = []
    for k in kinds:
        if k not in B.KINDS:
            raise UsageError(f"unknown kind {k!r} in --kinds")
        if k == "refined" and args.t is None:
            raise UsageError("the refined kind requires --t")
        try:
            parsed.append(B.BoundKind.parse(k, args.t))
        except KLMismatchError as exc:
            raise UsageError(f"--t: {exc}") from None
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for kind in parsed:
            curve = B.bound_curve(kind, args.grid, base)
            with open(out / f"{kind.tag}.csv", "w", newline="") as fh:
                write_curve_csv(curve, fh)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(parsed)} curve(s) to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    base = _resolve_base(args)
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    try:
        cfg = SimConfig(
            args.classes, args.obs, args.t, args.samples, args.seed, args.witness_mix, args.concentration
        )
    except KLMismatchError as exc:
        raise UsageError(str(exc)) from None
    try:
        sim = simulate_arrays(cfg, workers=args.workers)
    except EmptyResultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    viol = bound_violations(sim)
    points = sim.points()
    scale = log_divisor(base)
    if scale != 1.0:
        points = [
            dataclasses.replace(
                p,
                kl_conditional=p.kl_conditional / scale,
                kl_joint=p.kl_joint / scale,
                bound_nussbaum=p.bound_nussbaum / scale,
                bound_refined=p.bound_refined / scale,
            )
            for p in points
        ]
    try:
        with open(args.out, "w", newline="") as fh:
            write_points_csv(points, fh)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"accepted,{len(sim)},drawn,{sim.num_drawn}")
    print(f"violations,{viol.total},max_violation,{viol.max_violation:.3g}")
    return EXIT_OK if viol.total == 0 else EXIT_FAIL


def cmd_witness(args) -> int:
    base = _resolve_base(args)
    try:
        spec = WitnessSpec(args.family, args.lam, args.eps, args.t, args.classes, args.obs)
    except KLMismatchError as exc:
        raise UsageError(str(exc)) from None
    report = witness_gap(build_witness(spec), kind_for(spec), base)
    if args.header:
        print(GAP_HEADER)
    print(gap_row(spec, report))
    tol = 10.0 * spec.epsilon / log_divisor(base)
    return EXIT_OK if 0.0 <= report.gap <= tol else EXIT_FAIL


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; expected one of {', '.join(SUITES)}")
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    if not (0.0 < args.t < 0.5):
        raise UsageError("--t must lie in (0, 0.5)")
    try:
        grid = parse_grid(args.grid)
    except ValueError as exc:
        raise UsageError(f"--grid: {exc}") from None
    try:
        results = run_suite(args.suite, args.samples, args.seed, args.t, grid, args.trials)
    except EmptyResultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except KLMismatchError as exc:
        raise UsageError(str(exc)) from None
    print("suite,check,trials,violations,worst_excess")
    total = 0
    for res in results:
        for c in res.checks:
            print(f"{c.suite},{c.check},{c.trials},{c.violations},{c.worst:.3g}")
        total += res.violations
    for res in results:
        if res.table:
            print()
            print("\n".join(res.table))
    print()
    print(f"total_violations,{total}")
    return EXIT_OK if total == 0 else EXIT_FAIL


def cmd_plot(args) -> int:
    base = _resolve_base(args)
    try:
        rows = read_points_csv(args.points)
        curves = []
        for path in args.curves:
            d, v = read_curve_csv(path)
            curves.append((Path(path).stem, d, v))
    except MalformedFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    dq = [r["delta_q"] for r in rows]
    kl = [r["kl_joint"] for r in rows]
    units = "bits" if base == 2.0 else "nats"
    svg = render_svg((dq, kl), curves, units=units, y_max=args.ymax)
    try:
        Path(args.out).write_text(svg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


COMMANDS = {
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "witness": cmd_witness,
    "verify": cmd_verify,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"klmismatch {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
