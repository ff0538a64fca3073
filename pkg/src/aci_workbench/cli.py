"""Command-line interface for the algebraic integrability workbench."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from aci_workbench.config import PipelineConfig
from aci_workbench.divisor import bidegree_basis
from aci_workbench.errors import WorkbenchError
from aci_workbench.loader import load_config, load_curve, load_periods, load_samples
from aci_workbench.pipeline import (
    PipelineReport,
    parse_involution,
    run_fit,
    run_integrate,
    run_periods,
    run_pipeline,
    run_prym,
    scalar_list,
)
from aci_workbench.reporter import format_json_string, generate_report, write_report
from aci_workbench.systems import list_systems


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser."""
    parser = argparse.ArgumentParser(
        prog="aci",
        description="Painleve analysis, divisor curves and Prym period matrices for integrable systems",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Log debug output to stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("list", help="List the registry systems")

    analyze = commands.add_parser("analyze", help="Run every stage for a registry system")
    analyze.add_argument("system", help="Registry system name (see 'aci list')")
    analyze.add_argument("--config", help="Path to a pipeline config JSON file")
    analyze.add_argument("--out", help="Directory for the JSON report and CSV side files")
    analyze.add_argument("--json", action="store_true", help="Output results as JSON")

    periods = commands.add_parser("periods", help="Period matrix of a hyperelliptic curve y^2 = P(x)")
    periods.add_argument("curve", help="Path to the curve JSON file")
    periods.add_argument("--exponents", type=_int_list, help="Differential exponents j of x^j dx/y, e.g. 2,0,1")
    periods.add_argument("--out", help="Write the period matrix JSON here (input for 'aci prym')")
    periods.add_argument("--json", action="store_true", help="Output results as JSON")

    prym = commands.add_parser("prym", help="Prym split of a stored period matrix")
    prym.add_argument("periods", help="Path to a period matrix JSON file")
    prym.add_argument(
        "--involution",
        required=True,
        help="'x=-1' to reflect the curve variable, or 'signs=-1,-1,1' for the differentials",
    )
    prym.add_argument("--json", action="store_true", help="Output results as JSON")

    integrate = commands.add_parser("integrate", help="Integrate a registry system and monitor invariants")
    integrate.add_argument("system", help="Registry system name")
    integrate.add_argument("--x0", required=True, help="Comma-separated initial state, complex allowed (1+2j)")
    integrate.add_argument("--t", type=float, default=5.0, help="Final time (default: 5)")
    integrate.add_argument("--step", type=float, default=0.01, help="Nominal step (default: 0.01)")
    integrate.add_argument("--out", help="Directory for the JSON report and trajectory CSV")
    integrate.add_argument("--json", action="store_true", help="Output results as JSON")

    fit = commands.add_parser("fit", help="Fit a polynomial relation through sampled points")
    fit.add_argument("samples", help="Path to a samples CSV file")
    basis = fit.add_mutually_exclusive_group(required=True)
    basis.add_argument("--degree", type=int, help="Fit beta^2 = P(alpha) with deg P <= DEGREE")
    basis.add_argument("--bidegree", type=_int_list, help="Fit all monomials up to these degrees, e.g. 4,2")
    fit.add_argument("--json", action="store_true", help="Output results as JSON")
    return parser


def _emit(report: PipelineReport, as_json: bool, out: str | None = None) -> int:
    # Output
    if out:
        write_report(report, out)
    if as_json:
        print(format_json_string(report))
    else:
        print(generate_report(report))
    return 0 if report.is_valid else 1


def _list() -> int:
    for definition in list_systems():
        print(f"{definition.name:<14} {definition.description}")
    return 0


def _analyze(args: argparse.Namespace) -> int:
    config = PipelineConfig(system=args.system)
    if args.config:
        load_result = load_config(args.config)
        if not load_result.success:
            print(f"Error: {load_result.error}", file=sys.stderr)
            return 1
        config = load_result.data
        if config.system != args.system:
            print(f"Error: config is for {config.system!r}, not {args.system!r}", file=sys.stderr)
            return 1
    report = run_pipeline(args.system, config)
    return _emit(report, args.json, args.out)


def _periods(args: argparse.Namespace) -> int:
    load_result = load_curve(args.curve)
    if not load_result.success:
        print(f"Error: {load_result.error}", file=sys.stderr)
        return 1
    exponents = args.exponents or load_result.data["exponents"]
    report, periods = run_periods(load_result.data["polynomial"], exponents)
    if args.out and periods is not None:
        stored = periods.to_json()
        stored["exponents"] = report.stages[0].data["exponents"]
        Path(args.out).write_text(json.dumps(stored, indent=2) + "\n", encoding="utf-8")
    return _emit(report, args.json)


def _prym(args: argparse.Namespace) -> int:
    load_result = load_periods(args.periods)
    if not load_result.success:
        print(f"Error: {load_result.error}", file=sys.stderr)
        return 1
    try:
        signs, action = parse_involution(args.involution, load_result.data["exponents"])
    except WorkbenchError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 1
    report = run_prym(load_result.data["periods"], signs, action)
    return _emit(report, args.json)


def _integrate(args: argparse.Namespace) -> int:
    try:
        x0 = scalar_list(args.x0)
    except WorkbenchError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 1
    report = run_integrate(args.system, x0, args.t, args.step)
    return _emit(report, args.json, args.out)


def _fit(args: argparse.Namespace) -> int:
    load_result = load_samples(args.samples)
    if not load_result.success:
        print(f"Error: {load_result.error}", file=sys.stderr)
        return 1
    variables = load_result.data["variables"]
    if args.degree is not None:
        if len(variables) != 2:
            print(f"Error: --degree needs two columns (alpha, beta), got {list(variables)}", file=sys.stderr)
            return 1
        basis: int | list[tuple[int, ...]] = args.degree
    else:
        if len(args.bidegree) != len(variables):
            print(f"Error: --bidegree needs {len(variables)} entries", file=sys.stderr)
            return 1
        basis = bidegree_basis(args.bidegree)
    report = run_fit(load_result.data["rows"], variables, basis)
    return _emit(report, args.json)


def main(argv: list[str] | None = None) -> int:
    """Entry point for the CLI."""
    parser = create_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)

    if args.command == "list":
        return _list()
    if args.command == "analyze":
        return _analyze(args)
    if args.command == "periods":
        return _periods(args)
    if args.command == "prym":
        return _prym(args)
    if args.command == "integrate":
        return _integrate(args)
    return _fit(args)


if __name__ == "__main__":
    raise SystemExit(main())
