"""Reporter module for formatting analysis runs and writing their side files."""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import sympy

from aci_workbench.algebra import format_scalar, is_exact_scalar
from aci_workbench.pipeline import PipelineReport

logger = logging.getLogger(__name__)


# What to look at when a stage fails
SUGGESTIONS: dict[str, str] = {
    "system": "Check the system name with 'aci list' and the parameter names in the config.",
    "weights": "The vector field has no positive integer weights making it homogeneous; check the registry entry.",
    "balances": (
        "Increase 'random_starts' or change 'seed'; a balance family may need more starts "
        "to be reached by Newton iteration."
    ),
    "spectrum": (
        "No balance has dim - 1 free parameters. Check for defective resonances in the spectrum data, "
        "or tighten 'balance_residual' so spurious balances are rejected."
    ),
    "families": (
        "A compatibility condition failed at a resonance. For float families loosen 'compatibility'; "
        "for exact families the system is not algebraically completely integrable as given."
    ),
    "levels": "Choose generic levels; special values can make the level equations degenerate.",
    "divisor": (
        "Increase 'samples' or loosen 'membership'. A poorly conditioned fit means the monomial basis "
        "is too large for the curve."
    ),
    "periods": (
        "The branch points may be too close for the cycle routing; move the levels away from "
        "discriminant values or raise the quadrature node count."
    ),
    "prym": (
        "The involution did not act integrally on the lattice. Verify the differential exponents "
        "and their signs under the involution."
    ),
    "polarization": "Compare the cover data (g0, n) in the registry metadata with the divisor genus.",
    "dynamics": (
        "Reduce 'step' or 't_end'. Large drift usually means the trajectory passed close to "
        "the divisor at infinity."
    ),
    "integrate": "Reduce the step or start closer to the origin.",
    "fit": "Provide at least twice as many samples as monomials and check the degree.",
}

DEFAULT_SUGGESTION = "Re-run with --verbose and inspect the stage data in the JSON report."


def get_suggestion(stage: str) -> str:
    """Get a follow-up suggestion for a failing stage."""
    return SUGGESTIONS.get(stage, DEFAULT_SUGGESTION)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, np.bool_)):
        return value.item()
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (Fraction, sympy.Rational)):
        return str(value)
    if is_exact_scalar(value):
        return format_scalar(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def format_json(report: PipelineReport) -> dict[str, Any]:
    """Convert a PipelineReport to a JSON-serializable dictionary.

    Args:
        report: The pipeline report to format.

    Returns:
        Dictionary representation of the report.
    """
    return {
        "system": report.system,
        "is_valid": report.is_valid,
        "summary": {
            "total_issues": len(report.issues),
            "errors": report.error_count,
            "warnings": report.warning_count,
            "stages": {stage.name: stage.status for stage in report.stages},
        },
        "config": report.config,
        "stages": [{"name": s.name, "status": s.status, "data": s.data} for s in report.stages],
        "issues": [
            {
                "stage": issue.stage,
                "severity": issue.severity.value,
                "message": issue.message,
                "suggestion": get_suggestion(issue.stage),
            }
            for issue in report.issues
        ],
    }


def format_json_string(report: PipelineReport, indent: int = 2) -> str:
    """Convert a PipelineReport to a JSON string.

    Args:
        report: The pipeline report to format.
        indent: Indentation level for pretty printing.

    Returns:
        JSON string representation.
    """
    return json.dumps(format_json(report), indent=indent, ensure_ascii=False, default=_json_default)


def generate_report(report: PipelineReport) -> str:
    """Generate a human-readable report with stage statuses and suggestions.

    Args:
        report: The pipeline report to describe.

    Returns:
        Formatted text report.
    """
    lines: list[str] = []

    # Header
    lines.append(f"Analysis Report: {report.system}")
    lines.append("=" * 50)

    # Summary
    if report.is_valid:
        lines.append("Status: PASSED (all checks hold)")
    else:
        lines.append("Status: FAILED (checks failed)")

    lines.append(f"Issues: {len(report.issues)} ({report.error_count} errors, {report.warning_count} warnings)")
    lines.append("")

    if report.stages:
        lines.append("Stages:")
        lines.append("-" * 30)
        for stage in report.stages:
            lines.append(f"  {stage.name:<14} {stage.status}")
        lines.append("")

    # Issues with suggestions
    if report.issues:
        lines.append("Issues Found:")
        lines.append("-" * 30)

        for i, issue in enumerate(report.issues, 1):
            severity_label = issue.severity.value.upper()
            lines.append(f"{i}. [{severity_label}] {issue.stage}")
            lines.append(f"   {issue.message}")
            lines.append(f"   Suggestion: {get_suggestion(issue.stage)}")
            lines.append("")
    else:
        lines.append("No issues found.")

    return "\n".join(lines)


def write_csv(path: str | Path, header: Sequence[str], rows: np.ndarray) -> Path:
    """Write a real table with a comma-separated header line."""
    path = Path(path)
    table = np.asarray(rows, dtype=float).reshape(-1, len(header))
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
    return path


def write_report(report: PipelineReport, out_dir: str | Path) -> list[Path]:
    """Write ``<system>.json`` and one ``<system>_<table>.csv`` per side table.

    Returns:
        The paths written, JSON first.
    """
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    written = [directory / f"{report.system}.json"]
    written[0].write_text(format_json_string(report) + "\n", encoding="utf-8")
    for name, (header, rows) in report.tables.items():
        written.append(write_csv(directory / f"{report.system}_{name}.csv", header, rows))
    logger.info("Wrote %d report files to %s", len(written), directory)
    return written
