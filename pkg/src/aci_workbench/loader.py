"""Loader module for configs, curves, period matrices and sample tables."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from aci_workbench.algebra import MultiPoly
from aci_workbench.config import PipelineConfig
from aci_workbench.errors import WorkbenchError
from aci_workbench.riemann import PeriodMatrix


@dataclass
class LoadResult:
    """Result of loading an input file."""

    success: bool
    data: Any = None
    error: str | None = None
    file_path: Path | None = None


def _check_path(path: Path, suffix: str) -> LoadResult | None:
    if not path.exists():
        return LoadResult(success=False, error=f"File not found: {path}", file_path=path)
    if not path.is_file():
        return LoadResult(success=False, error=f"Not a file: {path}", file_path=path)
    if path.suffix.lower() != suffix:
        return LoadResult(
            success=False,
            error=f"Invalid file extension: {path.suffix} (expected {suffix})",
            file_path=path,
        )
    return None


def load_json(file_path: str | Path) -> LoadResult:
    """Load a JSON object from a file.

    Args:
        file_path: Path to the JSON file.

    Returns:
        LoadResult containing the parsed object or error information.
    """
    path = Path(file_path)
    failure = _check_path(path, ".json")
    if failure is not None:
        return failure

    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        return LoadResult(success=False, error=f"Invalid JSON: {e}", file_path=path)
    except OSError as e:
        return LoadResult(success=False, error=f"Failed to read file: {e}", file_path=path)

    if not isinstance(data, dict):
        return LoadResult(success=False, error="Input must be a JSON object", file_path=path)

    return LoadResult(success=True, data=data, file_path=path)


def load_config(file_path: str | Path) -> LoadResult:
    """Load and validate a pipeline config; ``data`` is a PipelineConfig."""
    result = load_json(file_path)
    if not result.success:
        return result
    try:
        config = PipelineConfig.from_dict(result.data)
    except WorkbenchError as e:
        return LoadResult(success=False, error=f"Invalid config: {e}", file_path=result.file_path)
    return LoadResult(success=True, data=config, file_path=result.file_path)


def load_curve(file_path: str | Path) -> LoadResult:
    """Load a univariate polynomial P for y^2 = P.

    The file holds either a polynomial object ``{"vars", "terms"}`` or
    ``{"polynomial": {...}, "exponents": [...]}`` with the differential
    exponents to integrate. ``data`` is ``{"polynomial", "exponents"}``.
    """
    result = load_json(file_path)
    if not result.success:
        return result
    raw = result.data
    body = raw.get("polynomial", raw)
    exponents = raw.get("exponents")
    try:
        polynomial = MultiPoly.from_json(body)
    except (KeyError, TypeError, ValueError) as e:
        return LoadResult(success=False, error=f"Invalid polynomial: {e}", file_path=result.file_path)
    if polynomial.nvars != 1:
        return LoadResult(
            success=False,
            error=f"Curve polynomial must be univariate, got variables {list(polynomial.variables)}",
            file_path=result.file_path,
        )
    if exponents is not None and not (
        isinstance(exponents, list) and all(isinstance(j, int) and not isinstance(j, bool) for j in exponents)
    ):
        return LoadResult(success=False, error="'exponents' must be a list of integers", file_path=result.file_path)
    data = {"polynomial": polynomial, "exponents": tuple(exponents) if exponents is not None else None}
    return LoadResult(success=True, data=data, file_path=result.file_path)


def period_matrix_from_json(obj: dict[str, Any]) -> PeriodMatrix:
    """Inverse of PeriodMatrix.to_json (the derived residual is recomputed)."""
    omega = np.asarray(obj["omega"], dtype=float)
    if omega.ndim != 3 or omega.shape[2] != 2 or omega.shape[1] != 2 * omega.shape[0]:
        raise ValueError(f"'omega' must be g x 2g [re, im] pairs, got shape {list(omega.shape)}")
    intersection = np.asarray(obj["intersection"], dtype=int)
    if intersection.shape != (omega.shape[1], omega.shape[1]):
        raise ValueError(f"'intersection' must be {omega.shape[1]} x {omega.shape[1]}")
    return PeriodMatrix(
        omega=omega[..., 0] + 1j * omega[..., 1],
        intersection=intersection,
        cycle_labels=tuple(obj.get("cycles", ())),
        differential_labels=tuple(obj.get("differentials", ())),
        quadrature_error=float(obj.get("quadrature_error", 0.0)),
    )


def load_periods(file_path: str | Path) -> LoadResult:
    """Load a period matrix written by ``aci periods --out``.

    ``data`` is ``{"periods": PeriodMatrix, "exponents": tuple | None}``.
    """
    result = load_json(file_path)
    if not result.success:
        return result
    try:
        periods = period_matrix_from_json(result.data)
    except (KeyError, TypeError, ValueError) as e:
        return LoadResult(success=False, error=f"Invalid period matrix: {e}", file_path=result.file_path)
    exponents = result.data.get("exponents")
    data = {"periods": periods, "exponents": tuple(exponents) if exponents is not None else None}
    return LoadResult(success=True, data=data, file_path=result.file_path)


def load_samples(file_path: str | Path) -> LoadResult:
    """Load a CSV of complex samples with ``name_re,name_im`` column pairs.

    ``data`` is ``{"variables": tuple, "rows": complex ndarray}``.
    """
    path = Path(file_path)
    failure = _check_path(path, ".csv")
    if failure is not None:
        return failure

    try:
        with open(path, encoding="utf-8") as f:
            header = f.readline().strip().lstrip("#").strip()
        values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as e:
        return LoadResult(success=False, error=f"Invalid CSV: {e}", file_path=path)
    except OSError as e:
        return LoadResult(success=False, error=f"Failed to read file: {e}", file_path=path)

    columns = [c.strip() for c in header.split(",")] if header else []
    if not columns or len(columns) % 2 or any(
        not (re.endswith("_re") and im == re[:-3] + "_im") for re, im in zip(columns[::2], columns[1::2])
    ):
        return LoadResult(success=False, error="CSV header must list name_re,name_im pairs", file_path=path)
    if values.size and values.shape[1] != len(columns):
        return LoadResult(
            success=False,
            error=f"CSV rows have {values.shape[1]} columns, header has {len(columns)}",
            file_path=path,
        )
    variables = tuple(c[:-3] for c in columns[::2])
    rows = values[:, 0::2] + 1j * values[:, 1::2] if values.size else np.zeros((0, len(variables)), dtype=complex)
    return LoadResult(success=True, data={"variables": variables, "rows": rows}, file_path=path)

