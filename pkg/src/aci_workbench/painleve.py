"""Painleve analysis: weights, balances, Kowalewski exponents and Laurent families."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Any

import numpy as np
import scipy.linalg

from aci_workbench.algebra import (
    CompiledPolys,
    MultiPoly,
    PolyMatrix,
    compile_jacobian,
    format_scalar,
    poly_adjugate,
    poly_det,
    poly_eval,
    poly_exact_quotient,
    poly_submatrix,
    rationalize,
    to_complex,
)
from aci_workbench.config import DEFAULT_TOLERANCES, Tolerances
from aci_workbench.errors import BalanceError, FamilyError, SpectrumError, WeightHomogeneityError
from aci_workbench.series import LaurentSeries, LaurentVectorSeries, substitute_series
from aci_workbench.systems import HamiltonianSystem

logger = logging.getLogger(__name__)

MAX_WEIGHT = 4
NEWTON_MAX_ITERATIONS = 150
NEWTON_TOLERANCE = 1e-13
CONTINUATION_STEPS = 12
CONTINUATION_PATHS = 6


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


def weights_are_valid(system: HamiltonianSystem, weights: Sequence[int]) -> bool:
    """True when each nonzero f_i has top weighted degree weights[i] + 1."""
    if len(weights) != system.dimension or any(w < 1 for w in weights):
        return False
    for w, f in zip(weights, system.vector_field):
        if f.is_zero():
            continue
        if f.weighted_degree(weights) != w + 1:
            return False
    return True


def detect_weights(system: HamiltonianSystem, max_weight: int = MAX_WEIGHT) -> tuple[int, ...]:
    """Smallest positive weights making the vector field weight-homogeneous.

    Candidates are tried by increasing sum, then lexicographically, so the
    answer is unique.
    """
    m = system.dimension
    candidates = sorted(product(range(1, max_weight + 1), repeat=m), key=lambda nu: (sum(nu), nu))
    for nu in candidates:
        if weights_are_valid(system, nu):
            logger.debug("%s: weights %s", system.name, nu)
            return tuple(nu)
    raise WeightHomogeneityError(f"{system.name}: not weight-homogeneous with weights up to {max_weight}")


def top_vector_field(system: HamiltonianSystem, weights: Sequence[int]) -> list[MultiPoly]:
    """The weight nu_i + 1 part of each component."""
    return [f.weighted_part(weights, w + 1) for f, w in zip(system.vector_field, weights)]


def balance_equations(system: HamiltonianSystem, weights: Sequence[int]) -> list[MultiPoly]:
    """F(x) = f_top(x) + diag(nu) x; its zeros are the leading coefficients."""
    top = top_vector_field(system, weights)
    variables = system.phase_variables
    return [t + MultiPoly.variable(variables, v) * w for t, v, w in zip(top, variables, weights)]


# ---------------------------------------------------------------------------
# Balances
# ---------------------------------------------------------------------------


def newton_solve(
    func: Any,
    jac: Any,
    x0: np.ndarray,
    *,
    max_iterations: int = NEWTON_MAX_ITERATIONS,
    tol: float = NEWTON_TOLERANCE,
) -> tuple[np.ndarray, float, int]:
    """Least-squares Newton iteration; returns (x, residual norm, iterations)."""
    x = np.asarray(x0, dtype=complex).copy()
    fx = func(x)
    residual = float(np.linalg.norm(fx))
    for iteration in range(1, max_iterations + 1):
        if residual <= tol:
            return x, residual, iteration - 1
        step, *_ = np.linalg.lstsq(jac(x), fx, rcond=None)
        x = x - step
        if not np.all(np.isfinite(x)):
            return x, float("inf"), iteration
        fx = func(x)
        residual = float(np.linalg.norm(fx))
        if np.linalg.norm(step) <= tol * max(1.0, float(np.linalg.norm(x))):
            return x, residual, iteration
    return x, residual, max_iterations


@dataclass
class Balance:
    """A solution x0 of f_top(x0) + diag(nu) x0 = 0.

    A linear family x0 = base + s * direction is stored exactly in
    ``exact_base``/``exact_direction``; curved families are kept as one point
    with a numeric tangent ``direction`` and are followed by continuation in
    the chart x_j = x0_j + s.
    """

    x0: np.ndarray
    weights: tuple[int, ...]
    residual: float
    iterations: int = 0
    dimension: int = 0
    direction: np.ndarray | None = None
    exact_base: tuple[Any, ...] | None = None
    exact_direction: tuple[Any, ...] | None = None

    @property
    def is_exact(self) -> bool:
        return self.exact_base is not None

    @property
    def is_family(self) -> bool:
        return self.exact_direction is not None

    @property
    def on_continuum(self) -> bool:
        """A curved one-dimensional family of balances, followed numerically."""
        return self.dimension == 1 and not self.is_family and self.direction is not None

    @property
    def chart_column(self) -> int:
        """Column j of the local chart x_j = x0_j + s along a continuum."""
        if self.direction is None:
            raise BalanceError("an isolated balance has no chart")
        return _first_maximal(self.direction)

    def leading_coefficients(self, parameters: Sequence[str]) -> list[MultiPoly]:
        """x0 as polynomials in the family parameters (the first one moves along the family)."""
        if self.is_exact:
            polys = [MultiPoly.constant(parameters, b) for b in self.exact_base]
            if self.is_family:
                s = MultiPoly.variable(parameters, parameters[0])
                polys = [p + s * v for p, v in zip(polys, self.exact_direction)]
            return polys
        return [MultiPoly.constant(parameters, complex(c)) for c in self.x0]

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "x0": [[float(c.real), float(c.imag)] for c in self.x0],
            "weights": list(self.weights),
            "residual": self.residual,
            "dimension": self.dimension,
            "kind": "family" if self.is_family else "continuum" if self.on_continuum else "point",
        }
        if self.exact_base is not None:
            data["exact_base"] = [format_scalar(c) for c in self.exact_base]
        if self.exact_direction is not None:
            data["exact_direction"] = [format_scalar(c) for c in self.exact_direction]
        elif self.direction is not None:
            data["direction"] = [[float(c.real), float(c.imag)] for c in self.direction]
        return data


def _random_polydisk(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    radius = np.sqrt(rng.uniform(0.0, 1.0, size=(count, m)))
    angle = rng.uniform(0.0, 2 * np.pi, size=(count, m))
    return radius * np.exp(1j * angle)


def _null_space(matrix: np.ndarray, tol: float) -> np.ndarray:
    _, s, vh = np.linalg.svd(matrix)
    scale = max(1.0, float(s[0])) if s.size else 1.0
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].conj().T


def _first_maximal(vector: np.ndarray) -> int:
    magnitudes = np.abs(vector)
    top = magnitudes.max()
    return int(np.nonzero(magnitudes >= top * (1 - 1e-8))[0][0])


def _snap_vector(values: np.ndarray, tolerances: Tolerances) -> tuple[Any, ...] | None:
    snapped = []
    for value in values:
        q = rationalize(value, tolerances.max_denominator, tolerances.rational)
        if q is None:
            return None
        snapped.append(q)
    return tuple(snapped)


def _is_exact_family(equations: Sequence[MultiPoly], base: Sequence[Any], direction: Sequence[Any]) -> bool:
    line = ("s",)
    s = MultiPoly.variable(line, "s")
    mapping = {
        v: MultiPoly.constant(line, b) + s * d for v, b, d in zip(equations[0].variables, base, direction)
    }
    return all(eq.compose(mapping).is_zero() for eq in equations)


def _canonicalize(
    x: np.ndarray,
    equations: Sequence[MultiPoly],
    jac: Any,
    func: Any,
    weights: tuple[int, ...],
    residual: float,
    iterations: int,
    tolerances: Tolerances,
) -> Balance:
    kernel = _null_space(jac(x), tolerances.integer)
    dimension = kernel.shape[1]
    balance = Balance(x, weights, residual, iterations, dimension)
    if dimension == 0:
        snapped = _snap_vector(x, tolerances)
        if snapped is not None and all(not poly_eval(eq, snapped) for eq in equations):
            balance.exact_base = snapped
        return balance
    direction = kernel[:, 0]
    direction = direction / direction[_first_maximal(direction)]
    balance.direction = direction
    if dimension != 1:
        return balance
    j = _first_maximal(direction)
    base = x - x[j] * direction
    if np.linalg.norm(func(base)) > 1e3 * tolerances.balance_residual:
        return balance
    exact_base = _snap_vector(base, tolerances)
    exact_direction = _snap_vector(direction, tolerances)
    if exact_base is None or exact_direction is None:
        return balance
    if _is_exact_family(equations, exact_base, exact_direction):
        balance.exact_base = exact_base
        balance.exact_direction = exact_direction
    return balance


def _same_balance(a: Balance, b: Balance, tol: float) -> bool:
    if a.is_family or b.is_family:
        return (
            a.is_family
            and b.is_family
            and all(x == y for x, y in zip(a.exact_base, b.exact_base))
            and all(x == y for x, y in zip(a.exact_direction, b.exact_direction))
        )
    return bool(np.linalg.norm(a.x0 - b.x0) <= tol)


def _tangent(kernel: np.ndarray, column: int) -> np.ndarray | None:
    if kernel.shape[1] == 0:
        return None
    direction = kernel[:, 0]
    if abs(direction[column]) <= 1e-8 * float(np.abs(direction).max()):
        return None
    return direction / direction[column]


def track_continuum(
    system: HamiltonianSystem,
    balance: Balance,
    target: complex,
    *,
    via: Sequence[complex] = (),
    steps: int = CONTINUATION_STEPS,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Follow a curved continuum of balances to the point with x_j = target.

    j is the chart column of ``balance``. The chart value moves along
    straight segments through ``via``; each step is predicted along the
    tangent and corrected by Newton iteration on the balance equations
    together with x_j = value.
    """
    if not balance.on_continuum:
        raise BalanceError("only a curved one-dimensional continuum of balances can be followed")
    j = balance.chart_column
    m = len(balance.x0)
    equations = balance_equations(system, balance.weights)
    func = CompiledPolys(equations)
    jac = compile_jacobian(equations)
    row = np.zeros((1, m), dtype=complex)
    row[0, j] = 1.0

    x = np.asarray(balance.x0, dtype=complex).copy()
    for end in (*via, complex(target)):
        begin = complex(x[j])
        for step in range(1, steps + 1):
            value = begin + (end - begin) * step / steps
            tangent = _tangent(_null_space(jac(x), tolerances.integer), j)
            predicted = x if tangent is None else x + (value - x[j]) * tangent

            def chart(y: np.ndarray, value: complex = value) -> np.ndarray:
                return np.append(func(y), y[j] - value)

            def chart_jac(y: np.ndarray) -> np.ndarray:
                return np.vstack([jac(y), row])

            x, residual, _ = newton_solve(chart, chart_jac, predicted)
            if not np.isfinite(residual) or residual > tolerances.balance_residual:
                raise BalanceError(f"continuation left the continuum near x_{j} = {value:.6g}")
    return x


def shift_balance(
    system: HamiltonianSystem,
    balance: Balance,
    shift: complex,
    *,
    via: Sequence[complex] = (),
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Balance:
    """The balance at chart value x0_j + shift on the same continuum."""
    j = balance.chart_column
    x = track_continuum(
        system, balance, balance.x0[j] + shift, via=[balance.x0[j] + v for v in via], tolerances=tolerances
    )
    equations = balance_equations(system, balance.weights)
    residual = float(np.linalg.norm(CompiledPolys(equations)(x)))
    kernel = _null_space(compile_jacobian(equations)(x), tolerances.integer)
    direction = kernel[:, 0] / kernel[_first_maximal(kernel[:, 0]), 0] if kernel.shape[1] else None
    return Balance(x, balance.weights, residual, 0, kernel.shape[1], direction)


def _same_continuum(
    system: HamiltonianSystem,
    known: Balance,
    candidate: Balance,
    rng: np.random.Generator,
    tolerances: Tolerances,
) -> bool:
    """True when continuation from ``known`` reaches ``candidate``.

    The direct path is tried first, then detours through random chart
    values, so that monodromy can reach the other points with the same x_j.
    """
    j = known.chart_column
    target = complex(candidate.x0[j])
    spread = abs(target - known.x0[j]) + 1.0
    detours: list[tuple[complex, ...]] = [()]
    for _ in range(CONTINUATION_PATHS - 1):
        detours.append((complex(known.x0[j] + spread * (rng.normal() + 1j * rng.normal())),))
    for via in detours:
        try:
            x = track_continuum(system, known, target, via=via, tolerances=tolerances)
        except BalanceError:
            continue
        if np.linalg.norm(x - candidate.x0) <= tolerances.dedupe * max(1.0, float(np.linalg.norm(x))):
            return True
    return False


def solve_balances(
    system: HamiltonianSystem,
    weights: Sequence[int] | None = None,
    seeds: Sequence[Sequence[complex]] | None = None,
    *,
    random_starts: int = 200,
    seed: int = 0,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> list[Balance]:
    """Solve the leading-order equations from user seeds and a random sweep.

    Random starts are drawn uniformly from the unit polydisk. Converged
    solutions with residual above ``tolerances.balance_residual`` or norm
    below 1e-8 are dropped; the rest are deduplicated at
    ``tolerances.dedupe``. Linear families are returned once, exactly. Points
    on a curved continuum are merged when continuation connects them, so
    each component is returned once.
    """
    weights = tuple(weights) if weights is not None else detect_weights(system)
    if not weights_are_valid(system, weights):
        raise WeightHomogeneityError(f"{system.name}: weights {weights} do not make the field homogeneous")
    m = system.dimension
    equations = balance_equations(system, weights)
    func = CompiledPolys(equations)
    jac = compile_jacobian(equations)

    starts: list[np.ndarray] = [np.asarray(s, dtype=complex) for s in seeds or ()]
    for s in starts:
        if s.shape != (m,):
            raise BalanceError(f"seed has shape {s.shape}, expected ({m},)")
    rng = np.random.default_rng(seed)
    starts.extend(_random_polydisk(rng, random_starts, m))
    paths = np.random.default_rng([seed, 1])

    found: list[Balance] = []
    failed = merged = 0
    for start in starts:
        x, residual, iterations = newton_solve(func, jac, start)
        if not np.isfinite(residual) or residual > tolerances.balance_residual:
            failed += 1
            continue
        if np.linalg.norm(x) < 1e-8:
            continue
        candidate = _canonicalize(x, equations, jac, func, weights, residual, iterations, tolerances)
        if any(_same_balance(candidate, b, tolerances.dedupe) for b in found):
            continue
        if candidate.on_continuum and any(
            b.on_continuum and _same_continuum(system, b, candidate, paths, tolerances) for b in found
        ):
            merged += 1
            continue
        found.append(candidate)
    logger.debug(
        "%s: %d starts, %d failed, %d merged into continua, %d balances",
        system.name, len(starts), failed, merged, len(found),
    )
    if not found:
        raise BalanceError(f"{system.name}: no nontrivial balance found from {len(starts)} starts")
    found.sort(key=lambda b: (not b.is_family, not b.is_exact, float(np.linalg.norm(b.x0))))
    return found


# ---------------------------------------------------------------------------
# Kowalewski exponents
# ---------------------------------------------------------------------------


@dataclass
class KowalewskiSpectrum:
    """Eigen-data of L = df_top(x0) + diag(nu)."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    resonances: list[int]
    free_parameter_count: int
    multiplicities: dict[int, tuple[int, int]] = field(default_factory=dict)
    defects: list[int] = field(default_factory=list)
    invariant_degrees: dict[str, int] = field(default_factory=dict)

    def geometric_multiplicity(self, k: int) -> int:
        return self.multiplicities.get(k, (0, 0))[1]

    def is_principal(self, dimension: int) -> bool:
        return self.free_parameter_count == dimension - 1 and not self.defects

    @property
    def max_resonance(self) -> int:
        return max(self.resonances, default=0)

    def to_json(self) -> dict[str, Any]:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "resonances": self.resonances,
            "free_parameter_count": self.free_parameter_count,
            "multiplicities": {str(k): list(v) for k, v in self.multiplicities.items()},
            "defects": self.defects,
            "invariant_degrees": self.invariant_degrees,
        }


def kowalewski_matrix(system: HamiltonianSystem, balance: Balance) -> np.ndarray:
    top = top_vector_field(system, balance.weights)
    jac = compile_jacobian(top)
    return jac(balance.x0) + np.diag(np.asarray(balance.weights, dtype=complex))


def kowalewski_spectrum(
    system: HamiltonianSystem,
    balance: Balance,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> KowalewskiSpectrum:
    """Eigenvalues of L, integer resonances, defects and the free-parameter count."""
    if balance.residual > tolerances.balance_residual:
        raise SpectrumError(f"balance residual {balance.residual:.3g} exceeds {tolerances.balance_residual:g}")
    matrix = kowalewski_matrix(system, balance)
    m = matrix.shape[0]
    eigenvalues = np.linalg.eigvals(matrix)

    clusters: list[list[complex]] = []
    for z in sorted(eigenvalues, key=lambda z: (z.real, z.imag)):
        for cluster in clusters:
            if abs(np.mean(cluster) - z) <= tolerances.dedupe:
                cluster.append(z)
                break
        else:
            clusters.append([z])

    multiplicities: dict[int, tuple[int, int]] = {}
    integers: set[int] = set()
    for cluster in clusters:
        centre = complex(np.mean(cluster))
        k = int(round(centre.real))
        if abs(centre - k) > tolerances.integer:
            continue
        integers.add(k)
        if k < 0:
            continue
        kernel = _null_space(k * np.eye(m) - matrix, tolerances.integer)
        multiplicities[k] = (len(cluster), kernel.shape[1])
    if -1 not in integers:
        raise SpectrumError(f"{system.name}: -1 is not an eigenvalue of L; the balance is inconsistent")

    degrees: dict[str, int] = {}
    for name, h in zip(system.invariant_names, system.invariants):
        w = h.weighted_degree(balance.weights)
        if w is None:
            continue
        gradient = CompiledPolys(h.weighted_part(balance.weights, w).gradient())(balance.x0)
        if np.linalg.norm(gradient) <= tolerances.integer:
            continue
        if w not in integers:
            raise SpectrumError(f"{system.name}: weighted degree {w} of {name} is not an eigenvalue of L")
        degrees[name] = w

    defects = sorted(k for k, (alg, geo) in multiplicities.items() if geo < alg)
    if defects:
        logger.warning("%s: defective resonance eigenspaces at k=%s", system.name, defects)
    resonances = sorted(k for k, (alg, _) in multiplicities.items() for _ in range(alg))
    free = sum(geo for _, geo in multiplicities.values())
    return KowalewskiSpectrum(
        matrix=matrix,
        eigenvalues=eigenvalues,
        resonances=resonances,
        free_parameter_count=free,
        multiplicities=dict(sorted(multiplicities.items())),
        defects=defects,
        invariant_degrees=degrees,
    )


def principal_balances(
    system: HamiltonianSystem,
    balances: Sequence[Balance],
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> list[tuple[Balance, KowalewskiSpectrum]]:
    """Balances whose spectrum gives dim - 1 free parameters."""
    result = []
    for balance in balances:
        try:
            spectrum = kowalewski_spectrum(system, balance, tolerances)
        except SpectrumError as e:
            logger.debug("skipping balance: %s", e)
            continue
        if spectrum.is_principal(system.dimension):
            result.append((balance, spectrum))
    return result


# ---------------------------------------------------------------------------
# Laurent families
# ---------------------------------------------------------------------------


@dataclass
class LaurentFamily:
    """x_i(t) = sum_k x_i^(k) t^(k - nu_i) with coefficients polynomial in the free parameters."""

    system_name: str
    balance: Balance
    spectrum: KowalewskiSpectrum
    series: LaurentVectorSeries
    parameters: tuple[str, ...]
    parameter_orders: dict[str, int]
    free_columns: dict[int, tuple[int, ...]]
    exact: bool

    @property
    def order(self) -> int:
        return self.series.truncation_order

    def coefficient(self, variable: int | str, k: int) -> MultiPoly:
        """x_i^(k) as a polynomial in the free parameters."""
        i = variable if isinstance(variable, int) else self.series.phase_variables.index(variable)
        return self.series.coefficients[k][i]

    def invariant_series(self, h: MultiPoly) -> LaurentSeries:
        return substitute_series(h, self.series)

    def evaluate(self, point: Sequence[Any], t: complex) -> np.ndarray:
        return np.asarray(self.series.evaluate(point, t), dtype=complex)

    def to_json(self) -> dict[str, Any]:
        return {
            "system": self.system_name,
            "exact": self.exact,
            "order": self.order,
            "leading_exponents": list(self.series.leading_exponents),
            "resonances": self.spectrum.resonances,
            "parameters": list(self.parameters),
            "parameter_orders": self.parameter_orders,
            "free_columns": {str(k): list(v) for k, v in self.free_columns.items()},
            "coefficients": [[p.to_json() for p in row] for row in self.series.coefficients],
        }


def _parameter_names(system: HamiltonianSystem, count: int) -> tuple[str, ...]:
    if len(system.family_parameters) == count:
        return system.family_parameters
    return tuple(f"theta{i + 1}" for i in range(count))


def _prune(poly: MultiPoly, threshold: float) -> MultiPoly:
    if poly.exact:
        return poly
    return MultiPoly(poly.variables, {k: c for k, c in poly.terms.items() if abs(c) > threshold}, exact=False)


def _poly_matrix_form(polys: Sequence[MultiPoly]) -> tuple[list[tuple[int, ...]], np.ndarray]:
    keys = sorted({k for p in polys for k in p.terms})
    matrix = np.zeros((len(polys), len(keys)), dtype=complex)
    index = {k: j for j, k in enumerate(keys)}
    for i, p in enumerate(polys):
        for k, c in p.terms.items():
            matrix[i, index[k]] = to_complex(c)
    return keys, matrix


def _polys_from_matrix(
    keys: Sequence[tuple[int, ...]], matrix: np.ndarray, variables: Sequence[str]
) -> list[MultiPoly]:
    return [
        MultiPoly(variables, {k: complex(matrix[i, j]) for j, k in enumerate(keys)}, exact=False)
        for i in range(matrix.shape[0])
    ]


def _numeric_apply(matrix: np.ndarray, polys: Sequence[MultiPoly], variables: Sequence[str]) -> list[MultiPoly]:
    keys, coeffs = _poly_matrix_form(polys)
    if not keys:
        return [MultiPoly.zero(variables, exact=False) for _ in range(matrix.shape[0])]
    return _polys_from_matrix(keys, matrix @ coeffs, variables)


def _numeric_solve(matrix: np.ndarray, polys: Sequence[MultiPoly], variables: Sequence[str]) -> list[MultiPoly]:
    keys, coeffs = _poly_matrix_form(polys)
    if not keys:
        return [MultiPoly.zero(variables, exact=False) for _ in range(matrix.shape[1])]
    return _polys_from_matrix(keys, scipy.linalg.solve(matrix, coeffs), variables)


def _divide_by_det(numerators: Sequence[MultiPoly], det: MultiPoly) -> list[MultiPoly] | None:
    quotients = []
    for p in numerators:
        q = poly_exact_quotient(p, det)
        if q is None:
            return None
        quotients.append(q)
    return quotients


def _exact_solve(
    a: PolyMatrix,
    rhs: list[MultiPoly],
    k: int,
    new_params: list[MultiPoly],
    parameters: tuple[str, ...],
) -> tuple[list[MultiPoly], tuple[int, ...], tuple[int, ...]]:
    """Solve (kI - L) x = rhs exactly, injecting new_params on free columns when resonant.

    Constant pivot minors are tried first. A minor whose determinant is a
    nonconstant polynomial is accepted when it divides every numerator of
    the adjugate solution, so the coefficients stay polynomial in the
    family parameters.
    """
    m = len(a)
    d = len(new_params)
    pivots = []
    for free in combinations(range(m), d):
        rest = [c for c in range(m) if c not in free]
        for rows in combinations(range(m), m - d):
            minor = poly_submatrix(a, rows, rest)
            det = poly_det(minor)
            if det:
                pivots.append((free, rest, rows, minor, det))
    if not pivots:
        raise FamilyError(f"kI - L is singular beyond its resonant columns at k={k}")
    pivots.sort(key=lambda pivot: not pivot[4].is_constant())
    for free, rest, rows, minor, det in pivots:
        reduced = [rhs[r] - _dot([a[r][c] for c in free], new_params, parameters) for r in rows]
        solved = _divide_by_det([_dot(row, reduced, parameters) for row in poly_adjugate(minor)], det)
        if solved is None:
            logger.debug("k=%d: det %s does not divide the solution for free columns %s", k, det, free)
            continue
        x = [MultiPoly.zero(parameters) for _ in range(m)]
        for c, value in zip(free, new_params):
            x[c] = value
        for c, value in zip(rest, solved):
            x[c] = value
        for r in range(m):
            if r in rows:
                continue
            residual = _dot(a[r], x, parameters) - rhs[r]
            if not residual.is_zero():
                raise FamilyError(
                    f"not a coherent family: compatibility fails at resonance k={k} (row {r}: {residual})"
                )
        return x, tuple(free), tuple(rows)
    raise FamilyError(f"no pivot minor gives coefficients polynomial in the parameters at k={k}")


def _dot(row: Sequence[MultiPoly], vector: Sequence[MultiPoly], parameters: tuple[str, ...]) -> MultiPoly:
    total = MultiPoly.zero(parameters, exact=all(p.exact for p in (*row, *vector)))
    for a, b in zip(row, vector):
        if a and b:
            total = total + a * b
    return total


def _float_solve(
    a: np.ndarray,
    rhs: list[MultiPoly],
    k: int,
    new_params: list[MultiPoly],
    parameters: tuple[str, ...],
    tolerances: Tolerances,
) -> tuple[list[MultiPoly], tuple[int, ...], tuple[int, ...]]:
    m = a.shape[0]
    d = len(new_params)
    if d == 0:
        return _numeric_solve(a, rhs, parameters), (), tuple(range(m))
    kernel = _null_space(a, tolerances.integer)
    if kernel.shape[1] != d:
        raise FamilyError(f"kernel of kI - L at k={k} has dimension {kernel.shape[1]}, expected {d}")
    _, _, column_pivots = scipy.linalg.qr(kernel.conj().T, pivoting=True)
    free = tuple(sorted(int(c) for c in column_pivots[:d]))
    rest = [c for c in range(m) if c not in free]
    _, _, row_pivots = scipy.linalg.qr(a[:, rest].T, pivoting=True)
    rows = tuple(sorted(int(r) for r in row_pivots[: m - d]))
    shift = _numeric_apply(a[np.ix_(rows, free)], new_params, parameters)
    reduced = [rhs[r] - s for r, s in zip(rows, shift)]
    solved = _numeric_solve(a[np.ix_(rows, rest)], reduced, parameters)
    x = [MultiPoly.zero(parameters, exact=False) for _ in range(m)]
    for c, value in zip(free, new_params):
        x[c] = value
    for c, value in zip(rest, solved):
        x[c] = value
    check = _numeric_apply(a, x, parameters)
    scale = max(1.0, max((p.max_abs_coefficient() for p in rhs), default=0.0))
    for r in range(m):
        if r in rows:
            continue
        error = (check[r] - rhs[r]).max_abs_coefficient()
        if error > tolerances.compatibility * scale:
            raise FamilyError(
                f"not a coherent family: compatibility fails at resonance k={k} (row {r}, error {error:.3g})"
            )
    return x, free, rows


def expand_family(
    system: HamiltonianSystem,
    balance: Balance,
    spectrum: KowalewskiSpectrum,
    order: int = 8,
    *,
    parameter_names: Sequence[str] | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> LaurentFamily:
    """Grow the Laurent family order by order from (kI - L) x^(k) = F_k.

    F_k collects the t^(k - nu_i - 1) terms of f(x) computed with x^(k) = 0.
    Each resonance injects one new parameter per kernel dimension, and a
    balance on a continuum injects the k = 0 parameter first. On a curved
    continuum that parameter is the chart shift of the base point (see
    ``recentre_family``) and the coefficients are those at the base point.
    The computation is exact when the balance is exact and in complex
    floats otherwise.
    """
    if order < spectrum.max_resonance + 1:
        raise FamilyError(f"order {order} is below max resonance {spectrum.max_resonance} + 1")
    if spectrum.defects:
        raise FamilyError(f"not a coherent family: defective resonances {spectrum.defects}")
    weights = balance.weights
    m = system.dimension
    variables = system.phase_variables

    resonant = [k for k in range(1, order + 1) if spectrum.geometric_multiplicity(k)]
    moving = balance.is_family or balance.on_continuum
    count = (1 if moving else 0) + sum(spectrum.geometric_multiplicity(k) for k in resonant)
    if count != spectrum.free_parameter_count:
        raise FamilyError(
            f"{count} parameters would be injected but the spectrum has {spectrum.free_parameter_count} free ones"
        )
    parameters = tuple(parameter_names) if parameter_names is not None else _parameter_names(system, count)
    if len(parameters) != count:
        raise FamilyError(f"need {count} parameter names, got {len(parameters)}")
    exact = balance.is_exact

    leading = balance.leading_coefficients(parameters) if parameters else None
    if leading is None:
        raise FamilyError("a family without parameters has nothing to expand")
    if not exact:
        leading = [p.to_complex() for p in leading]
    coefficients: list[list[MultiPoly]] = [leading]
    parameter_orders: dict[str, int] = {}
    free_columns: dict[int, tuple[int, ...]] = {}
    next_param = 0
    if balance.is_family:
        parameter_orders[parameters[0]] = 0
        free_columns[0] = (_first_maximal(np.asarray([to_complex(v) for v in balance.exact_direction])),)
        next_param = 1
    elif balance.on_continuum:
        parameter_orders[parameters[0]] = 0
        free_columns[0] = (balance.chart_column,)
        next_param = 1

    top = top_vector_field(system, weights)
    if exact:
        mapping = dict(zip(variables, leading))
        lmatrix: PolyMatrix = [
            [
                top[i].diff(variables[j]).compose(mapping) + (weights[i] if i == j else 0)
                for j in range(m)
            ]
            for i in range(m)
        ]
    else:
        numeric_l = spectrum.matrix

    for k in range(1, order + 1):
        zero_row = [MultiPoly.zero(parameters, exact=exact) for _ in range(m)]
        partial = LaurentVectorSeries(
            variables, parameters, weights, tuple(tuple(r) for r in (*coefficients, zero_row)), k
        )
        rhs = [
            substitute_series(f, partial).coefficient(k - weights[i] - 1) for i, f in enumerate(system.vector_field)
        ]
        d = spectrum.geometric_multiplicity(k)
        names = parameters[next_param : next_param + d]
        new_params = [MultiPoly.variable(parameters, n) for n in names]
        if exact:
            a = [
                [(k if i == j else 0) - lmatrix[i][j] for j in range(m)]
                for i in range(m)
            ]
            x, free, _ = _exact_solve(a, rhs, k, new_params, parameters)
        else:
            new_params = [p.to_complex() for p in new_params]
            a_num = k * np.eye(m) - numeric_l
            x, free, _ = _float_solve(a_num, rhs, k, new_params, parameters, tolerances)
            scale = max(1.0, max(p.max_abs_coefficient() for p in x))
            x = [_prune(p, 1e-13 * scale) for p in x]
        if d:
            free_columns[k] = free
            for n in names:
                parameter_orders[n] = k
            next_param += d
            logger.debug("%s: resonance k=%d, free columns %s", system.name, k, [variables[c] for c in free])
        coefficients.append(x)

    series = LaurentVectorSeries(variables, parameters, weights, tuple(tuple(r) for r in coefficients), order)
    return LaurentFamily(
        system_name=system.name,
        balance=balance,
        spectrum=spectrum,
        series=series,
        parameters=parameters,
        parameter_orders=parameter_orders,
        free_columns=free_columns,
        exact=exact,
    )


def recentre_family(
    system: HamiltonianSystem,
    family: LaurentFamily,
    shift: complex,
    *,
    order: int | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> LaurentFamily:
    """Re-expand a family over a curved continuum at the chart shift ``shift``.

    The k = 0 parameter of such a family moves the base point; the result
    keeps the parameter names of ``family`` and, unless ``order`` is given,
    its truncation order.
    """
    if not family.balance.on_continuum:
        raise FamilyError("only families over a curved continuum of balances are re-centred")
    balance = shift_balance(system, family.balance, shift, tolerances=tolerances)
    spectrum = kowalewski_spectrum(system, balance, tolerances)
    return expand_family(
        system,
        balance,
        spectrum,
        family.order if order is None else order,
        parameter_names=family.parameters,
        tolerances=tolerances,
    )


def ode_residuals(system: HamiltonianSystem, family: LaurentFamily) -> list[LaurentSeries]:
    """dx_i/dt - f_i(x(t)) for each component; identically zero through the truncation."""
    residuals = []
    for i, f in enumerate(system.vector_field):
        lhs = family.series.component(i).derivative()
        residuals.append(lhs - substitute_series(f, family.series))
    return residuals


def max_series_coefficient(series: LaurentSeries, skip: Sequence[int] = ()) -> float:
    """Largest coefficient magnitude over the known terms, skipping some exponents."""
    worst = 0.0
    for j, c in enumerate(series.coefficients):
        if series.valuation + j in skip:
            continue
        worst = max(worst, c.max_abs_coefficient())
    return worst

