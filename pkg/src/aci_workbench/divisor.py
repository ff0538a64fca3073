"""Divisor curves: level-set reduction of Laurent families, sampling, fitting and quotients."""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from aci_workbench.algebra import (
    CompiledPolys,
    Exponent,
    MultiPoly,
    as_exact,
    compile_jacobian,
    exponent_grid,
    format_scalar,
    is_exact_scalar,
    poly_eval,
    to_complex,
)
from aci_workbench.config import DEFAULT_TOLERANCES, Tolerances
from aci_workbench.errors import CurveError, FitError, WorkbenchError
from aci_workbench.painleve import LaurentFamily, max_series_coefficient, newton_solve, recentre_family
from aci_workbench.systems import HamiltonianSystem

logger = logging.getLogger(__name__)

FLOAT_ZERO = 1e-10


# ---------------------------------------------------------------------------
# Level sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Elimination:
    """name = numerator / denominator, both polynomials in the family parameters."""

    name: str
    numerator: MultiPoly
    denominator: MultiPoly


@dataclass
class LevelReduction:
    """The t^0 level equations of a family and what is left after linear eliminations."""

    parameters: tuple[str, ...]
    levels: tuple[Any, ...]
    level_equations: list[MultiPoly]
    eliminated: list[Elimination]
    relations: list[MultiPoly]
    surviving: tuple[str, ...]
    degenerate: bool = False

    @property
    def relation(self) -> MultiPoly:
        """The single remaining relation over the surviving parameters."""
        if len(self.relations) != 1:
            raise CurveError(f"expected exactly one relation, have {len(self.relations)}")
        return self.relations[0].with_variables(self.surviving)

    def complete_point(self, values: Mapping[str, Any]) -> dict[str, complex]:
        """Fill in the eliminated parameters from values of the surviving ones."""
        point = {name: complex(to_complex(v)) for name, v in values.items()}
        for elim in reversed(self.eliminated):
            coords = [point.get(v, 0j) for v in self.parameters]
            num = to_complex(poly_eval(elim.numerator.to_complex(), coords))
            den = to_complex(poly_eval(elim.denominator.to_complex(), coords))
            if den == 0:
                raise CurveError(f"elimination of {elim.name} is singular at {values}")
            point[elim.name] = num / den
        return point

    def to_json(self) -> dict[str, Any]:
        return {
            "parameters": list(self.parameters),
            "levels": [format_scalar(c) for c in self.levels],
            "eliminated": [e.name for e in self.eliminated],
            "surviving": list(self.surviving),
            "degenerate": self.degenerate,
            "relations": [r.with_variables(self.surviving).to_json() for r in self.relations],
        }


def level_coefficients(family: LaurentFamily, invariants: Sequence[MultiPoly]) -> list[MultiPoly]:
    """The t^0 coefficient of each H_i(x(t)), a polynomial in the free parameters."""
    return [family.invariant_series(h).coefficient(0) for h in invariants]


def invariance_defect(family: LaurentFamily, invariants: Sequence[MultiPoly]) -> float:
    """Largest coefficient of t^k, k != 0, over all H_i(x(t)); zero for a coherent family."""
    return max((max_series_coefficient(family.invariant_series(h), skip=(0,)) for h in invariants), default=0.0)


def _negligible(poly: MultiPoly, scale: float = 1.0) -> bool:
    if poly.exact:
        return poly.is_zero()
    return poly.max_abs_coefficient() <= FLOAT_ZERO * max(1.0, scale)


def _usable_coefficient(poly: MultiPoly) -> bool:
    if poly.exact:
        return not poly.is_zero()
    return poly.max_abs_coefficient() > FLOAT_ZERO


def _substitute_fraction(relation: MultiPoly, name: str, numerator: MultiPoly, denominator: MultiPoly) -> MultiPoly:
    """Clear denominators in relation(name = numerator/denominator)."""
    degree = relation.degree_in(name)
    if degree <= 0:
        return relation
    total = MultiPoly.zero(relation.variables, exact=relation.exact and numerator.exact)
    for k in range(degree + 1):
        coeff = relation.coefficient_of(name, k)
        if coeff:
            total = total + coeff * numerator**k * denominator ** (degree - k)
    if denominator.is_constant():
        total = total * (denominator.constant_term() ** -degree)
    return total


def impose_levels(
    family: LaurentFamily,
    invariants: Sequence[MultiPoly],
    levels: Sequence[Any],
) -> LevelReduction:
    """Set the t^0 coefficients of H_i(x(t)) to c_i and solve out linear parameters.

    Parameters are tried latest first; a parameter whose coefficient is a
    constant is preferred. With a polynomial coefficient a the substitution
    p = -R/a is cleared of denominators. When nothing can be eliminated
    the relations are returned unreduced.
    """
    if len(invariants) != len(levels):
        raise CurveError(f"{len(invariants)} invariants but {len(levels)} levels")
    parameters = family.parameters
    exact = family.exact
    equations: list[MultiPoly] = []
    for coeff, c in zip(level_coefficients(family, invariants), levels):
        value = as_exact(c) if exact else to_complex(c)
        equations.append(coeff - value)
    relations = [e for e in equations if not _negligible(e)]
    if not relations:
        logger.warning("all level equations are constant in the parameters; the level set is degenerate")
        return LevelReduction(parameters, tuple(levels), equations, [], [], (), degenerate=True)

    eliminated: list[Elimination] = []
    while True:
        choice = _pick_elimination(relations, parameters)
        if choice is None:
            break
        index, name, coefficient = choice
        relation = relations.pop(index)
        rest = relation - coefficient * MultiPoly.variable(parameters, name)
        numerator, denominator = -rest, coefficient
        if coefficient.is_constant():
            numerator = numerator * (coefficient.constant_term() ** -1)
            denominator = MultiPoly.constant(parameters, 1)
            if not exact:
                denominator = denominator.to_complex()
        eliminated.append(Elimination(name, numerator, denominator))
        relations = [_substitute_fraction(r, name, numerator, denominator) for r in relations]
        relations = [r for r in relations if not _negligible(r)]
        logger.debug("eliminated %s, %d relations left", name, len(relations))

    used = {v for r in relations for v in r.free_variables()}
    surviving = tuple(p for p in parameters if p in used)
    return LevelReduction(parameters, tuple(levels), equations, eliminated, relations, surviving)


def _pick_elimination(
    relations: Sequence[MultiPoly], parameters: Sequence[str]
) -> tuple[int, str, MultiPoly] | None:
    fallback = None
    for name in reversed(parameters):
        for index, relation in enumerate(relations):
            if relation.degree_in(name) != 1:
                continue
            coefficient = relation.coefficient_of(name, 1)
            if not _usable_coefficient(coefficient):
                continue
            if coefficient.is_constant():
                return index, name, coefficient
            if fallback is None and name not in coefficient.free_variables():
                fallback = (index, name, coefficient)
    return fallback


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------


@dataclass
class DivisorSample:
    """A point of the divisor: values of the surviving parameters, plus the full parameter vector."""

    parameter_point: np.ndarray
    level: tuple[Any, ...]
    variables: tuple[str, ...]
    full_point: dict[str, complex] = field(default_factory=dict)

    def coordinates(self, names: Sequence[str]) -> np.ndarray:
        lookup = dict(zip(self.variables, self.parameter_point))
        lookup.update({k: v for k, v in self.full_point.items() if k not in lookup})
        try:
            return np.asarray([lookup[n] for n in names], dtype=complex)
        except KeyError as e:
            raise CurveError(f"sample has no coordinate {e.args[0]!r}") from None


def _random_unit_rational(rng: np.random.Generator, low: float = 0.8, high: float = 1.25) -> Any:
    while True:
        radius = rng.uniform(low, high)
        angle = rng.uniform(0.0, 2 * np.pi)
        z = radius * np.exp(1j * angle)
        re = Fraction(z.real).limit_denominator(64)
        im = Fraction(z.imag).limit_denominator(64)
        value = as_exact([re, im])
        if low < abs(to_complex(value)) < high:
            return value


def sample_level_set(
    reduction: LevelReduction,
    count: int,
    *,
    seed: int = 0,
    max_attempts: int | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> list[DivisorSample]:
    """Points on the divisor with the first surviving parameter at random Gaussian rationals.

    The other surviving parameters are found by Newton iteration from random
    starts. Points where the solved parameters are poorly determined
    (smallest singular value of their Jacobian below 1e-3) are discarded;
    every kept point reproduces the level values to 1e-10.
    """
    if reduction.degenerate or not reduction.relations:
        raise CurveError("nothing to sample: the level set imposes no relation")
    surviving = reduction.surviving
    relations = [r.with_variables(surviving) for r in reduction.relations]
    unknowns = len(surviving) - 1
    if unknowns < 1:
        raise CurveError("a relation in a single parameter has finitely many points")
    if len(relations) < unknowns:
        raise CurveError(f"{len(relations)} relations cannot determine {unknowns} parameters")
    func_full = CompiledPolys(relations)
    jac_full = compile_jacobian(relations)
    rng = np.random.default_rng(seed)
    attempts = max_attempts if max_attempts is not None else 20 * count
    samples: list[DivisorSample] = []
    for _ in range(attempts):
        if len(samples) >= count:
            break
        first = to_complex(_random_unit_rational(rng))

        def func(y: np.ndarray, first: complex = first) -> np.ndarray:
            return func_full(np.concatenate(([first], y)))

        def jac(y: np.ndarray, first: complex = first) -> np.ndarray:
            return jac_full(np.concatenate(([first], y)))[:, 1:]

        start = rng.normal(size=unknowns) + 1j * rng.normal(size=unknowns)
        y, residual, _ = newton_solve(func, jac, start, tol=1e-14)
        if not np.isfinite(residual) or residual > 1e-12:
            continue
        if unknowns and np.linalg.svd(jac(y), compute_uv=False)[-1] < 1e-3:
            continue
        point = np.concatenate(([first], y))
        if any(np.linalg.norm(point - s.parameter_point) < tolerances.dedupe for s in samples):
            continue
        full = reduction.complete_point(dict(zip(surviving, point)))
        coords = [full.get(p, 0j) for p in reduction.parameters]
        worst = max(
            abs(to_complex(poly_eval(e.to_complex(), coords))) / max(1.0, e.max_abs_coefficient())
            for e in reduction.level_equations
        )
        if worst > 1e-10:
            logger.debug("dropping sample with level error %.3g", worst)
            continue
        samples.append(DivisorSample(point, reduction.levels, surviving, full))
    if len(samples) < count:
        logger.warning("only %d of %d divisor samples found", len(samples), count)
    return samples


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


@dataclass
class FittedCurve:
    """A relation recovered from samples, with its fit quality."""

    relation: MultiPoly
    monomial_basis: list[Exponent]
    residual: float
    conditioning: float
    exact: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "relation": self.relation.to_json(),
            "text": str(self.relation),
            "monomial_basis": [list(e) for e in self.monomial_basis],
            "residual": self.residual,
            "conditioning": self.conditioning,
            "exact": self.exact,
        }


def hyperelliptic_basis(degree: int) -> list[Exponent]:
    """Monomials beta^2, 1, alpha, ..., alpha^degree over (alpha, beta)."""
    return [(0, 2)] + [(j, 0) for j in range(degree + 1)]


def bidegree_basis(bounds: Sequence[int]) -> list[Exponent]:
    return exponent_grid(bounds)


def _sample_matrix(samples: Sequence[DivisorSample] | np.ndarray, variables: Sequence[str]) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return samples.astype(complex)
    return np.vstack([s.coordinates(variables) for s in samples])


def fit_curve(
    samples: Sequence[DivisorSample] | np.ndarray,
    basis: int | Sequence[Exponent],
    variables: Sequence[str] = ("alpha", "beta"),
    *,
    normalize_by: Exponent | None = None,
    null_threshold: float = 1e-8,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> FittedCurve:
    """Fit the polynomial relation through the samples from the SVD null space.

    Columns are equilibrated before the SVD. The coefficient vector is
    normalized at ``normalize_by``, else at beta^2 when present, else at the
    largest coefficient, and then rationalized when every coefficient snaps.
    """
    variables = tuple(variables)
    monomials = hyperelliptic_basis(basis) if isinstance(basis, int) else [tuple(e) for e in basis]
    if any(len(e) != len(variables) for e in monomials):
        raise FitError("basis exponents do not match the variables")
    points = _sample_matrix(samples, variables)
    if points.shape[0] < 2 * len(monomials):
        raise FitError(f"need at least {2 * len(monomials)} samples for {len(monomials)} monomials")
    exponents = np.asarray(monomials, dtype=int)
    vandermonde = np.prod(points[:, None, :] ** exponents[None, :, :], axis=2)
    norms = np.linalg.norm(vandermonde, axis=0)
    norms[norms == 0] = 1.0
    _, s, vh = np.linalg.svd(vandermonde / norms)
    null_dimension = int(np.sum(s <= null_threshold * s[0]))
    conditioning = float(s[-1] / s[-2]) if len(s) > 1 and s[-2] else float("inf")
    if null_dimension != 1:
        raise FitError(f"ambiguous fit: null space dimension {null_dimension} (conditioning {conditioning:.3g})")
    coefficients = vh[-1].conj() / norms

    if normalize_by is not None and tuple(normalize_by) in monomials:
        pivot = monomials.index(tuple(normalize_by))
    elif len(variables) >= 2 and (0,) * (len(variables) - 1) + (2,) in monomials:
        pivot = monomials.index((0,) * (len(variables) - 1) + (2,))
    else:
        pivot = int(np.argmax(np.abs(coefficients)))
    if abs(coefficients[pivot]) <= 1e-12 * np.abs(coefficients).max():
        pivot = int(np.argmax(np.abs(coefficients)))
    coefficients = coefficients / coefficients[pivot]

    terms = dict(zip(monomials, coefficients))
    relation = MultiPoly(variables, {k: complex(v) for k, v in terms.items()}, exact=False)
    snapped = relation.to_exact(tolerances.max_denominator, tolerances.rational)
    exact = snapped is not None
    if exact:
        relation = snapped
    residual = verify_membership(relation, points)
    if conditioning > 1e-6:
        logger.warning("curve fit is poorly separated: conditioning %.3g", conditioning)
    return FittedCurve(relation, monomials, residual, conditioning, exact)


def verify_membership(curve: MultiPoly, samples: Sequence[DivisorSample] | np.ndarray) -> float:
    """Max |curve(sample)| over the samples, in complex floats."""
    points = _sample_matrix(samples, curve.variables)
    if points.size == 0:
        return 0.0
    evaluate = CompiledPolys([curve])
    return float(max(abs(evaluate(p)[0]) for p in points))


def normalize_relation(relation: MultiPoly, monomial: Exponent) -> MultiPoly:
    """Scale so the given monomial has coefficient 1."""
    key = tuple(monomial)
    if key not in relation.terms:
        raise CurveError(f"monomial {key} does not occur in the relation")
    coeff = relation.terms[key]
    if relation.exact:
        return relation * (coeff**-1)
    return relation * (1 / complex(coeff))


def is_even_hyperelliptic(relation: MultiPoly, degree: int) -> bool:
    """True for beta^2 - P(alpha) with P even of exact degree ``degree``.

    The relation must be over (alpha, beta) and normalized on beta^2.
    """
    if relation.nvars != 2 or relation.terms.get((0, 2)) is None:
        return False
    if to_complex(relation.terms[(0, 2)]) != 1:
        return False
    rest = [k for k in relation.terms if k != (0, 2)]
    if any(k[1] != 0 or k[0] % 2 for k in rest):
        return False
    return max((k[0] for k in rest), default=-1) == degree


# ---------------------------------------------------------------------------
# Quotients and hyperelliptic models
# ---------------------------------------------------------------------------


def quotient_curve(
    curve: FittedCurve | MultiPoly,
    involution: Mapping[str, int],
    names: Mapping[str, str] | None = None,
) -> MultiPoly:
    """Rewrite a curve invariant under x -> -x in zeta = x^2.

    ``involution`` maps variable names to -1 (flipped) or 1. Every flipped
    variable must occur with even exponents only, otherwise the curve is not
    invariant and CurveError is raised. ``names`` renames the flipped
    variables (default alpha -> zeta).
    """
    relation = curve.relation if isinstance(curve, FittedCurve) else curve
    flipped = [v for v, sign in involution.items() if sign == -1]
    for v, sign in involution.items():
        if sign not in (1, -1):
            raise CurveError(f"unsupported involution sign {sign} for {v}")
        if v not in relation.variables:
            raise CurveError(f"involution names unknown variable {v!r}")
    indices = [relation.variables.index(v) for v in flipped]
    terms: dict[Exponent, Any] = {}
    for key, coeff in relation.terms.items():
        if any(key[i] % 2 for i in indices):
            raise CurveError(f"curve is not invariant under {dict(involution)}: odd term {key}")
        new = list(key)
        for i in indices:
            new[i] //= 2
        terms[tuple(new)] = coeff
    rename = dict(names or {})
    if not rename and len(flipped) == 1:
        rename = {flipped[0]: "zeta"}
    variables = tuple(rename.get(v, v) for v in relation.variables)
    return MultiPoly(variables, terms, exact=relation.exact)


def quadratic_discriminant(relation: MultiPoly, variable: str) -> MultiPoly:
    """b^2 - 4ac for a relation a*v^2 + b*v + c, as a polynomial without v."""
    if relation.degree_in(variable) != 2:
        raise CurveError(f"relation has degree {relation.degree_in(variable)} in {variable}, expected 2")
    a = relation.coefficient_of(variable, 2)
    b = relation.coefficient_of(variable, 1)
    c = relation.coefficient_of(variable, 0)
    disc = b * b - a * c * 4
    keep = tuple(v for v in relation.variables if v != variable)
    return disc.with_variables(keep)


def solve_for_square(relation: MultiPoly, square: str) -> MultiPoly:
    """P with relation = k (square^2 - P) for a constant k; P is univariate in the other variable."""
    if relation.degree_in(square) != 2 or relation.coefficient_of(square, 1):
        raise CurveError(f"relation is not of the form k*{square}^2 - P")
    lead = relation.coefficient_of(square, 2)
    if not lead.is_constant():
        raise CurveError(f"coefficient of {square}^2 is not constant")
    scale = lead.constant_term() ** -1 if relation.exact else 1 / complex(lead.constant_term())
    p = -(relation.coefficient_of(square, 0) * scale)
    keep = tuple(v for v in relation.variables if v != square)
    return p.with_variables(keep)


# ---------------------------------------------------------------------------
# Level sets over a continuum of balances
# ---------------------------------------------------------------------------


def coefficient_name(variable: str, k: int) -> str:
    """Sample key of the Laurent coefficient x^(k) of a phase variable."""
    return f"{variable}[{k}]"


def chart_parameter(family: LaurentFamily) -> str:
    """The k = 0 parameter, which moves the base point along a continuum of balances."""
    for name in family.parameters:
        if family.parameter_orders.get(name) == 0:
            return name
    raise CurveError("family has no k = 0 parameter")


ArrayMap = Callable[[np.ndarray], np.ndarray]


def _restricted(polys: Sequence[MultiPoly], keep: Sequence[int], size: int) -> tuple[ArrayMap, ArrayMap, ArrayMap]:
    """Residual and Jacobian in the kept parameters, the others held at zero."""
    func_full = CompiledPolys(polys)
    jac_full = compile_jacobian(polys)
    columns = list(keep)

    def embed(y: np.ndarray) -> np.ndarray:
        x = np.zeros(size, dtype=complex)
        x[columns] = y
        return x

    def func(y: np.ndarray) -> np.ndarray:
        return func_full(embed(y))

    def jac(y: np.ndarray) -> np.ndarray:
        return jac_full(embed(y))[:, columns]

    return func, jac, embed


def sample_continuum_level_set(
    system: HamiltonianSystem,
    family: LaurentFamily,
    levels: Sequence[Any],
    count: int,
    *,
    seed: int = 0,
    radius: float = 0.5,
    starts: int = 8,
    max_attempts: int | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> list[DivisorSample]:
    """Points of the divisor of a family whose balances form a curved continuum.

    The base point is moved to random chart shifts up to ``radius`` times the
    chart coordinate; at each shift the family is re-expanded and the t^0
    level equations are solved for the other parameters by Newton iteration
    from ``starts`` random starts. Every distinct nondegenerate solution is
    kept, so samples sharing a chart shift are the sheets of the divisor over
    one base point. Samples carry x^(0) and x^(1) under
    :func:`coefficient_name` keys.
    """
    if not family.balance.on_continuum:
        raise CurveError("the family's balances are not a curved continuum")
    if len(levels) != len(system.invariants):
        raise CurveError(f"{len(levels)} levels for {len(system.invariants)} invariants")
    chart = chart_parameter(family)
    index = family.parameters.index(chart)
    keep = [i for i in range(len(family.parameters)) if i != index]
    unknowns = tuple(family.parameters[i] for i in keep)
    values = [to_complex(c) for c in levels]
    level_scale = max(1.0, max(abs(v) for v in values))
    order = family.spectrum.max_resonance + 1
    scale = radius * max(1.0, abs(complex(family.balance.x0[family.balance.chart_column])))
    rng = np.random.default_rng(seed)
    attempts = max_attempts if max_attempts is not None else 4 * count
    samples: list[DivisorSample] = []
    for _ in range(attempts):
        if len(samples) >= count:
            break
        shift = complex(scale * rng.uniform(0.2, 1.0) * np.exp(2j * np.pi * rng.uniform()))
        try:
            local = recentre_family(system, family, shift, order=order, tolerances=tolerances)
        except WorkbenchError as exc:
            logger.debug("no family at chart shift %.3g%+.3gj: %s", shift.real, shift.imag, exc)
            continue
        equations = [c - v for c, v in zip(level_coefficients(local, system.invariants), values)]
        func, jac, embed = _restricted(equations, keep, len(local.parameters))
        found: list[np.ndarray] = []
        for _ in range(starts):
            start = rng.normal(size=len(keep)) + 1j * rng.normal(size=len(keep))
            y, residual, _ = newton_solve(func, jac, start, tol=1e-13)
            if not np.isfinite(residual) or residual > 1e-10 * level_scale:
                continue
            matrix = jac(y)
            if np.linalg.matrix_rank(matrix, tol=1e-8 * max(1.0, float(np.abs(matrix).max()))) < len(keep):
                continue
            if any(np.linalg.norm(y - z) <= tolerances.dedupe * max(1.0, float(np.linalg.norm(z))) for z in found):
                continue
            found.append(y)
        for y in found:
            point = embed(y)
            record = dict(zip(local.parameters, point))
            record[chart] = shift
            for k in (0, 1):
                for i, name in enumerate(system.phase_variables):
                    value = poly_eval(local.coefficient(i, k).to_complex(), point)
                    record[coefficient_name(name, k)] = to_complex(value)
            samples.append(DivisorSample(y, tuple(levels), unknowns, record))
    if len(samples) < count:
        logger.warning("only %d of %d divisor samples found over the continuum", len(samples), count)
    return samples


def sheet_counts(samples: Sequence[DivisorSample], chart: str) -> dict[int, int]:
    """How many base points carry 1, 2, ... samples, grouping by the chart parameter."""
    per_base = Counter(complex(s.full_point[chart]) for s in samples)
    return dict(sorted(Counter(per_base.values()).items()))


# ---------------------------------------------------------------------------
# Clebsch divisor chain
# ---------------------------------------------------------------------------


CLEBSCH_VARIABLES = ("alpha", "beta", "gamma", "theta", "zeta", "eta")
CLEBSCH_DIVISOR_BASIS: list[Exponent] = [(0, 0, 0, 2), (0, 2, 2, 0), (2, 0, 2, 0), (2, 2, 0, 0), (1, 1, 1, 0)]


@dataclass
class ClebschCurves:
    """The divisor D, the elliptic base E, the genus-3 curve C and its quotient C0."""

    divisor: MultiPoly
    base: tuple[MultiPoly, MultiPoly]
    genus_three: MultiPoly
    quotient: MultiPoly
    eta: MultiPoly
    coefficients: tuple[Any, ...]
    d_squared: tuple[Any, Any]


def clebsch_chain(coefficients: Sequence[Any], d_squared: Sequence[Any]) -> ClebschCurves:
    """D, E, C and C0 for (c1, ..., c4) and (d1^2, d2^2), exact or complex.

    D: theta^2 + c1 beta^2 gamma^2 + c2 alpha^2 gamma^2 + c3 alpha^2 beta^2 + c4 alpha beta gamma = 0
    over E: beta^2 = d1^2 alpha^2 - 1, gamma^2 = d2^2 alpha^2 + 1.
    """
    scalars = list(coefficients) + list(d_squared)
    convert = as_exact if all(is_exact_scalar(v) for v in scalars) else to_complex
    c1, c2, c3, c4 = (convert(c) for c in coefficients)
    d1s, d2s = (convert(d) for d in d_squared)
    alpha, beta, gamma, theta, zeta, eta = (MultiPoly.variable(CLEBSCH_VARIABLES, v) for v in CLEBSCH_VARIABLES)
    q = beta**2 * gamma**2 * c1 + alpha**2 * gamma**2 * c2 + alpha**2 * beta**2 * c3 + alpha * beta * gamma * c4
    eta_expr = theta**2 + beta**2 * gamma**2 * c1 + (gamma**2 * c2 + beta**2 * c3) * zeta
    return ClebschCurves(
        divisor=theta**2 + q,
        base=(beta**2 - alpha**2 * d1s + 1, gamma**2 - alpha**2 * d2s - 1),
        genus_three=eta_expr**2 - zeta * beta**2 * gamma**2 * (c4 * c4),
        quotient=eta**2 - zeta * (zeta**2 * (d1s * d2s) + zeta * (d1s - d2s) - 1) * (c4 * c4),
        eta=eta_expr,
        coefficients=(c1, c2, c3, c4),
        d_squared=(d1s, d2s),
    )


def clebsch_curves(system: HamiltonianSystem) -> ClebschCurves:
    """The chain with the system's levels as (c1, ..., c4) and its (d1^2, d2^2)."""
    return clebsch_chain(system.levels, (system.parameters["d1_squared"], system.parameters["d2_squared"]))


def clebsch_branch_points(curves: ClebschCurves, tol: float = 1e-6) -> list[np.ndarray]:
    """Points of E where theta^2 = -Q vanishes: roots of Q1^2 - c4^2 zeta beta^2 gamma^2, with signs.

    Q1 = c1 beta^2 gamma^2 + (c2 gamma^2 + c3 beta^2) zeta is even in the E
    coordinates; for each root zeta the eight sign choices of (alpha, beta,
    gamma) are tested against Q1 + c4 alpha beta gamma = 0.
    """
    d1s, d2s = (to_complex(d) for d in curves.d_squared)
    c1, c2, c3, c4 = (to_complex(c) for c in curves.coefficients)
    z = np.polynomial.Polynomial([0j, 1 + 0j])
    beta2 = d1s * z - 1
    gamma2 = d2s * z + 1
    q1 = c1 * beta2 * gamma2 + (c2 * gamma2 + c3 * beta2) * z
    resultant = q1**2 - c4**2 * z * beta2 * gamma2
    found = []
    for root in resultant.roots():
        value = complex(q1(root))
        a0 = np.sqrt(complex(root))
        b0 = np.sqrt(complex(beta2(root)))
        g0 = np.sqrt(complex(gamma2(root)))
        scale = max(1.0, abs(value))
        for sa in (1, -1):
            for sb in (1, -1):
                for sg in (1, -1):
                    a, b, g = sa * a0, sb * b0, sg * g0
                    if abs(value + c4 * a * b * g) <= tol * scale:
                        found.append(np.array([a, b, g, root]))
    return found


@dataclass
class EllipticBaseFit:
    """Quadrics beta^2 + u alpha^2 + v = 0, gamma^2 + u' alpha^2 + v' = 0 fitted through samples.

    Dividing (alpha, beta, gamma) by ``scales`` brings them to
    beta^2 = d1^2 alpha^2 - 1, gamma^2 = d2^2 alpha^2 + 1 with
    d1^2 + d2^2 + 1 = 0; ``d_squared`` holds that normal form.
    """

    relations: tuple[FittedCurve, FittedCurve]
    d_squared: tuple[complex, complex]
    scales: tuple[complex, complex, complex]

    def normalize(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=complex) / np.asarray(self.scales)

    def to_json(self) -> dict[str, Any]:
        return {
            "relations": [r.to_json() for r in self.relations],
            "d_squared": [format_scalar(complex(d)) for d in self.d_squared],
            "scales": [[float(s.real), float(s.imag)] for s in self.scales],
        }


def fit_elliptic_base(points: np.ndarray, *, tolerances: Tolerances = DEFAULT_TOLERANCES) -> EllipticBaseFit:
    """Fit y^2 = s alpha^2 + r for y = beta, gamma through (alpha, beta, gamma) rows, then normalize.

    Raises FitError when either quadric does not fit and CurveError when the
    fitted pair is degenerate (r = 0, or d1^2 + d2^2 = 0 before scaling).
    """
    names = CLEBSCH_VARIABLES[:3]
    fits = []
    for k in (1, 2):
        square = tuple(2 if i == k else 0 for i in range(3))
        basis = [square, (2, 0, 0), (0, 0, 0)]
        fits.append(fit_curve(points, basis, names, normalize_by=square, tolerances=tolerances))
    (slope_b, offset_b), (slope_g, offset_g) = (
        (-to_complex(f.relation.terms.get((2, 0, 0), 0)), -to_complex(f.relation.terms.get((0, 0, 0), 0))) for f in fits
    )
    if abs(offset_b) <= FLOAT_ZERO or abs(offset_g) <= FLOAT_ZERO:
        raise CurveError("fitted base quadrics pass through alpha = 0 with y = 0: not an elliptic base")
    d1s, d2s = slope_b / -offset_b, slope_g / offset_g
    if abs(d1s + d2s) <= FLOAT_ZERO:
        raise CurveError("fitted base curve has d1^2 + d2^2 = 0 and cannot be normalized")
    lam_squared = -1 / (d1s + d2s)
    scales = (complex(np.sqrt(lam_squared)), complex(np.sqrt(-offset_b)), complex(np.sqrt(offset_g)))
    return EllipticBaseFit((fits[0], fits[1]), (d1s * lam_squared, d2s * lam_squared), scales)


def fit_clebsch_divisor(
    base_points: np.ndarray, candidates: np.ndarray, *, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> tuple[int, FittedCurve]:
    """Fit theta^2 + c1 b^2 g^2 + c2 a^2 g^2 + c3 a^2 b^2 + c4 a b g = 0, trying each candidate column as theta.

    ``base_points`` are (alpha, beta, gamma) rows in normal form. Returns the
    candidate index with the best separated fit; FitError when none fits.
    """
    best: tuple[int, FittedCurve] | None = None
    for j in range(candidates.shape[1]):
        column = np.asarray(candidates[:, j], dtype=complex)
        if np.abs(column).max() <= FLOAT_ZERO:
            continue
        rows = np.column_stack([base_points, column])
        try:
            fitted = fit_curve(
                rows, CLEBSCH_DIVISOR_BASIS, CLEBSCH_VARIABLES[:4], normalize_by=(0, 0, 0, 2), tolerances=tolerances
            )
        except FitError as exc:
            logger.debug("theta from column %d: %s", j, exc)
            continue
        if best is None or fitted.conditioning < best[1].conditioning:
            best = (j, fitted)
    if best is None:
        raise FitError("no candidate coordinate satisfies a relation of the divisor's shape")
    return best


def divisor_coefficients(relation: MultiPoly) -> tuple[complex, complex, complex, complex]:
    """(c1, c2, c3, c4) of a fitted relation normalized on theta^2."""
    c1, c2, c3, c4 = (to_complex(relation.terms.get(e, 0)) for e in CLEBSCH_DIVISOR_BASIS[1:])
    return c1, c2, c3, c4
