"""Registry of weight-homogeneous Hamiltonian systems and Poisson-bracket helpers."""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import sympy

from aci_workbench.algebra import MultiPoly, PolyMatrix, as_exact, poly_matvec
from aci_workbench.errors import DimensionError, ParameterError

logger = logging.getLogger(__name__)


@dataclass
class HamiltonianSystem:
    """A polynomial vector field with its invariants and optional Poisson structure."""

    name: str
    phase_variables: tuple[str, ...]
    vector_field: tuple[MultiPoly, ...]
    invariants: tuple[MultiPoly, ...]
    invariant_names: tuple[str, ...]
    poisson: PolyMatrix | None = None
    weights: tuple[int, ...] | None = None
    parameters: dict[str, Any] = field(default_factory=dict)
    levels: tuple[Any, ...] = ()
    family_parameters: tuple[str, ...] = ()
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        m = len(self.phase_variables)
        if len(self.vector_field) != m:
            raise DimensionError(f"{self.name}: vector field has {len(self.vector_field)} components, expected {m}")
        for poly in (*self.vector_field, *self.invariants):
            if poly.variables != self.phase_variables:
                raise DimensionError(f"{self.name}: polynomial over {poly.variables}, expected {self.phase_variables}")
        if len(self.invariant_names) != len(self.invariants):
            raise DimensionError(f"{self.name}: one name per invariant is required")
        if self.poisson is not None:
            _check_poisson(self.poisson, m)
            if not is_skew(self.poisson):
                raise DimensionError(f"{self.name}: Poisson matrix is not skew-symmetric")

    @property
    def dimension(self) -> int:
        return len(self.phase_variables)

    def invariance_residuals(self) -> list[MultiPoly]:
        """<grad H_i, f> for each invariant; all zero for a correct registry entry."""
        residuals = []
        for h in self.invariants:
            total = MultiPoly.zero(self.phase_variables)
            for dh, fi in zip(h.gradient(), self.vector_field):
                if dh and fi:
                    total = total + dh * fi
            residuals.append(total)
        return residuals


# ---------------------------------------------------------------------------
# Poisson structures
# ---------------------------------------------------------------------------


def canonical_poisson(phase_variables: Sequence[str]) -> PolyMatrix:
    """The standard J = [[0, I], [-I, 0]] for variables ordered (q..., p...)."""
    m = len(phase_variables)
    if m % 2:
        raise DimensionError("canonical structure needs an even number of variables")
    n = m // 2
    zero = MultiPoly.zero(phase_variables)
    one = MultiPoly.constant(phase_variables, 1)
    matrix = [[zero for _ in range(m)] for _ in range(m)]
    for i in range(n):
        matrix[i][n + i] = one
        matrix[n + i][i] = -one
    return matrix


def is_skew(matrix: PolyMatrix) -> bool:
    m = len(matrix)
    return all((matrix[i][j] + matrix[j][i]).is_zero() for i in range(m) for j in range(m))


def _check_poisson(matrix: PolyMatrix, m: int) -> None:
    if len(matrix) != m or any(len(row) != m for row in matrix):
        raise DimensionError(f"Poisson matrix must be {m}x{m}")


def poisson_bracket(f: MultiPoly, h: MultiPoly, poisson: PolyMatrix) -> MultiPoly:
    """{F, H} = <dF/dx, J dH/dx> as an exact polynomial."""
    if f.variables != h.variables:
        raise DimensionError("bracket operands must share variables")
    _check_poisson(poisson, f.nvars)
    return sum_products(f.gradient(), poly_matvec(poisson, h.gradient()), f.variables)


def hamiltonian_vector_field(h: MultiPoly, poisson: PolyMatrix) -> list[MultiPoly]:
    """X_H = J dH/dx."""
    _check_poisson(poisson, h.nvars)
    return poly_matvec(poisson, h.gradient())


def sum_products(left: Sequence[MultiPoly], right: Sequence[MultiPoly], variables: Sequence[str]) -> MultiPoly:
    total = MultiPoly.zero(variables)
    for a, b in zip(left, right):
        if a and b:
            total = total + a * b
    return total


# ---------------------------------------------------------------------------
# Registry entries
# ---------------------------------------------------------------------------


def _rational(value: Any) -> sympy.Rational:
    if isinstance(value, float):
        raise ParameterError(f"parameter {value!r} must be exact (int, 'p/q' string or Fraction)")
    return sympy.Rational(str(Fraction(str(value)) if isinstance(value, str) else Fraction(value)))


def _polys(exprs: Sequence[Any], variables: Sequence[str]) -> tuple[MultiPoly, ...]:
    return tuple(MultiPoly.from_expr(e, variables) for e in exprs)


def henon_heiles(a: Any = 0, b: Any = 0, c1: Any = 1, c2: Any = 1) -> HamiltonianSystem:
    """Integrable Henon-Heiles system in canonical coordinates (q1, q2, p1, p2)."""
    variables = ("q1", "q2", "p1", "p2")
    q1, q2, p1, p2 = sympy.symbols(variables)
    a_, b_ = _rational(a), _rational(b)
    h1 = (p1**2 + p2**2 + a_ * q1**2 + b_ * q2**2) / 2 + q1**2 * q2 + 2 * q2**3
    h2 = (
        q1**4
        + 4 * q1**2 * q2**2
        - 4 * p1 * (p1 * q2 - p2 * q1)
        + 4 * a_ * q1**2 * q2
        + (4 * a_ - b_) * (p1**2 + a_ * q1**2)
    )
    field_exprs = [p1, p2, -a_ * q1 - 2 * q1 * q2, -b_ * q2 - q1**2 - 6 * q2**2]
    return HamiltonianSystem(
        name="henon-heiles",
        phase_variables=variables,
        vector_field=_polys(field_exprs, variables),
        invariants=_polys([h1, h2], variables),
        invariant_names=("H1", "H2"),
        poisson=canonical_poisson(variables),
        parameters={"a": a_, "b": b_},
        levels=(as_exact(_rational(c1)), as_exact(_rational(c2))),
        family_parameters=("alpha", "beta", "gamma"),
        metadata={
            "hamiltonian": "H1",
            "cover": {"g0": 1, "n": 2},
            "involution": {"alpha": -1},
            "divisor_variables": ("alpha", "beta"),
            "differential_exponents": (2, 0, 1),
            "embedding_functions": (
                "1", "y1", "y1**2", "y2", "x1", "x1**2 + y1**2*y2", "x2*y1 - 2*x1*y2",
                "x1*x2 + 2*A*y1*y2 + 2*y1*y2**2",
            ),
        },
    )


def henon_heiles_curve(a: Any = 0, b: Any = 0, c1: Any = 1, c2: Any = 1) -> MultiPoly:
    """The printed divisor relation beta**2 - P8(alpha) over (alpha, beta)."""
    alpha, beta = sympy.symbols("alpha beta")
    A, B, C1, C2 = (_rational(v) for v in (a, b, c1, c2))
    R = sympy.Rational
    p8 = (
        -R(7, 15552) * alpha**8
        - R(1, 432) * (5 * A - R(13, 18) * B) * alpha**6
        - R(1, 36) * (R(671, 15120) * B**2 + R(17, 7) * A**2 - R(943, 1260) * B * A) * alpha**4
        - R(1, 36)
        * (4 * A**3 - R(1, 2520) * B**3 - R(13, 6) * A**2 * B + R(2, 9) * A * B**2 - R(10, 7) * C1)
        * alpha**2
        + C2 / 36
    )
    return MultiPoly.from_expr(beta**2 - p8, ("alpha", "beta"))


def kowalewski(c1: Any = "3/2", c2: Any = "1/2", c4: Any = 2) -> HamiltonianSystem:
    """Kowalewski top with the centre of gravity normalised to (1, 0, 0)."""
    variables = ("m1", "m2", "m3", "gamma1", "gamma2", "gamma3")
    m1, m2, m3, g1, g2, g3 = sympy.symbols(variables)
    field_exprs = [
        m2 * m3,
        -m1 * m3 + 2 * g3,
        -2 * g2,
        2 * m3 * g2 - m2 * g3,
        m1 * g3 - 2 * m3 * g1,
        m2 * g1 - m1 * g2,
    ]
    h1 = (m1**2 + m2**2) / 2 + m3**2 + 2 * g1
    h2 = m1 * g1 + m2 * g2 + m3 * g3
    h3 = g1**2 + g2**2 + g3**2
    I = sympy.I
    h4 = sympy.expand(
        (((m1 + I * m2) / 2) ** 2 - (g1 + I * g2)) * (((m1 - I * m2) / 2) ** 2 - (g1 - I * g2))
    )
    levels = tuple(as_exact(_rational(c)) for c in (c1, c2, 1, c4))
    return HamiltonianSystem(
        name="kowalewski",
        phase_variables=variables,
        vector_field=_polys(field_exprs, variables),
        invariants=_polys([h1, h2, h3, h4], variables),
        invariant_names=("H1", "H2", "H3", "H4"),
        parameters={"c1": _rational(c1), "c2": _rational(c2), "c3": 1, "c4": _rational(c4)},
        levels=levels,
        family_parameters=("alpha1", "alpha2", "alpha3", "alpha4", "alpha5"),
        metadata={
            "divisor_variables": ("alpha1", "alpha2"),
            "component_genus": 3,
            "component_intersections": 4,
            "cover": {"g0": 1, "n": 2},
            "embedding_functions": (
                "1", "m1", "m2", "m3", "gamma3", "f1**2 + f2**2", "4*f1*f4 - f3*f5",
                "(f2*gamma1 - f1*gamma2)*f3 + 2*f4*gamma2",
            ),
        },
    )


def kowalewski_curve(epsilon: int, c1: Any = "3/2", c2: Any = "1/2", c4: Any = 2) -> MultiPoly:
    """The printed relation (a1^2 - 1)((a1^2 - 1) a2^2 - P(a2)) + c4 over (alpha1, alpha2)."""
    if epsilon not in (1, -1):
        raise ParameterError("epsilon must be +1 or -1")
    a1, a2 = sympy.symbols("alpha1 alpha2")
    C1, C2, C4 = (_rational(v) for v in (c1, c2, c4))
    p = C1 * a2**2 - 2 * epsilon * C2 * a2 - 1
    expr = (a1**2 - 1) * ((a1**2 - 1) * a2**2 - p) + C4
    return MultiPoly.from_expr(expr, ("alpha1", "alpha2"))


def validate_clebsch_parameters(a: Sequence[Any], b: Sequence[Any], rho: Any) -> None:
    """Check the Clebsch conditions on (a_i, b_i, rho); raise ParameterError otherwise."""
    a = [_rational(v) for v in a]
    b = [_rational(v) for v in b]
    rho = _rational(rho)
    if len(a) != 3 or len(b) != 3:
        raise ParameterError("Clebsch needs three a_i and three b_i")
    if any(v == 0 for v in b):
        raise ParameterError("b_i must be nonzero")
    cyclic = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
    if len(set(a)) != 3:
        raise ParameterError(f"a_i must be pairwise distinct, got {a}")
    total = sum((a[j] - a[k]) / b[i] for i, j, k in cyclic)
    if total != 0:
        raise ParameterError(f"(a2-a3)/b1 + (a3-a1)/b2 + (a1-a2)/b3 = {total}, expected 0")
    for i, j, k in cyclic:
        value = b[i] * (b[j] - b[k]) / (a[j] - a[k])
        if value != rho:
            raise ParameterError(
                f"rho = b{i + 1}(b{j + 1}-b{k + 1})/(a{j + 1}-a{k + 1}) = {value} disagrees with rho = {rho}"
            )


def clebsch(
    b: Sequence[Any] = (1, 2, 3),
    rho: Any = 1,
    a: Sequence[Any] | None = None,
    c: Sequence[Any] = (2, 3, 5, 7),
    d1_squared: Any = 1,
    d2_squared: Any = -2,
) -> HamiltonianSystem:
    """Clebsch case of Kirchhoff's equations in the coordinates (p, l)."""
    b_ = [_rational(v) for v in b]
    rho_ = _rational(rho)
    if a is None:
        a_ = [-b_[1] * b_[2] / rho_, -b_[2] * b_[0] / rho_, -b_[0] * b_[1] / rho_]
    else:
        a_ = [_rational(v) for v in a]
    validate_clebsch_parameters(a_, b_, rho_)
    d1s, d2s = _rational(d1_squared), _rational(d2_squared)
    if d1s + d2s + 1 != 0:
        raise ParameterError(f"d1^2 + d2^2 + 1 = {d1s + d2s + 1}, expected 0")
    variables = ("p1", "p2", "p3", "l1", "l2", "l3")
    syms = sympy.symbols(variables)
    p, l = sympy.Matrix(syms[:3]), sympy.Matrix(syms[3:])
    h1 = sum(a_[i] * p[i] ** 2 + b_[i] * l[i] ** 2 for i in range(3)) / 2
    h2 = sum(p[i] ** 2 for i in range(3))
    h3 = sum(p[i] * l[i] for i in range(3))
    h4 = (sum(b_[i] * p[i] ** 2 for i in range(3)) + rho_ * sum(l[i] ** 2 for i in range(3))) / 2
    grad_p = sympy.Matrix([a_[i] * p[i] for i in range(3)])
    grad_l = sympy.Matrix([b_[i] * l[i] for i in range(3)])
    p_dot = p.cross(grad_l)
    l_dot = p.cross(grad_p) + l.cross(grad_l)
    field_exprs = list(p_dot) + list(l_dot)
    P = [[0, -p[2], p[1]], [p[2], 0, -p[0]], [-p[1], p[0], 0]]
    L = [[0, -l[2], l[1]], [l[2], 0, -l[0]], [-l[1], l[0], 0]]
    J_exprs = [[0] * 3 + P[i] for i in range(3)] + [P[i] + L[i] for i in range(3)]
    poisson = [[MultiPoly.from_expr(e, variables) for e in row] for row in J_exprs]
    return HamiltonianSystem(
        name="clebsch",
        phase_variables=variables,
        vector_field=_polys(field_exprs, variables),
        invariants=_polys([h1, h2, h3, h4], variables),
        invariant_names=("H1", "H2", "H3", "H4"),
        poisson=poisson,
        parameters={"a": a_, "b": b_, "rho": rho_, "d1_squared": d1s, "d2_squared": d2s},
        levels=tuple(as_exact(_rational(v)) for v in c),
        family_parameters=("theta0", "theta1", "theta2", "theta3", "theta4"),
        metadata={
            "hamiltonian": "H1",
            "cover": {"g0": 1, "n": 8},
            "quotient_cover": {"g0": 1, "n": 2},
            "unramified_sheets": 4,
            "quotient_genus": 3,
            "branch_points_over_base": 16,
            "base_variables": ("l1", "l2", "l3"),
            "quotient_differentials": ("d zeta / eta", "zeta d zeta / (theta eta)", "d zeta / (theta eta)"),
        },
    )


@dataclass(frozen=True)
class SystemDefinition:
    """A registry entry: a builder with its default parameter values."""

    name: str
    description: str
    builder: Callable[..., HamiltonianSystem]
    defaults: Mapping[str, Any]

    def build(self, params: Mapping[str, Any] | None = None) -> HamiltonianSystem:
        values = dict(self.defaults)
        unknown = set(params or {}) - set(values)
        if unknown:
            raise ParameterError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        values.update(params or {})
        system = self.builder(**values)
        residuals = system.invariance_residuals()
        bad = [n for n, r in zip(system.invariant_names, residuals) if not r.is_zero()]
        if bad:
            raise ParameterError(f"{self.name}: invariants {bad} are not conserved for {values}")
        if system.poisson is not None and system.metadata.get("hamiltonian"):
            idx = system.invariant_names.index(system.metadata["hamiltonian"])
            generated = hamiltonian_vector_field(system.invariants[idx], system.poisson)
            if any(not (g - f).is_zero() for g, f in zip(generated, system.vector_field)):
                raise ParameterError(f"{self.name}: J grad H does not reproduce the vector field")
        logger.debug("Built system %s with %s", self.name, values)
        return system


REGISTRY: dict[str, SystemDefinition] = {
    "henon-heiles": SystemDefinition(
        "henon-heiles",
        "Henon-Heiles, integrable 1:6 case",
        henon_heiles,
        {"a": 0, "b": 0, "c1": 1, "c2": 1},
    ),
    "kowalewski": SystemDefinition(
        "kowalewski",
        "Kowalewski spinning top",
        kowalewski,
        {"c1": "3/2", "c2": "1/2", "c4": 2},
    ),
    "clebsch": SystemDefinition(
        "clebsch",
        "Kirchhoff equations, Clebsch case",
        clebsch,
        {"b": (1, 2, 3), "rho": 1, "a": None, "c": (2, 3, 5, 7), "d1_squared": 1, "d2_squared": -2},
    ),
}


def list_systems() -> list[SystemDefinition]:
    return list(REGISTRY.values())


def get_system(name: str, params: Mapping[str, Any] | None = None) -> HamiltonianSystem:
    """Build a registry system with optional parameter overrides."""
    try:
        definition = REGISTRY[name]
    except KeyError:
        raise ParameterError(f"unknown system {name!r}; choose from {sorted(REGISTRY)}") from None
    return definition.build(params)
