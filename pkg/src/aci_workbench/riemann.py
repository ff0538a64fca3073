"""Hyperelliptic curves y^2 = P(x): branch points, homology cycles and period matrices."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.polynomial.legendre import leggauss

from aci_workbench.algebra import MultiPoly, to_complex
from aci_workbench.errors import (
    CycleConstructionError,
    PeriodMatrixError,
    QuadratureError,
    SingularCurveError,
)
from aci_workbench.lattice import standard_symplectic

logger = logging.getLogger(__name__)

ROOT_SEPARATION = 1e-8
ROOT_RESIDUAL = 1e-10
POLISH_TOLERANCE = 1e-12
DEFAULT_NODES = 16
MAX_DEPTH = 30
QUADRATURE_TOLERANCE = 1e-13


# ---------------------------------------------------------------------------
# Genus bookkeeping
# ---------------------------------------------------------------------------


def hurwitz_genus(g0: int, n: int) -> int:
    """Genus of a double cover of a genus g0 curve branched at 2n points: 2 g0 + n - 1."""
    if g0 < 0 or n < 1:
        raise ValueError(f"need g0 >= 0 and n >= 1, got g0={g0}, n={n}")
    return 2 * g0 + n - 1


def unramified_cover_genus(g_base: int, sheets: int) -> int:
    """Genus of an unramified cover with the given number of sheets: sheets (g_base - 1) + 1."""
    if g_base < 1 or sheets < 1:
        raise ValueError("unramified covers need g_base >= 1 and sheets >= 1")
    return sheets * (g_base - 1) + 1


def nodal_union_genus(genera: Sequence[int], nodes: int) -> int:
    """Arithmetic genus of a connected union of smooth curves meeting transversally in ``nodes`` points."""
    if len(genera) > nodes + 1:
        raise ValueError("too few nodes to connect the components")
    return sum(genera) + nodes - len(genera) + 1


@dataclass(frozen=True)
class CoverData:
    """A double cover C -> C0 with 2n branch points."""

    g0: int
    n: int

    def __post_init__(self) -> None:
        hurwitz_genus(self.g0, self.n)

    @property
    def genus(self) -> int:
        return hurwitz_genus(self.g0, self.n)

    @property
    def branch_point_count(self) -> int:
        return 2 * self.n

    @property
    def prym_dimension(self) -> int:
        return self.genus - self.g0

    def to_json(self) -> dict[str, int]:
        return {
            "g0": self.g0,
            "n": self.n,
            "genus": self.genus,
            "branch_points": self.branch_point_count,
            "prym_dimension": self.prym_dimension,
        }


# ---------------------------------------------------------------------------
# Branch points
# ---------------------------------------------------------------------------


def _coefficients(poly: MultiPoly) -> np.ndarray:
    """Dense coefficients, highest degree first."""
    if poly.nvars != 1:
        raise SingularCurveError(f"expected a univariate polynomial, got variables {poly.variables}")
    degree = poly.degree()
    coeffs = np.zeros(degree + 1, dtype=complex)
    for (e,), c in poly.terms.items():
        coeffs[degree - e] = to_complex(c)
    return coeffs


def _root_scale(coeffs: np.ndarray, x: complex) -> float:
    powers = np.abs(x) ** np.arange(len(coeffs) - 1, -1, -1)
    return float(np.sum(np.abs(coeffs) * powers))


def branch_points(poly: MultiPoly) -> np.ndarray:
    """Roots of P from companion-matrix eigenvalues, Newton-polished.

    Raises SingularCurveError when two roots are closer than 1e-8 relative
    to the root spread.
    """
    coeffs = _coefficients(poly)
    if len(coeffs) < 2:
        raise SingularCurveError("constant polynomial has no branch points")
    roots = np.roots(coeffs)
    derivative = np.polyder(coeffs)
    polished = []
    for r in roots:
        for _ in range(20):
            value = np.polyval(coeffs, r)
            if abs(value) <= POLISH_TOLERANCE * _root_scale(coeffs, r):
                break
            slope = np.polyval(derivative, r)
            if slope == 0:
                break
            r = r - value / slope
        polished.append(complex(r))
    roots = np.asarray(polished)
    spread = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if abs(roots[i] - roots[j]) <= ROOT_SEPARATION * spread:
                raise SingularCurveError(f"near-multiple roots {roots[i]:.6g} and {roots[j]:.6g}: singular curve")
    for r in roots:
        if abs(np.polyval(coeffs, r)) > ROOT_RESIDUAL * _root_scale(coeffs, r):
            raise SingularCurveError(f"root {r:.6g} could not be polished")
    return roots


@dataclass
class HyperellipticModel:
    """y^2 = P(x) with its branch points and genus."""

    polynomial: MultiPoly
    branch_points: np.ndarray
    degree: int
    genus: int
    has_branch_at_infinity: bool

    @classmethod
    def from_polynomial(cls, poly: MultiPoly) -> HyperellipticModel:
        roots = branch_points(poly)
        degree = poly.degree()
        return cls(
            polynomial=poly,
            branch_points=roots,
            degree=degree,
            genus=(degree - 1) // 2,
            has_branch_at_infinity=bool(degree % 2),
        )

    @property
    def variable(self) -> str:
        return self.polynomial.variables[0]

    @property
    def leading_coefficient(self) -> complex:
        return complex(_coefficients(self.polynomial)[0])

    def to_json(self) -> dict[str, Any]:
        return {
            "polynomial": self.polynomial.to_json(),
            "degree": self.degree,
            "genus": self.genus,
            "branch_at_infinity": self.has_branch_at_infinity,
            "branch_points": [[float(z.real), float(z.imag)] for z in self.branch_points],
        }


@dataclass(frozen=True)
class DifferentialBasis:
    """Holomorphic differentials x^j dx / y."""

    exponents: tuple[int, ...]
    labels: tuple[str, ...] = ()

    @classmethod
    def standard(cls, genus: int, variable: str = "x") -> DifferentialBasis:
        return cls.from_exponents(tuple(range(genus)), variable)

    @classmethod
    def from_exponents(cls, exponents: Sequence[int], variable: str = "x", y: str = "y") -> DifferentialBasis:
        labels = []
        for j in exponents:
            power = "" if j == 0 else (f"{variable} " if j == 1 else f"{variable}^{j} ")
            labels.append(f"{power}d{variable}/{y}")
        return cls(tuple(exponents), tuple(labels))

    @property
    def dimension(self) -> int:
        return len(self.exponents)

    def check(self, genus: int) -> None:
        if self.dimension != genus:
            raise PeriodMatrixError(f"differential basis has {self.dimension} elements, genus is {genus}")
        if any(j < 0 or j > genus - 1 for j in self.exponents) or len(set(self.exponents)) != genus:
            raise PeriodMatrixError(f"exponents {self.exponents} are not holomorphic for genus {genus}")

    def involution_signs(self) -> np.ndarray:
        """Action of (x, y) -> (-x, y): x^j dx/y -> (-1)^(j+1) x^j dx/y."""
        return np.array([(-1) ** (j + 1) for j in self.exponents], dtype=int)


# ---------------------------------------------------------------------------
# Cycles
# ---------------------------------------------------------------------------


def _segment_distance(p: complex, a: complex, b: complex) -> float:
    d = b - a
    if d == 0:
        return abs(p - a)
    s = ((p - a) * np.conj(d)).real / abs(d) ** 2
    s = min(1.0, max(0.0, s))
    return abs(p - (a + s * d))


def _clearance(points: np.ndarray, order: Sequence[int], used: int) -> tuple[float, tuple[int, int]]:
    worst = np.inf
    pair = (order[0], order[1])
    for k in range(used - 1):
        i, j = order[k], order[k + 1]
        for other in range(len(points)):
            if other in (i, j):
                continue
            dist = _segment_distance(points[other], points[i], points[j])
            if dist < worst:
                worst, pair = dist, (i, j)
    return float(worst), pair


def chain_order(points: np.ndarray, used: int) -> list[int]:
    """Order branch points along a non-self-intersecting path with maximal clearance.

    Two candidates are compared: angular order around the centroid and order
    by real part. The one whose segments stay furthest from the remaining
    branch points wins.
    """
    centre = points.mean()
    angular = sorted(range(len(points)), key=lambda i: (np.angle(points[i] - centre), abs(points[i] - centre)))
    by_real = sorted(range(len(points)), key=lambda i: (points[i].real, points[i].imag))
    best, best_clearance, best_pair = None, -1.0, (0, 1)
    for order in (angular, by_real):
        clearance, pair = _clearance(points, order, used)
        if clearance > best_clearance:
            best, best_clearance, best_pair = order, clearance, pair
    spread = float(np.max(np.abs(points - centre))) if len(points) else 1.0
    if best_clearance < 1e-6 * max(spread, 1e-300):
        raise CycleConstructionError(
            f"branch points too close to route a cycle between {best_pair}", pair=best_pair
        )
    return list(best)


def _continue_sqrt(y: complex, x_old: complex, x_new: complex, roots: np.ndarray) -> complex:
    return y * complex(np.prod(np.sqrt((x_new - roots) / (x_old - roots))))


def _walk(y: complex, path: Sequence[complex], roots: np.ndarray) -> complex:
    """Continue y along a polyline, subdividing so each step is at most 0.3 of the distance to a root."""
    for start, end in zip(path, path[1:]):
        x = start
        while x != end:
            reach = 0.3 * float(np.min(np.abs(x - roots)))
            delta = end - x
            if abs(delta) <= reach:
                nxt = end
            else:
                nxt = x + delta * (reach / abs(delta))
            y = _continue_sqrt(y, x, nxt, roots)
            x = nxt
    return y


def _arc(centre: complex, radius: float, start: float, stop: float) -> list[complex]:
    """Clockwise arc from angle start to angle stop in steps of at most pi/16."""
    sweep = (start - stop) % (2 * np.pi)
    if sweep == 0:
        sweep = 2 * np.pi
    steps = max(1, int(np.ceil(sweep / (np.pi / 16))))
    angles = start - sweep * np.arange(steps + 1) / steps
    return [centre + radius * np.exp(1j * a) for a in angles]


@dataclass
class CycleSet:
    """Chain cycles gamma_k around [e_k, e_(k+1)] and a symplectic basis built from them.

    ``combination`` has one row per basis cycle (a_1..a_g, b_1..b_g) giving
    its coefficients on gamma_1..gamma_2g. Adjacent chain cycles meet once:
    gamma_k . gamma_(k+1) = +1.
    """

    chain: np.ndarray
    midpoint_values: np.ndarray
    combination: np.ndarray
    labels: tuple[str, ...]

    @property
    def genus(self) -> int:
        return self.combination.shape[0] // 2

    @property
    def chain_intersection(self) -> np.ndarray:
        size = self.combination.shape[1]
        matrix = np.zeros((size, size), dtype=np.int64)
        for k in range(size - 1):
            matrix[k, k + 1] = 1
            matrix[k + 1, k] = -1
        return matrix

    @property
    def intersection(self) -> np.ndarray:
        return self.combination @ self.chain_intersection @ self.combination.T

    def reversed(self, index: int) -> CycleSet:
        """The same basis with cycle ``index`` traversed backwards."""
        combination = self.combination.copy()
        combination[index] *= -1
        labels = list(self.labels)
        labels[index] = "-" + labels[index] if not labels[index].startswith("-") else labels[index][1:]
        return CycleSet(self.chain, self.midpoint_values, combination, tuple(labels))

    def with_combination(self, combination: np.ndarray, labels: Sequence[str]) -> CycleSet:
        return CycleSet(self.chain, self.midpoint_values, np.asarray(combination, dtype=np.int64), tuple(labels))

    def to_json(self) -> dict[str, Any]:
        return {
            "chain": [[float(z.real), float(z.imag)] for z in self.chain],
            "labels": list(self.labels),
            "combination": self.combination.tolist(),
            "intersection": self.intersection.tolist(),
        }


def symplectic_chain_combination(genus: int) -> np.ndarray:
    """a_i = gamma_(2i), b_i = -(gamma_1 + gamma_3 + ... + gamma_(2i-1))."""
    size = 2 * genus
    combination = np.zeros((size, size), dtype=np.int64)
    for i in range(genus):
        combination[i, 2 * i + 1] = 1
        for l in range(i + 1):
            combination[genus + i, 2 * l] = -1
    return combination


def build_cycles(model: HyperellipticModel) -> CycleSet:
    """Chain cycles through 2g + 1 branch points with sheets tracked between segment midpoints."""
    g = model.genus
    if g < 1:
        raise CycleConstructionError("a genus 0 curve has no cycle pairs to build")
    roots = model.branch_points
    used = 2 * g + 1
    order = chain_order(roots, used)
    chain = roots[order[:used]]

    distances = [abs(a - b) for i, a in enumerate(roots) for b in roots[i + 1 :]]
    rho = 0.25 * min(distances)
    lead_root = np.sqrt(complex(model.leading_coefficient))
    midpoints = (chain[:-1] + chain[1:]) / 2
    values = np.zeros(2 * g, dtype=complex)
    values[0] = lead_root * complex(np.prod(np.sqrt(midpoints[0] - roots)))
    for k in range(1, 2 * g):
        e = chain[k]
        back = (chain[k] - chain[k - 1]) / abs(chain[k] - chain[k - 1])
        ahead = (chain[k + 1] - chain[k]) / abs(chain[k + 1] - chain[k])
        entry = e - rho * back
        exit_ = e + rho * ahead
        arc = _arc(e, rho, float(np.angle(-back)), float(np.angle(ahead)))
        path = [midpoints[k - 1], entry, *arc[1:-1], exit_, midpoints[k]]
        values[k] = _walk(values[k - 1], path, roots)
    combination = symplectic_chain_combination(g)
    labels = tuple(f"a{i + 1}" for i in range(g)) + tuple(f"b{i + 1}" for i in range(g))
    cycles = CycleSet(chain, values, combination, labels)
    if not np.array_equal(cycles.intersection, standard_symplectic(g)):
        raise CycleConstructionError("chain combination does not give a symplectic basis")
    return cycles


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def _gauss(
    func: Callable[[np.ndarray], np.ndarray], a: float, b: float, nodes: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    half = (b - a) / 2
    theta = (a + b) / 2 + half * nodes
    return half * (weights @ func(theta))


def adaptive_gauss_legendre(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    nodes: int = DEFAULT_NODES,
    tol: float = QUADRATURE_TOLERANCE,
    max_depth: int = MAX_DEPTH,
) -> tuple[np.ndarray, float]:
    """Composite Gauss-Legendre with bisection until halves agree with the whole.

    ``func`` maps an array of points to an array of shape (points, k).
    Returns the integral (k,) and the accumulated error estimate.
    """
    x, w = leggauss(nodes)
    whole = _gauss(func, a, b, x, w)
    scale = max(1.0, float(np.max(np.abs(whole))))
    stack = [(a, b, whole, 0)]
    total = np.zeros_like(whole)
    error = 0.0
    while stack:
        lo, hi, estimate, depth = stack.pop()
        mid = (lo + hi) / 2
        left = _gauss(func, lo, mid, x, w)
        right = _gauss(func, mid, hi, x, w)
        diff = float(np.max(np.abs(left + right - estimate)))
        if diff <= tol * scale:
            total = total + left + right
            error += diff
        elif depth >= max_depth:
            raise QuadratureError(f"quadrature did not converge on [{lo:.3g}, {hi:.3g}] (change {diff:.3g})")
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    return total, error


def segment_integrals(
    model: HyperellipticModel,
    cycles: CycleSet,
    basis: DifferentialBasis,
    *,
    nodes: int = DEFAULT_NODES,
    tol: float = QUADRATURE_TOLERANCE,
) -> tuple[np.ndarray, float]:
    """(g, 2g) matrix of 2 * integral over [e_k, e_(k+1)] of x^j dx / y on the tracked sheet.

    With x = e_k + d (1 - cos t)/2 the endpoint square roots cancel and the
    integrand x^j / h(x) is smooth on [0, pi], where
    y = sqrt((x - e_k)(e_(k+1) - x)) h(x).
    """
    roots = model.branch_points
    chain = cycles.chain
    exponents = np.asarray(basis.exponents)
    result = np.zeros((basis.dimension, len(chain) - 1), dtype=complex)
    error = 0.0
    for k in range(len(chain) - 1):
        start, end = chain[k], chain[k + 1]
        d = end - start
        mid = (start + end) / 2
        others = np.array([r for r in roots if abs(r - start) > 0 and abs(r - end) > 0])
        h_mid = 2 * cycles.midpoint_values[k] / d

        def integrand(theta: np.ndarray, start: complex = start, d: complex = d, mid: complex = mid,
                      others: np.ndarray = others, h_mid: complex = h_mid) -> np.ndarray:
            x = start + d * (1 - np.cos(theta)) / 2
            if others.size:
                h = h_mid * np.prod(np.sqrt((x[:, None] - others[None, :]) / (mid - others[None, :])), axis=1)
            else:
                h = np.full(x.shape, h_mid)
            return (x[:, None] ** exponents[None, :]) / h[:, None]

        value, err = adaptive_gauss_legendre(integrand, 0.0, np.pi, nodes=nodes, tol=tol)
        result[:, k] = 2 * value
        error = max(error, 2 * err)
    return result, error


# ---------------------------------------------------------------------------
# Period matrices
# ---------------------------------------------------------------------------


@dataclass
class PeriodMatrix:
    """Periods of a differential basis over a homology basis (a_1..a_g, b_1..b_g)."""

    omega: np.ndarray
    intersection: np.ndarray
    cycle_labels: tuple[str, ...]
    differential_labels: tuple[str, ...] = ()
    quadrature_error: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def genus(self) -> int:
        return self.omega.shape[0]

    @property
    def a_periods(self) -> np.ndarray:
        return self.omega[:, : self.genus]

    @property
    def b_periods(self) -> np.ndarray:
        return self.omega[:, self.genus :]

    def riemann_matrix(self) -> np.ndarray:
        """Z = A^-1 B."""
        return np.linalg.solve(self.a_periods, self.b_periods)

    def bilinear_residual(self) -> float:
        """|Omega J^-1 Omega^T| relative to |Omega|^2."""
        inverse = np.linalg.inv(self.intersection.astype(float))
        value = self.omega @ inverse @ self.omega.T
        scale = max(1.0, float(np.max(np.abs(self.omega))) ** 2)
        return float(np.max(np.abs(value))) / scale

    def check(self, bilinear_tol: float = 1e-9, symmetry_tol: float = 1e-8) -> None:
        residual = self.bilinear_residual()
        if residual > bilinear_tol:
            raise PeriodMatrixError(f"Riemann bilinear relation fails: residual {residual:.3g}")
        z = self.riemann_matrix()
        asym = float(np.max(np.abs(z - z.T)))
        if asym > symmetry_tol * max(1.0, float(np.max(np.abs(z)))):
            raise PeriodMatrixError(f"normalized period matrix is not symmetric ({asym:.3g})")
        eigen = np.linalg.eigvalsh((z.imag + z.imag.T) / 2)
        if eigen.min() <= 0:
            raise PeriodMatrixError(f"Im Z is not positive definite (eigenvalues {eigen})")

    def to_json(self) -> dict[str, Any]:
        return {
            "omega": [[[float(z.real), float(z.imag)] for z in row] for row in self.omega],
            "cycles": list(self.cycle_labels),
            "differentials": list(self.differential_labels),
            "intersection": self.intersection.tolist(),
            "bilinear_residual": self.bilinear_residual(),
            "quadrature_error": self.quadrature_error,
        }


def period_matrix(
    model: HyperellipticModel,
    basis: DifferentialBasis | None = None,
    cycles: CycleSet | None = None,
    *,
    nodes: int = DEFAULT_NODES,
    tol: float = QUADRATURE_TOLERANCE,
    bilinear_tol: float = 1e-9,
) -> tuple[PeriodMatrix, CycleSet]:
    """Integrate the basis over the symplectic cycles and check the bilinear relations.

    If the chain orientation makes Im Z negative definite, the b-cycles are
    reversed so the result satisfies Riemann's inequality.
    """
    basis = basis or DifferentialBasis.standard(model.genus, model.variable)
    basis.check(model.genus)
    cycles = cycles or build_cycles(model)
    gamma, error = segment_integrals(model, cycles, basis, nodes=nodes, tol=tol)
    omega = gamma @ cycles.combination.T.astype(float)
    periods = PeriodMatrix(omega, cycles.intersection, cycles.labels, basis.labels, error)
    z = periods.riemann_matrix()
    imag = np.linalg.eigvalsh((z.imag + z.imag.T) / 2)
    if imag.max() < 0:
        g = model.genus
        logger.warning("chain orientation gave Im Z < 0; reversing the b-cycles")
        combination = cycles.combination.copy()
        combination[g:] *= -1
        labels = cycles.labels[:g] + tuple("-" + l if not l.startswith("-") else l[1:] for l in cycles.labels[g:])
        oriented = cycles.with_combination(combination, labels)
        omega = gamma @ oriented.combination.T.astype(float)
        periods = PeriodMatrix(omega, oriented.intersection, oriented.labels, basis.labels, error)
        periods.warnings.append(f"b-cycles reversed ({', '.join(labels[g:])})")
        cycles = oriented
    periods.check(bilinear_tol)
    return periods, cycles


# ---------------------------------------------------------------------------
# Elliptic helpers
# ---------------------------------------------------------------------------


def agm(a: complex, b: complex, tol: float = 1e-16, max_iterations: int = 100) -> complex:
    """Arithmetic-geometric mean with the right choice of square root."""
    a, b = complex(a), complex(b)
    for _ in range(max_iterations):
        if abs(a - b) <= tol * abs(a):
            return a
        root = np.sqrt(a * b)
        if abs((a + b) / 2 - root) > abs((a + b) / 2 + root):
            root = -root
        a, b = (a + b) / 2, root
    return a


def complete_elliptic_k(k: complex) -> complex:
    """K(k) = pi / (2 AGM(1, sqrt(1 - k^2)))."""
    kp = np.sqrt(1 - complex(k) ** 2)
    value = np.pi / (2 * agm(1, kp))
    return complex(value.real, 0.0) if abs(value.imag) < 1e-15 and np.isreal(k) else complex(value)


def fundamental_domain(tau: complex, max_iterations: int = 1000) -> tuple[complex, np.ndarray]:
    """Gauss reduction of tau to |Re tau| <= 1/2, |tau| >= 1; returns (tau', [[a, b], [c, d]])."""
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("tau must lie in the upper half plane")
    matrix = np.eye(2, dtype=np.int64)
    for _ in range(max_iterations):
        shift = int(np.floor(tau.real + 0.5))
        if shift:
            tau -= shift
            matrix = np.array([[1, -shift], [0, 1]], dtype=np.int64) @ matrix
        if abs(tau) < 1 - 1e-15:
            tau = -1 / tau
            matrix = np.array([[0, -1], [1, 0]], dtype=np.int64) @ matrix
        else:
            break
    if abs(abs(tau) - 1) < 1e-12 and tau.real < 0:
        tau = -1 / tau
        matrix = np.array([[0, -1], [1, 0]], dtype=np.int64) @ matrix
    if abs(tau.real + 0.5) < 1e-12:
        tau += 1
        matrix = np.array([[1, 1], [0, 1]], dtype=np.int64) @ matrix
    return tau, matrix


def sl2z_equivalent(tau1: complex, tau2: complex, tol: float = 1e-8) -> bool:
    """True when tau1 and tau2 reduce to the same point of the fundamental domain."""
    r1, _ = fundamental_domain(tau1)
    r2, _ = fundamental_domain(tau2)
    return abs(r1 - r2) <= tol * max(1.0, abs(r1))


def elliptic_tau(model: HyperellipticModel, **kwargs: Any) -> complex:
    """Normalized period b/a of dx/y for a genus one model."""
    if model.genus != 1:
        raise PeriodMatrixError(f"expected a genus one model, got genus {model.genus}")
    periods, _ = period_matrix(model, **kwargs)
    return complex(periods.riemann_matrix()[0, 0])
