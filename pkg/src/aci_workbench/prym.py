"""Involutions on homology, the adapted period matrix and its Jacobian / Prym split."""

from __future__ import annotations

import logging
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Any

import numpy as np

from aci_workbench.errors import InvolutionError, NormalFormError, PolarizationError, SplitError
from aci_workbench.lattice import (
    as_int_matrix,
    elementary_divisors,
    integer_kernel_basis,
    lattice_index,
    round_integer_matrix,
    solve_integer,
    standard_symplectic,
    symplectic_reduction,
)
from aci_workbench.riemann import HyperellipticModel, PeriodMatrix, elliptic_tau, sl2z_equivalent

logger = logging.getLogger(__name__)

MAX_CANDIDATE_SUPPORT = 4


def _complex_json(matrix: np.ndarray) -> list[list[list[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(matrix)]


def _real_stack(matrix: np.ndarray) -> np.ndarray:
    return np.vstack([matrix.real, matrix.imag])


# ---------------------------------------------------------------------------
# Involution on homology
# ---------------------------------------------------------------------------


@dataclass
class InvolutionData:
    """sigma acting on differentials (S, diagonal signs) and on cycles (M).

    Columns of M give images of basis cycles: sigma(c_k) = sum_l M[l, k] c_l.
    """

    signs: np.ndarray
    matrix: np.ndarray
    intersection: np.ndarray
    variable_action: dict[str, int] = field(default_factory=dict)
    rounding_error: float = 0.0
    residual: float = 0.0

    @property
    def genus(self) -> int:
        return len(self.signs)

    @property
    def g0(self) -> int:
        return int(np.sum(self.signs == 1))

    @property
    def n(self) -> int:
        return self.genus - 2 * self.g0 + 1

    @property
    def prym_dimension(self) -> int:
        return self.genus - self.g0

    def to_json(self) -> dict[str, Any]:
        return {
            "variable_action": self.variable_action,
            "S": self.signs.tolist(),
            "M": self.matrix.tolist(),
            "g0": self.g0,
            "n": self.n,
            "rounding_error": self.rounding_error,
            "residual": self.residual,
        }


def check_involution(matrix: np.ndarray, intersection: np.ndarray, g0: int | None = None) -> None:
    """M^2 = I, M^T J M = J and, when given, +1 multiplicity 2 g0."""
    size = matrix.shape[0]
    if not np.array_equal(matrix @ matrix, np.eye(size, dtype=np.int64)):
        raise InvolutionError("M is not an involution: M^2 != I")
    if not np.array_equal(matrix.T @ intersection @ matrix, intersection):
        raise InvolutionError("M does not preserve the intersection form")
    if g0 is not None:
        plus = size - np.linalg.matrix_rank((matrix - np.eye(size)).astype(float))
        if plus != 2 * g0:
            raise InvolutionError(f"+1 eigenspace of M has dimension {plus}, expected {2 * g0}")


def involution_on_homology(
    periods: PeriodMatrix,
    signs: Sequence[int],
    *,
    variable_action: Mapping[str, int] | None = None,
    tol: float = 1e-4,
) -> InvolutionData:
    """Solve S Omega = Omega M for an integer M.

    Real and imaginary parts are stacked so M comes from a square real
    system; the solution is then rounded and checked exactly.
    """
    signs = np.asarray(signs, dtype=int)
    omega = periods.omega
    if signs.shape != (periods.genus,) or not np.all(np.abs(signs) == 1):
        raise InvolutionError(f"S must be {periods.genus} signs of +-1, got {signs.tolist()}")
    target = signs[:, None] * omega
    approx = np.linalg.solve(_real_stack(omega), _real_stack(target))
    try:
        matrix, error = round_integer_matrix(approx, tol)
    except ValueError as exc:
        raise InvolutionError(f"involution not defined over this lattice: {exc}") from exc
    residual = float(np.max(np.abs(omega @ matrix - target))) / max(1.0, float(np.max(np.abs(omega))))
    if residual > 1e-6:
        raise InvolutionError(f"S Omega = Omega M fails after rounding (residual {residual:.3g})")
    intersection = as_int_matrix(periods.intersection)
    g0 = int(np.sum(signs == 1))
    check_involution(matrix, intersection, g0)
    logger.info("Involution on homology: g0=%d, rounding error %.2e", g0, error)
    return InvolutionData(signs, matrix, intersection, dict(variable_action or {}), error, residual)


# ---------------------------------------------------------------------------
# Normal form
# ---------------------------------------------------------------------------


def normal_form(g0: int, n: int) -> np.ndarray:
    """sigma(a_i) = a_(g0+n-1+i) for i <= g0, sigma(a_j) = -a_j in between; the same on b."""
    p = g0 + n - 1
    g = p + g0
    matrix = np.zeros((2 * g, 2 * g), dtype=np.int64)
    for offset in (0, g):
        for i in range(g0):
            matrix[offset + p + i, offset + i] = 1
            matrix[offset + i, offset + p + i] = 1
        for j in range(g0, p):
            matrix[offset + j, offset + j] = -1
    return matrix


def _candidates(size: int) -> Iterator[np.ndarray]:
    for support in range(1, min(size, MAX_CANDIDATE_SUPPORT) + 1):
        for positions in combinations(range(size), support):
            for values in product((1, -1), repeat=support):
                if values[0] < 0:
                    continue
                vec = np.zeros(size, dtype=np.int64)
                vec[list(positions)] = values
                yield vec


def _restrict(matrix: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Matrix of ``matrix`` on the sublattice spanned by the columns of ``basis``."""
    image = matrix @ basis
    local = np.linalg.lstsq(basis.astype(float), image.astype(float), rcond=None)[0]
    local, _ = round_integer_matrix(local, 1e-8)
    if not np.array_equal(basis @ local, image):
        raise NormalFormError("sublattice is not invariant under the involution")
    return local


def _swap_pair(
    local_m: np.ndarray, local_form: np.ndarray
) -> tuple[np.ndarray, np.ndarray] | None:
    """Some a, b with <a, b> = 1, <Ma, b> = 0 and a, Ma spanning a primitive plane."""
    for a in _candidates(local_m.shape[0]):
        pair = np.column_stack([a, local_m @ a])
        if elementary_divisors(pair) != (1, 1):
            continue
        constraints = np.vstack([a @ local_form, (local_m @ a) @ local_form])
        b = solve_integer(constraints, [1, 0])
        if b is not None:
            return a, b
    return None


def normal_form_basis(matrix: np.ndarray, intersection: np.ndarray, g0: int, n: int) -> np.ndarray:
    """Integer symplectic T with T^-1 M T equal to ``normal_form(g0, n)``.

    Swap blocks {a, Ma, b, Mb} are split off g0 times; what remains is
    anti-invariant and only needs a symplectic basis.
    """
    matrix = as_int_matrix(matrix)
    intersection = as_int_matrix(intersection)
    g = 2 * g0 + n - 1
    if matrix.shape != (2 * g, 2 * g):
        raise NormalFormError(f"M has shape {matrix.shape}, expected {(2 * g, 2 * g)}")
    target = normal_form(g0, n)
    if np.array_equal(matrix, target) and np.array_equal(intersection, standard_symplectic(g)):
        return np.eye(2 * g, dtype=np.int64)

    basis = np.eye(2 * g, dtype=np.int64)
    swaps: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(g0):
        local_m = _restrict(matrix, basis)
        local_form = basis.T @ intersection @ basis
        found = _swap_pair(local_m, local_form)
        if found is None:
            raise NormalFormError(
                "no swap pair for the involution over the integers",
                list(elementary_divisors(local_m - np.eye(local_m.shape[0], dtype=np.int64))),
            )
        a, b = found
        vectors = [basis @ a, basis @ (local_m @ a), basis @ b, basis @ (local_m @ b)]
        swaps.append((vectors[0], vectors[2]))
        constraints = np.vstack([v @ intersection @ basis for v in vectors])
        basis = basis @ integer_kernel_basis(constraints)

    if basis.shape[1]:
        rest = _restrict(matrix, basis)
        if not np.array_equal(rest, -np.eye(basis.shape[1], dtype=np.int64)):
            raise NormalFormError(
                "involution is not -1 on the complement of the swap blocks",
                list(elementary_divisors(rest + np.eye(basis.shape[1], dtype=np.int64))),
            )
        anti = basis @ symplectic_reduction(basis.T @ intersection @ basis)
        anti_a, anti_b = anti[:, : n - 1], anti[:, n - 1 :]
    else:
        anti_a = anti_b = np.zeros((2 * g, 0), dtype=np.int64)

    a_cols = [a for a, _ in swaps]
    b_cols = [b for _, b in swaps]
    columns = (
        a_cols
        + list(anti_a.T)
        + [matrix @ a for a in a_cols]
        + b_cols
        + list(anti_b.T)
        + [matrix @ b for b in b_cols]
    )
    transform = np.column_stack(columns).astype(np.int64)
    if not np.array_equal(transform.T @ intersection @ transform, standard_symplectic(g)):
        raise NormalFormError("adapted basis is not symplectic", list(elementary_divisors(transform)))
    if not np.array_equal(matrix @ transform, transform @ target):
        raise NormalFormError("adapted basis does not bring M to normal form", list(elementary_divisors(transform)))
    return transform


@dataclass
class AdaptedPeriods:
    """Period matrix in the normal-form basis, anti-invariant differentials first."""

    omega: np.ndarray
    transform: np.ndarray
    row_order: tuple[int, ...]
    g0: int
    n: int

    def to_json(self) -> dict[str, Any]:
        return {
            "omega": _complex_json(self.omega),
            "T": self.transform.tolist(),
            "row_order": list(self.row_order),
            "g0": self.g0,
            "n": self.n,
        }


def adapt_basis(involution: InvolutionData, periods: PeriodMatrix) -> AdaptedPeriods:
    """Omega_adapted = P Omega T with T symplectic and rows ordered (sigma* = -1, sigma* = +1)."""
    transform = normal_form_basis(involution.matrix, involution.intersection, involution.g0, involution.n)
    rows = tuple(int(i) for i in np.argsort(involution.signs, kind="stable"))
    omega = periods.omega[list(rows), :] @ transform.astype(float)
    logger.debug("Adapted basis found for g0=%d, n=%d", involution.g0, involution.n)
    return AdaptedPeriods(omega, transform, rows, involution.g0, involution.n)


# ---------------------------------------------------------------------------
# Split
# ---------------------------------------------------------------------------


def column_operations(g0: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integer matrices Q1, Q2, Q3 with Omega_k = Omega_adapted Q_k.

    Q1 replaces a_i, b_i by a_i - sigma(a_i), b_i - sigma(b_i); Q2 reorders
    to (Prym columns | sigma columns); Q3 turns the sigma columns into
    a_i + sigma(a_i) and b_i + sigma(b_i), at index 2^(2 g0).
    """
    p = g0 + n - 1
    g = p + g0
    size = 2 * g
    q1 = np.eye(size, dtype=np.int64)
    for offset in (0, g):
        for i in range(g0):
            q1[offset + p + i, offset + i] = -1
    order = (
        list(range(0, g0))
        + list(range(g0, p))
        + list(range(g, g + g0))
        + list(range(g + g0, g + p))
        + list(range(p, g))
        + list(range(g + p, size))
    )
    q2 = q1[:, order]
    widen = np.eye(size, dtype=np.int64)
    for i in range(g0):
        widen[2 * p + i, 2 * p + i] = 2
        widen[i, 2 * p + i] = 1
        widen[2 * p + g0 + i, 2 * p + g0 + i] = 2
        widen[p + i, 2 * p + g0 + i] = 1
    q3 = q2 @ widen
    return q1, q2, q3


@dataclass
class PrymSplit:
    """Delta for Jac(C0), Gamma and Gamma* for the Prym variety and its dual."""

    delta: np.ndarray
    gamma: np.ndarray
    gamma_star: np.ndarray
    omega: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    omega3: np.ndarray
    block_residual: float
    g0: int
    n: int

    @property
    def genus(self) -> int:
        return 2 * self.g0 + self.n - 1

    @property
    def prym_dimension(self) -> int:
        return self.g0 + self.n - 1

    def to_json(self) -> dict[str, Any]:
        return {
            "Delta": _complex_json(self.delta) if self.delta.size else [],
            "Gamma": _complex_json(self.gamma),
            "GammaStar": _complex_json(self.gamma_star),
            "block_residual": self.block_residual,
            "dims": {"g": self.genus, "g0": self.g0, "prym": self.prym_dimension},
        }


def block_residuals(omega: np.ndarray, g0: int, n: int) -> dict[str, float]:
    """Residuals of C = -A, F = -D, H = O, I = G, K = O, L = J."""
    p = g0 + n - 1
    g = p + g0
    odd, even = omega[:p], omega[p:]
    a, c = odd[:, :g0], odd[:, p:g]
    d, f = odd[:, g : g + g0], odd[:, g + p :]
    gg, h, i = even[:, :g0], even[:, g0:p], even[:, p:g]
    j, k, l = even[:, g : g + g0], even[:, g + g0 : g + p], even[:, g + p :]
    scale = max(1.0, float(np.max(np.abs(omega))))

    def size(block: np.ndarray) -> float:
        return float(np.max(np.abs(block), initial=0.0)) / scale

    return {
        "C+A": size(c + a),
        "F+D": size(f + d),
        "H": size(h),
        "I-G": size(i - gg),
        "K": size(k),
        "L-J": size(l - j),
    }


def split_periods(adapted: AdaptedPeriods | np.ndarray, g0: int, n: int, tol: float = 1e-8) -> PrymSplit:
    """Read Delta = (G J), Gamma = (2A B 2D E), Gamma* = (A B D E) off the adapted blocks."""
    omega = adapted.omega if isinstance(adapted, AdaptedPeriods) else np.asarray(adapted)
    p = g0 + n - 1
    g = p + g0
    if omega.shape != (g, 2 * g):
        raise SplitError(f"adapted period matrix has shape {omega.shape}, expected {(g, 2 * g)}")
    residuals = block_residuals(omega, g0, n)
    worst = max(residuals.values())
    if worst > tol:
        bad = ", ".join(f"{k}={v:.2e}" for k, v in residuals.items() if v > tol)
        raise SplitError(f"adapted period matrix fails its block identities: {bad}")

    odd, even = omega[:p], omega[p:]
    a, b = odd[:, :g0], odd[:, g0:p]
    d, e = odd[:, g : g + g0], odd[:, g + g0 : g + p]
    delta = np.hstack([even[:, :g0], even[:, g : g + g0]])
    gamma = np.hstack([2 * a, b, 2 * d, e])
    gamma_star = np.hstack([a, b, d, e])

    q1, q2, q3 = column_operations(g0, n)
    omega3 = omega @ q3
    expected = np.zeros_like(omega3)
    expected[:p, : 2 * p] = gamma
    expected[p:, 2 * p :] = 2 * delta
    if np.max(np.abs(omega3 - expected), initial=0.0) > tol * max(1.0, float(np.max(np.abs(omega)))):
        raise SplitError("column reduction does not produce the block diagonal form")
    return PrymSplit(delta, gamma, gamma_star, omega, omega @ q1, omega @ q2, omega3, worst, g0, n)


def prym_polarization(g0: int, n: int, *, dual: bool = False) -> tuple[int, ...]:
    """Intersection numbers on the Prym lattice columns in Gamma order.

    (a_i - sigma a_i).(b_i - sigma b_i) = 2 and the anti-invariant pairs meet
    once; the dual lattice of Gamma* swaps the roles.
    """
    if dual:
        return (1,) * g0 + (2,) * (n - 1)
    return (2,) * g0 + (1,) * (n - 1)


@dataclass
class CanonicalForm:
    """(Delta_delta, Z) with Z = Delta_delta U^-1 V."""

    delta_delta: tuple[int, ...]
    z: np.ndarray
    symmetry_residual: float
    min_imaginary_eigenvalue: float
    dual: bool = False

    @property
    def polarization_type(self) -> tuple[int, ...]:
        return self.delta_delta

    def to_json(self) -> dict[str, Any]:
        return {
            "Delta_delta": list(self.delta_delta),
            "Z": _complex_json(self.z),
            "symmetry_residual": self.symmetry_residual,
            "min_imaginary_eigenvalue": self.min_imaginary_eigenvalue,
            "dual": self.dual,
        }


def canonical_form(
    gamma: np.ndarray, g0: int, n: int, *, dual: bool = False, tol: float = 1e-8
) -> CanonicalForm:
    """Normalize Gamma = (U V) with the Prym intersection numbers sorted ascending."""
    p = g0 + n - 1
    if gamma.shape != (p, 2 * p):
        raise SplitError(f"Gamma has shape {gamma.shape}, expected {(p, 2 * p)}")
    numbers = np.asarray(prym_polarization(g0, n, dual=dual))
    order = np.argsort(numbers, kind="stable")
    u = gamma[:, :p][:, order]
    v = gamma[:, p:][:, order]
    if np.linalg.cond(u) > 1e12:
        raise SplitError("Gamma is not of full rank")
    diag = numbers[order]
    z = diag[:, None] * np.linalg.solve(u, v)
    residual = float(np.max(np.abs(z - z.T))) / max(1.0, float(np.max(np.abs(z))))
    if residual > tol:
        raise SplitError(f"normalized Prym matrix is not symmetric ({residual:.3g}); check the cycle pairing")
    imag = np.linalg.eigvalsh((z.imag + z.imag.T) / 2)
    if imag.min() <= 0:
        raise SplitError(f"Im Z is not positive definite (eigenvalues {imag})")
    return CanonicalForm(tuple(int(x) for x in diag), z, residual, float(imag.min()), dual)


def lattice_intersection_count(
    gamma: np.ndarray, delta: np.ndarray, omega: np.ndarray, g0: int, tol: float = 1e-4
) -> int:
    """|L_Omega / L_Omega3|: points where the Prym torus meets the image of Jac(C0).

    Omega3 = [[Gamma, 0], [0, 2 Delta]] is expressed in the columns of Omega
    by a real solve; the index comes from elementary divisors.
    """
    p = gamma.shape[0]
    omega3 = np.zeros_like(omega)
    omega3[:p, : 2 * p] = gamma
    if g0:
        omega3[p:, 2 * p :] = 2 * delta
    coords = np.linalg.solve(_real_stack(omega), _real_stack(omega3))
    try:
        change, _ = round_integer_matrix(coords, tol)
    except ValueError as exc:
        raise SplitError(f"Omega3 is not in the period lattice: {exc}") from exc
    count = lattice_index(change)
    if count == 0:
        raise SplitError("the sub-tori do not meet in finitely many points")
    return count


# ---------------------------------------------------------------------------
# Polarization arithmetic
# ---------------------------------------------------------------------------


def multiple_divisor_genus(genus: int, k: int) -> int:
    """Genus of kD for a curve D of the given genus on an abelian surface."""
    if k < 1:
        raise PolarizationError("multiple must be positive")
    return k * k * (genus - 1) + 1


def scale_polarization(kind: Sequence[int], k: int) -> tuple[int, ...]:
    return tuple(k * d for d in kind)


def embedding_space_dimension(kind: Sequence[int]) -> int:
    """Projective dimension of the linear system: product of the delta_j minus one."""
    return int(np.prod(kind)) - 1


def polarization_from_divisor(genus: int, base: Sequence[int] | None = None) -> tuple[int, int]:
    """(delta_1, delta_2) with delta_1 delta_2 = genus - 1 for a curve on an abelian surface.

    With ``base`` the answer is the multiple of it with that product;
    otherwise delta_1 is the largest value dividing delta_2.
    """
    if genus <= 1:
        raise PolarizationError(f"a divisor of genus {genus} defines no polarization")
    product_ = genus - 1
    if base is not None:
        d1, d2 = base
        for k in range(1, product_ + 1):
            if k * k * d1 * d2 == product_:
                return k * d1, k * d2
            if k * k * d1 * d2 > product_:
                break
        raise PolarizationError(f"genus {genus} is not a multiple of type {tuple(base)}")
    best = (1, product_)
    for d1 in range(1, int(np.sqrt(product_)) + 1):
        if product_ % d1 == 0 and (product_ // d1) % d1 == 0:
            best = (d1, product_ // d1)
    return best


# ---------------------------------------------------------------------------
# Cross-checks
# ---------------------------------------------------------------------------


def elliptic_cross_check(split: PrymSplit, quotient: HyperellipticModel, tol: float = 1e-8) -> dict[str, Any]:
    """Compare the period ratio of Delta with tau of the quotient curve up to SL(2, Z)."""
    if split.g0 != 1:
        raise SplitError(f"elliptic cross-check needs g0 = 1, got {split.g0}")
    g_period, j_period = split.delta[0, 0], split.delta[0, 1]
    tau_delta = complex(j_period / g_period)
    if tau_delta.imag < 0:
        tau_delta = -tau_delta
    tau_quotient = elliptic_tau(quotient)
    equivalent = sl2z_equivalent(tau_delta, tau_quotient, tol)
    return {
        "tau_delta": [tau_delta.real, tau_delta.imag],
        "tau_quotient": [tau_quotient.real, tau_quotient.imag],
        "equivalent": equivalent,
    }
