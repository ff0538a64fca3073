"""Integer lattice tools: Smith decompositions, integer kernels and symplectic bases."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from itertools import product

import numpy as np
import sympy
from sympy.matrices.normalforms import invariant_factors, smith_normal_decomp
from sympy.polys.domains import ZZ

from aci_workbench.errors import DimensionError, NormalFormError

logger = logging.getLogger(__name__)

IntMatrix = np.ndarray


def standard_symplectic(g: int) -> IntMatrix:
    """J0 = [[0, I_g], [-I_g, 0]]."""
    eye = np.eye(g, dtype=np.int64)
    zero = np.zeros((g, g), dtype=np.int64)
    return np.block([[zero, eye], [-eye, zero]])


def as_int_matrix(matrix: Sequence[Sequence[int]] | np.ndarray) -> IntMatrix:
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr.real if np.iscomplexobj(arr) else arr)
        if not np.array_equal(rounded, arr):
            raise ValueError("matrix has non-integer entries")
        arr = rounded
    return arr.astype(np.int64)


def round_integer_matrix(matrix: np.ndarray, tol: float) -> tuple[IntMatrix, float]:
    """Round a numeric matrix to integers; return it with the largest rounding error."""
    matrix = np.asarray(matrix)
    real = matrix.real if np.iscomplexobj(matrix) else matrix
    rounded = np.rint(real)
    error = float(np.max(np.abs(matrix - rounded), initial=0.0))
    if error > tol:
        raise ValueError(f"matrix is not integral within {tol:g} (max deviation {error:.3g})")
    return rounded.astype(np.int64), error


def _sympy(matrix: IntMatrix) -> sympy.Matrix:
    return sympy.Matrix(matrix.tolist())


def _numpy(matrix: sympy.Matrix) -> IntMatrix:
    rows, cols = matrix.shape
    return np.array([[int(matrix[i, j]) for j in range(cols)] for i in range(rows)], dtype=np.int64).reshape(
        rows, cols
    )


def smith_decomposition(matrix: IntMatrix) -> tuple[IntMatrix, IntMatrix, IntMatrix]:
    """(D, S, T) with D = S @ matrix @ T diagonal and S, T unimodular."""
    matrix = as_int_matrix(matrix)
    d, s, t = smith_normal_decomp(_sympy(matrix), domain=ZZ)
    return _numpy(d), _numpy(s), _numpy(t)


def elementary_divisors(matrix: IntMatrix) -> tuple[int, ...]:
    """Nonzero invariant factors, positive and in divisibility order."""
    matrix = as_int_matrix(matrix)
    if 0 in matrix.shape:
        return ()
    factors = invariant_factors(_sympy(matrix), domain=ZZ)
    return tuple(sorted(abs(int(f)) for f in factors if int(f) != 0))


def integer_rank(matrix: IntMatrix) -> int:
    return len(elementary_divisors(matrix))


def integer_kernel_basis(matrix: IntMatrix) -> IntMatrix:
    """A Z-basis of {x in Z^n : matrix @ x = 0}, as the columns of an n x k matrix."""
    matrix = as_int_matrix(matrix)
    rows, cols = matrix.shape
    if rows == 0:
        return np.eye(cols, dtype=np.int64)
    d, _, t = smith_decomposition(matrix)
    keep = [j for j in range(cols) if j >= rows or d[j, j] == 0]
    basis = t[:, keep]
    if basis.size and np.any(matrix @ basis):
        raise ArithmeticError("Smith decomposition returned a non-kernel vector")
    return basis.reshape(cols, len(keep))


def solve_integer(matrix: IntMatrix, rhs: Sequence[int] | np.ndarray) -> np.ndarray | None:
    """Some integer x with matrix @ x = rhs, or None when no integer solution exists."""
    matrix = as_int_matrix(matrix)
    rhs = np.asarray(rhs, dtype=np.int64).reshape(-1)
    rows, cols = matrix.shape
    if rhs.shape[0] != rows:
        raise DimensionError(f"right-hand side has {rhs.shape[0]} entries, expected {rows}")
    d, s, t = smith_decomposition(matrix)
    target = s @ rhs
    y = np.zeros(cols, dtype=np.int64)
    for i in range(rows):
        pivot = d[i, i] if i < cols else 0
        if pivot == 0:
            if target[i] != 0:
                return None
            continue
        quotient, remainder = divmod(int(target[i]), int(pivot))
        if remainder:
            return None
        y[i] = quotient
    x = t @ y
    if np.any(matrix @ x != rhs):
        raise ArithmeticError("integer solve failed its own check")
    return x


def lattice_index(matrix: IntMatrix) -> int:
    """|det| of a square integer matrix via its elementary divisors; 0 when singular."""
    matrix = as_int_matrix(matrix)
    n, m = matrix.shape
    if n != m:
        raise DimensionError("index of a non-square matrix is undefined")
    divisors = elementary_divisors(matrix)
    if len(divisors) < n:
        return 0
    return int(np.prod(divisors, dtype=object))


def coset_count(matrix: IntMatrix, box: int = 4) -> int:
    """Brute-force |Z^n / matrix Z^n| by counting residues of a box of integer vectors.

    Only meant for small dimensions; used as an independent check of lattice_index.
    """
    matrix = as_int_matrix(matrix)
    n = matrix.shape[0]
    det = round(abs(np.linalg.det(matrix.astype(float))))
    if det == 0:
        raise ValueError("singular matrix has infinitely many cosets")
    inverse = np.linalg.inv(matrix.astype(float))
    seen: set[tuple[int, ...]] = set()
    for vec in product(range(-box, box + 1), repeat=n):
        coords = inverse @ np.asarray(vec, dtype=float)
        frac = coords - np.floor(coords + 1e-9)
        seen.add(tuple(int(round(f * det)) % det for f in frac))
    return len(seen)


def is_symplectic(matrix: IntMatrix, form: IntMatrix | None = None) -> bool:
    """matrix^T @ form @ matrix == form, with form defaulting to J0."""
    matrix = as_int_matrix(matrix)
    if form is None:
        form = standard_symplectic(matrix.shape[0] // 2)
    return bool(np.array_equal(matrix.T @ form @ matrix, form))


def symplectic_reduction(gram: IntMatrix) -> IntMatrix:
    """Columns (a_1..a_k, b_1..b_k) of a basis in which the skew form ``gram`` is J0.

    ``gram`` must be skew and unimodular. Hyperbolic pairs are split off one
    at a time: pick a basis vector a, solve an integer b with <a, b> = 1, and
    continue on the integer kernel of <a, .> and <b, .>.
    """
    gram = as_int_matrix(gram)
    r = gram.shape[0]
    if gram.shape != (r, r) or not np.array_equal(gram, -gram.T):
        raise NormalFormError("intersection matrix must be square and skew-symmetric")
    if r % 2:
        raise NormalFormError(f"odd rank {r} lattice has no symplectic basis")
    basis = np.eye(r, dtype=np.int64)
    a_vectors: list[np.ndarray] = []
    b_vectors: list[np.ndarray] = []
    while basis.shape[1]:
        local = basis.T @ gram @ basis
        nonzero = [i for i in range(local.shape[0]) if np.any(local[i])]
        if not nonzero:
            raise NormalFormError("degenerate intersection form", elementary_divisors(gram))
        i = nonzero[0]
        y = solve_integer(local[i : i + 1], [1])
        if y is None:
            raise NormalFormError(
                "intersection form is not unimodular on the remaining lattice", elementary_divisors(local)
            )
        e = np.zeros(local.shape[0], dtype=np.int64)
        e[i] = 1
        a_vectors.append(basis @ e)
        b_vectors.append(basis @ y)
        constraints = np.vstack([local[i], y @ local])
        basis = basis @ integer_kernel_basis(constraints)
    result = np.column_stack(a_vectors + b_vectors) if a_vectors else np.zeros((0, 0), dtype=np.int64)
    if not np.array_equal(result.T @ gram @ result, standard_symplectic(r // 2)):
        raise NormalFormError("symplectic reduction failed its check", elementary_divisors(gram))
    logger.debug("Symplectic reduction of a rank %d lattice", r)
    return result
