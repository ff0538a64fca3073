"""Tests for the lattice module."""

from __future__ import annotations

import numpy as np
import pytest

from aci_workbench.errors import DimensionError, NormalFormError
from aci_workbench.lattice import (
    as_int_matrix,
    coset_count,
    elementary_divisors,
    integer_kernel_basis,
    integer_rank,
    is_symplectic,
    lattice_index,
    round_integer_matrix,
    smith_decomposition,
    solve_integer,
    standard_symplectic,
    symplectic_reduction,
)


class TestIntegerMatrices:
    """Tests for conversion and rounding of integer matrices."""

    def test_integral_floats_accepted(self) -> None:
        """Floats with integer values convert."""
        assert as_int_matrix([[1.0, -2.0]]).dtype == np.int64

    def test_fractional_entries_rejected(self) -> None:
        """Non-integer entries raise."""
        with pytest.raises(ValueError):
            as_int_matrix([[0.5]])

    def test_vector_rejected(self) -> None:
        """A one-dimensional array is not a matrix."""
        with pytest.raises(DimensionError):
            as_int_matrix([1, 2])

    def test_round_within_tolerance(self) -> None:
        """Near-integers round and report their deviation."""
        rounded, error = round_integer_matrix(np.array([[1.0 + 1e-9, -3.0 + 1e-9j]]), tol=1e-6)
        assert rounded.tolist() == [[1, -3]]
        assert error < 1e-8

    def test_round_outside_tolerance(self) -> None:
        """Values far from integers raise."""
        with pytest.raises(ValueError, match="not integral"):
            round_integer_matrix(np.array([[0.4]]), tol=1e-6)


class TestSmith:
    """Tests for Smith decompositions and their consumers."""

    def test_decomposition_diagonalises(self) -> None:
        """D = S M T with unimodular S and T."""
        m = np.array([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])
        d, s, t = smith_decomposition(m)
        assert np.array_equal(s @ m @ t, d)
        assert abs(round(np.linalg.det(s))) == 1
        assert abs(round(np.linalg.det(t))) == 1

    def test_elementary_divisors(self) -> None:
        """[[2, 4], [6, 8]] has divisors 2 and 4."""
        assert elementary_divisors([[2, 4], [6, 8]]) == (2, 4)

    def test_rank(self) -> None:
        """A rank-one matrix has one divisor."""
        assert integer_rank([[1, 2], [2, 4]]) == 1

    def test_kernel_basis(self) -> None:
        """Kernel of x + 2y + 3z is a rank-two lattice."""
        m = np.array([[1, 2, 3]])
        basis = integer_kernel_basis(m)
        assert basis.shape == (3, 2)
        assert not np.any(m @ basis)
        assert elementary_divisors(basis) == (1, 1)

    def test_solve_integer(self) -> None:
        """2x + 4y = 6 has integer solutions."""
        x = solve_integer([[2, 4]], [6])
        assert x is not None
        assert 2 * x[0] + 4 * x[1] == 6

    def test_solve_integer_none(self) -> None:
        """2x + 4y = 3 has none."""
        assert solve_integer([[2, 4]], [3]) is None

    def test_solve_integer_shape(self) -> None:
        """The right-hand side must match the row count."""
        with pytest.raises(DimensionError):
            solve_integer([[1, 0]], [1, 2])


class TestIndex:
    """Tests for sublattice indices."""

    @pytest.mark.parametrize(
        "matrix",
        [[[2, 0], [0, 2]], [[1, 1], [-1, 1]], [[3, 1, 0], [0, 1, 0], [1, 0, 2]]],
    )
    def test_index_matches_brute_force(self, matrix: list[list[int]]) -> None:
        """The Smith index agrees with counting cosets."""
        assert lattice_index(matrix) == coset_count(matrix)

    def test_singular_index(self) -> None:
        """A singular matrix has index 0."""
        assert lattice_index([[1, 2], [2, 4]]) == 0

    def test_non_square_index(self) -> None:
        """Only square matrices have an index."""
        with pytest.raises(DimensionError):
            lattice_index([[1, 0, 0]])


class TestSymplectic:
    """Tests for symplectic forms and reductions."""

    def test_standard_form(self) -> None:
        """J0 for g = 1."""
        assert standard_symplectic(1).tolist() == [[0, 1], [-1, 0]]

    def test_sl2_is_symplectic(self) -> None:
        """Every unimodular 2x2 matrix preserves J0."""
        assert is_symplectic([[1, 1], [0, 1]])
        assert not is_symplectic([[2, 0], [0, 1]])

    def test_reduction_of_interleaved_basis(self) -> None:
        """Cycles ordered (a1, b1, a2, b2) are reordered to J0."""
        gram = np.array([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]])
        basis = symplectic_reduction(gram)
        assert np.array_equal(basis.T @ gram @ basis, standard_symplectic(2))
        assert abs(round(np.linalg.det(basis))) == 1

    def test_reduction_of_mixed_form(self) -> None:
        """A unimodular skew form with off-diagonal coupling."""
        gram = np.array([[0, 1, 0, 0], [-1, 0, 1, 0], [0, -1, 0, 1], [0, 0, -1, 0]])
        basis = symplectic_reduction(gram)
        assert np.array_equal(basis.T @ gram @ basis, standard_symplectic(2))

    def test_non_unimodular_form(self) -> None:
        """<a, b> = 2 has no symplectic basis."""
        with pytest.raises(NormalFormError):
            symplectic_reduction([[0, 2], [-2, 0]])

    def test_odd_rank(self) -> None:
        """Odd rank lattices are refused."""
        with pytest.raises(NormalFormError, match="odd rank"):
            symplectic_reduction(np.zeros((3, 3), dtype=int))

    def test_not_skew(self) -> None:
        """Symmetric forms are refused."""
        with pytest.raises(NormalFormError, match="skew"):
            symplectic_reduction([[0, 1], [1, 0]])
