"""Tests for the prym module."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from aci_workbench.algebra import MultiPoly
from aci_workbench.errors import InvolutionError, PolarizationError, SplitError
from aci_workbench.lattice import coset_count, standard_symplectic
from aci_workbench.prym import (
    InvolutionData,
    PrymSplit,
    adapt_basis,
    canonical_form,
    check_involution,
    column_operations,
    embedding_space_dimension,
    involution_on_homology,
    lattice_intersection_count,
    multiple_divisor_genus,
    normal_form,
    normal_form_basis,
    polarization_from_divisor,
    prym_polarization,
    scale_polarization,
    split_periods,
)
from aci_workbench.riemann import DifferentialBasis, HyperellipticModel, PeriodMatrix, period_matrix


def synthetic_adapted(g0: int, n: int, seed: int = 0) -> np.ndarray:
    """A random period matrix with the block pattern of an adapted basis."""
    rng = np.random.default_rng(seed)
    p = g0 + n - 1

    def block(rows: int, cols: int) -> np.ndarray:
        return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))

    a, b, d, e = block(p, g0), block(p, n - 1), block(p, g0), block(p, n - 1)
    g, j = block(g0, g0), block(g0, g0)
    zero = np.zeros((g0, n - 1))
    odd = np.hstack([a, b, -a, d, e, -d])
    even = np.hstack([g, zero, g, j, zero, j])
    return np.vstack([odd, even])


def random_symplectic(g: int, rng: np.random.Generator, factors: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """An integer P with P^T J0 P = J0 and its inverse, from random symmetric shears."""
    eye = np.eye(g, dtype=np.int64)
    zero = np.zeros((g, g), dtype=np.int64)
    p = p_inv = np.eye(2 * g, dtype=np.int64)
    for _ in range(factors):
        s = np.triu(rng.integers(-1, 2, size=(g, g)))
        s = s + np.triu(s, 1).T
        if rng.integers(2):
            step, inverse = np.block([[eye, s], [zero, eye]]), np.block([[eye, -s], [zero, eye]])
        else:
            step, inverse = np.block([[eye, zero], [s, eye]]), np.block([[eye, zero], [-s, eye]])
        p, p_inv = p @ step, inverse @ p_inv
    return p, p_inv


@pytest.fixture(scope="module")
def sextic_periods() -> PeriodMatrix:
    model = HyperellipticModel.from_polynomial(MultiPoly.from_expr("x**6 - 1", ("x",)))
    periods, _ = period_matrix(model)
    return periods


@pytest.fixture(scope="module")
def sextic_involution(sextic_periods: PeriodMatrix) -> InvolutionData:
    signs = DifferentialBasis.standard(2).involution_signs()
    return involution_on_homology(sextic_periods, signs, variable_action={"x": -1})


@pytest.fixture(scope="module")
def sextic_split(sextic_involution: InvolutionData, sextic_periods: PeriodMatrix) -> PrymSplit:
    adapted = adapt_basis(sextic_involution, sextic_periods)
    return split_periods(adapted, sextic_involution.g0, sextic_involution.n)


class TestInvolution:
    """Tests for the action of x -> -x on homology."""

    def test_signs_and_dimensions(self, sextic_involution: InvolutionData) -> None:
        """dx/y is odd, x dx/y is even: g0 = 1, n = 1."""
        assert sextic_involution.signs.tolist() == [-1, 1]
        assert sextic_involution.g0 == 1
        assert sextic_involution.n == 1
        assert sextic_involution.prym_dimension == 1

    def test_matrix_is_symplectic_involution(self, sextic_involution: InvolutionData) -> None:
        """M^2 = I and M preserves the intersection form."""
        m = sextic_involution.matrix
        assert np.array_equal(m @ m, np.eye(4, dtype=np.int64))
        assert np.array_equal(m.T @ sextic_involution.intersection @ m, sextic_involution.intersection)
        assert sextic_involution.residual < 1e-8

    def test_bad_signs(self, sextic_periods: PeriodMatrix) -> None:
        """One sign of +-1 per differential."""
        with pytest.raises(InvolutionError):
            involution_on_homology(sextic_periods, [1, 1, -1])
        with pytest.raises(InvolutionError):
            involution_on_homology(sextic_periods, [2, 1])

    def test_check_involution(self) -> None:
        """2I is no involution; a reflection of one cycle breaks the form."""
        j = standard_symplectic(1)
        with pytest.raises(InvolutionError, match="M\\^2"):
            check_involution(2 * np.eye(2, dtype=np.int64), j)
        with pytest.raises(InvolutionError, match="intersection form"):
            check_involution(np.array([[1, 0], [0, -1]]), j)

    def test_json(self, sextic_involution: InvolutionData) -> None:
        """The variable action is recorded."""
        data = sextic_involution.to_json()
        assert data["variable_action"] == {"x": -1}
        assert data["S"] == [-1, 1]


class TestInvolutionLaws:
    """Involution laws under random symplectic changes of homology basis."""

    @pytest.mark.parametrize("seed", range(25))
    def test_conjugated_periods(
        self, sextic_periods: PeriodMatrix, sextic_involution: InvolutionData, seed: int
    ) -> None:
        """For Omega P: M^2 = I, M^T J0 M = J0 and S Omega = Omega M, with M = P^-1 M0 P."""
        j0 = standard_symplectic(2)
        p, p_inv = random_symplectic(2, np.random.default_rng(seed))
        assert np.array_equal(p.T @ j0 @ p, j0)
        periods = replace(sextic_periods, omega=sextic_periods.omega @ p)
        involution = involution_on_homology(periods, sextic_involution.signs, tol=1e-3)
        m = involution.matrix
        assert np.array_equal(m @ m, np.eye(4, dtype=np.int64))
        assert np.array_equal(m.T @ j0 @ m, j0)
        omega = periods.omega
        scale = max(1.0, float(np.abs(omega).max()))
        np.testing.assert_allclose(involution.signs[:, None] * omega, omega @ m, atol=1e-8 * scale)
        assert np.array_equal(m, p_inv @ sextic_involution.matrix @ p)

    @pytest.mark.parametrize("seed", range(25))
    def test_conjugated_normal_form(self, seed: int) -> None:
        """A conjugate of the normal form is a symplectic involution brought back by a symplectic T."""
        j0 = standard_symplectic(3)
        p, p_inv = random_symplectic(3, np.random.default_rng(seed))
        target = normal_form(1, 2)
        matrix = p_inv @ target @ p
        assert np.array_equal(matrix @ matrix, np.eye(6, dtype=np.int64))
        assert np.array_equal(matrix.T @ j0 @ matrix, j0)
        check_involution(matrix, j0, 1)
        t = normal_form_basis(matrix, j0, 1, 2)
        assert np.array_equal(t.T @ j0 @ t, j0)
        assert np.array_equal(matrix @ t, t @ target)


class TestNormalForm:
    """Tests for bringing M to normal form."""

    def test_normal_form_shape(self) -> None:
        """g0 swaps and n - 1 reflections on each half."""
        target = normal_form(1, 2)
        assert target.shape == (6, 6)
        assert target[2, 0] == target[0, 2] == 1
        assert target[1, 1] == -1
        assert np.array_equal(target @ target, np.eye(6, dtype=np.int64))

    def test_identity_when_already_normal(self) -> None:
        """Nothing to do for M in normal form."""
        t = normal_form_basis(normal_form(1, 2), standard_symplectic(3), 1, 2)
        assert np.array_equal(t, np.eye(6, dtype=np.int64))

    def test_recovers_conjugated_form(self) -> None:
        """A symplectic change of basis is undone."""
        s = np.array([[1, 0, 0], [0, 0, 1], [0, 1, 0]])
        eye = np.eye(3, dtype=np.int64)
        p = np.block([[eye, s], [np.zeros((3, 3), dtype=np.int64), eye]])
        p_inv = np.block([[eye, -s], [np.zeros((3, 3), dtype=np.int64), eye]])
        target = normal_form(1, 2)
        matrix = p @ target @ p_inv
        j = standard_symplectic(3)
        t = normal_form_basis(matrix, j, 1, 2)
        assert np.array_equal(t.T @ j @ t, j)
        assert np.array_equal(matrix @ t, t @ target)

    def test_sextic_adapted_basis(self, sextic_split: PrymSplit) -> None:
        """The adapted period matrix passes every block identity."""
        assert sextic_split.block_residual < 1e-8
        assert sextic_split.gamma.shape == (1, 2)
        assert sextic_split.delta.shape == (1, 2)


class TestSplit:
    """Tests for the Jacobian / Prym split."""

    def test_synthetic_split(self) -> None:
        """Gamma = (2A B 2D E) and Gamma* = (A B D E)."""
        omega = synthetic_adapted(1, 2)
        split = split_periods(omega, 1, 2)
        assert split.genus == 3
        assert split.prym_dimension == 2
        assert np.allclose(split.gamma[:, :1], 2 * omega[:2, :1])
        assert np.allclose(split.gamma_star[:, :1], omega[:2, :1])
        assert np.allclose(split.delta, np.hstack([omega[2:, :1], omega[2:, 3:4]]))

    def test_block_identity_failure(self) -> None:
        """Breaking C = -A is reported."""
        omega = synthetic_adapted(1, 2)
        omega[0, 2] += 1.0
        with pytest.raises(SplitError, match="C\\+A"):
            split_periods(omega, 1, 2)

    def test_shape_mismatch(self) -> None:
        """The adapted matrix must be g x 2g."""
        with pytest.raises(SplitError):
            split_periods(np.zeros((2, 4), dtype=complex), 1, 2)

    @pytest.mark.parametrize(("g0", "n", "count"), [(1, 1, 4), (1, 2, 4), (2, 1, 16), (0, 3, 1)])
    def test_lattice_intersection_count(self, g0: int, n: int, count: int) -> None:
        """The sub-tori meet in 4^g0 points."""
        split = split_periods(synthetic_adapted(g0, n), g0, n)
        assert lattice_intersection_count(split.gamma, split.delta, split.omega, g0) == count
        assert coset_count(column_operations(g0, n)[2], box=1) == count

    def test_sextic_intersection_count(self, sextic_split: PrymSplit) -> None:
        """Four points for a genus 2 curve over an elliptic curve."""
        assert lattice_intersection_count(sextic_split.gamma, sextic_split.delta, sextic_split.omega, 1) == 4


class TestCanonicalForm:
    """Tests for the normalized Prym period matrix."""

    @pytest.fixture
    def symmetric(self) -> np.ndarray:
        return np.array([[1.0 + 2.0j, 0.3 + 0.1j], [0.3 + 0.1j, -0.5 + 1.5j]])

    def gamma_for(self, z: np.ndarray, g0: int, n: int, dual: bool = False) -> np.ndarray:
        """Gamma = (U V) whose normal form is z."""
        numbers = np.asarray(prym_polarization(g0, n, dual=dual))
        order = np.argsort(numbers, kind="stable")
        u = np.array([[1.0 + 0.5j, 0.2], [-0.4j, 2.0 - 0.1j]])
        v = u @ (z / numbers[order][:, None])
        gamma = np.zeros((2, 4), dtype=complex)
        gamma[:, order] = u
        gamma[:, 2 + order] = v
        return gamma

    def test_type_and_matrix(self, symmetric: np.ndarray) -> None:
        """Type (1, 2) for one anti-invariant pair and one swap."""
        form = canonical_form(self.gamma_for(symmetric, 1, 2), 1, 2)
        assert form.polarization_type == (1, 2)
        assert np.allclose(form.z, symmetric)
        assert form.min_imaginary_eigenvalue > 0

    def test_dual(self, symmetric: np.ndarray) -> None:
        """The dual lattice carries the swapped numbers."""
        assert prym_polarization(1, 2, dual=True) == (1, 2)
        assert prym_polarization(1, 2) == (2, 1)
        form = canonical_form(self.gamma_for(symmetric, 1, 2, dual=True), 1, 2, dual=True)
        assert form.dual
        assert form.to_json()["Delta_delta"] == [1, 2]

    def test_asymmetric(self) -> None:
        """A non-symmetric result means the cycle pairing is wrong."""
        z = np.array([[1.0j, 1.0], [0.0, 1.0j]])
        with pytest.raises(SplitError, match="not symmetric"):
            canonical_form(self.gamma_for(z, 1, 2), 1, 2)

    def test_not_positive(self, symmetric: np.ndarray) -> None:
        """Im Z must be positive definite."""
        with pytest.raises(SplitError, match="positive definite"):
            canonical_form(self.gamma_for(symmetric.conj(), 1, 2), 1, 2)

    def test_sextic_prym(self, sextic_split: PrymSplit) -> None:
        """The genus 2 Prym is an elliptic curve of type (2)."""
        form = canonical_form(sextic_split.gamma, 1, 1)
        assert form.polarization_type == (2,)
        assert form.min_imaginary_eigenvalue > 0


class TestPolarization:
    """Tests for polarization arithmetic."""

    @pytest.mark.parametrize(("genus", "expected"), [(2, (1, 1)), (3, (1, 2)), (5, (2, 2)), (9, (2, 4))])
    def test_from_divisor(self, genus: int, expected: tuple[int, int]) -> None:
        """delta_1 delta_2 = g - 1 with delta_1 | delta_2."""
        assert polarization_from_divisor(genus) == expected

    def test_from_divisor_with_base(self) -> None:
        """A genus 9 double of a (1, 2) curve has type (2, 4)."""
        assert polarization_from_divisor(9, (1, 2)) == (2, 4)
        with pytest.raises(PolarizationError):
            polarization_from_divisor(9, (1, 3))

    def test_low_genus(self) -> None:
        """Elliptic and rational curves give no polarization."""
        with pytest.raises(PolarizationError):
            polarization_from_divisor(1)

    def test_multiples(self) -> None:
        """2D has genus 9 and type (2, 4) when D has genus 3."""
        assert multiple_divisor_genus(3, 2) == 9
        assert scale_polarization((1, 2), 2) == (2, 4)
        assert embedding_space_dimension((2, 4)) == 7
        with pytest.raises(PolarizationError):
            multiple_divisor_genus(3, 0)
