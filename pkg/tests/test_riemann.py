"""Tests for the riemann module."""

from __future__ import annotations

import numpy as np
import pytest

from aci_workbench.algebra import MultiPoly
from aci_workbench.divisor import solve_for_square
from aci_workbench.errors import CycleConstructionError, PeriodMatrixError, SingularCurveError
from aci_workbench.lattice import standard_symplectic
from aci_workbench.riemann import (
    CoverData,
    DifferentialBasis,
    HyperellipticModel,
    adaptive_gauss_legendre,
    agm,
    branch_points,
    build_cycles,
    complete_elliptic_k,
    elliptic_tau,
    fundamental_domain,
    hurwitz_genus,
    nodal_union_genus,
    period_matrix,
    sl2z_equivalent,
    unramified_cover_genus,
)
from aci_workbench.systems import henon_heiles_curve


def model(expr: str) -> HyperellipticModel:
    return HyperellipticModel.from_polynomial(MultiPoly.from_expr(expr, ("x",)))


class TestGenusLedger:
    """Tests for genus bookkeeping of covers."""

    @pytest.mark.parametrize(("g0", "n", "genus"), [(1, 2, 3), (1, 8, 9), (0, 3, 2), (1, 1, 2)])
    def test_hurwitz(self, g0: int, n: int, genus: int) -> None:
        """g = 2 g0 + n - 1."""
        assert hurwitz_genus(g0, n) == genus

    def test_hurwitz_invalid(self) -> None:
        """A double cover needs at least one pair of branch points."""
        with pytest.raises(ValueError):
            hurwitz_genus(1, 0)

    def test_unramified(self) -> None:
        """A 4-sheeted unramified cover of a genus 3 curve has genus 9."""
        assert unramified_cover_genus(3, 4) == 9

    def test_nodal_union(self) -> None:
        """Two genus 3 curves meeting in 4 points have genus 9."""
        assert nodal_union_genus([3, 3], 4) == 9

    def test_nodal_union_disconnected(self) -> None:
        """Three components need at least two nodes."""
        with pytest.raises(ValueError):
            nodal_union_genus([1, 1, 1], 1)

    def test_cover_data(self) -> None:
        """Prym dimension g - g0."""
        cover = CoverData(1, 2)
        assert cover.genus == 3
        assert cover.branch_point_count == 4
        assert cover.prym_dimension == 2
        assert cover.to_json()["prym_dimension"] == 2


class TestBranchPoints:
    """Tests for root finding and hyperelliptic models."""

    def test_roots(self) -> None:
        """x^4 - 1 has the four fourth roots of unity."""
        roots = branch_points(MultiPoly.from_expr("x**4 - 1", ("x",)))
        assert sorted(np.round(roots, 12), key=lambda z: (z.real, z.imag)) == pytest.approx([-1, -1j, 1j, 1])

    def test_double_root(self) -> None:
        """x^2 (x - 1) has a double root at 0."""
        with pytest.raises(SingularCurveError):
            branch_points(MultiPoly.from_expr("x**3 - x**2", ("x",)))

    def test_constant(self) -> None:
        """A constant has no branch points."""
        with pytest.raises(SingularCurveError):
            branch_points(MultiPoly.constant(("x",), 3))

    def test_model_genus(self) -> None:
        """Degrees 5 and 6 give genus 2; odd degree branches at infinity."""
        assert model("x**5 - x").genus == 2
        assert model("x**5 - x").has_branch_at_infinity
        assert model("x**6 - 1").genus == 2
        assert not model("x**6 - 1").has_branch_at_infinity


class TestDifferentials:
    """Tests for differential bases."""

    def test_labels(self) -> None:
        """Labels read x^j dx/y."""
        basis = DifferentialBasis.from_exponents((2, 0, 1), "alpha", "beta")
        assert basis.labels == ("alpha^2 dalpha/beta", "dalpha/beta", "alpha dalpha/beta")

    def test_involution_signs(self) -> None:
        """Under x -> -x the even exponents change sign."""
        basis = DifferentialBasis.from_exponents((2, 0, 1))
        assert basis.involution_signs().tolist() == [-1, -1, 1]

    def test_check(self) -> None:
        """Repeated or too large exponents are not a basis."""
        with pytest.raises(PeriodMatrixError):
            DifferentialBasis.from_exponents((0, 0)).check(2)
        with pytest.raises(PeriodMatrixError):
            DifferentialBasis.from_exponents((0, 2)).check(2)


class TestCycles:
    """Tests for homology cycle construction."""

    def test_symplectic_intersection(self) -> None:
        """The built basis has intersection J0."""
        cycles = build_cycles(model("x**5 - x"))
        assert np.array_equal(cycles.intersection, standard_symplectic(2))
        assert cycles.labels == ("a1", "a2", "b1", "b2")

    def test_reversed_cycle(self) -> None:
        """Reversing a1 flips its intersection with b1."""
        cycles = build_cycles(model("x**5 - x")).reversed(0)
        assert cycles.intersection[0, 2] == -1
        assert cycles.labels[0] == "-a1"

    def test_genus_zero(self) -> None:
        """A conic has no cycles."""
        with pytest.raises(CycleConstructionError):
            build_cycles(model("x**2 - 1"))


class TestPeriods:
    """Tests for period matrices."""

    @pytest.fixture
    def elliptic(self) -> HyperellipticModel:
        return model("(1 - x**2) * (1 - x**2 / 4)")

    def test_quadrature(self) -> None:
        """Integral of sin over [0, pi] is 2."""
        value, error = adaptive_gauss_legendre(lambda t: np.sin(t)[:, None], 0.0, np.pi)
        assert value[0] == pytest.approx(2.0, abs=1e-13)
        assert error < 1e-12

    def test_elliptic_a_period(self, elliptic: HyperellipticModel) -> None:
        """The a-period of dx/y is 4 K(1/2)."""
        periods, _ = period_matrix(elliptic)
        expected = 4 * complete_elliptic_k(0.5).real
        assert abs(periods.a_periods[0, 0]) == pytest.approx(expected, rel=1e-10)

    def test_node_count_independent(self, elliptic: HyperellipticModel) -> None:
        """16 and 32 Gauss nodes agree."""
        coarse, _ = period_matrix(elliptic, nodes=16)
        fine, _ = period_matrix(elliptic, nodes=32)
        assert np.allclose(coarse.omega, fine.omega, rtol=1e-11, atol=1e-11)

    def test_genus_two_riemann_conditions(self) -> None:
        """Bilinear relations, symmetry and Im Z > 0 on y^2 = x^5 - x."""
        periods, _ = period_matrix(model("x**5 - x"))
        z = periods.riemann_matrix()
        assert periods.bilinear_residual() <= 1e-9
        assert np.allclose(z, z.T, atol=1e-9)
        assert np.linalg.eigvalsh(z.imag).min() > 0

    def test_henon_heiles_curve(self) -> None:
        """The genus 3 divisor curve satisfies the Riemann conditions."""
        polynomial = solve_for_square(henon_heiles_curve(), "beta")
        hyperelliptic = HyperellipticModel.from_polynomial(polynomial)
        basis = DifferentialBasis.from_exponents((2, 0, 1), "alpha", "beta")
        periods, cycles = period_matrix(hyperelliptic, basis)
        assert hyperelliptic.genus == 3
        assert periods.bilinear_residual() <= 1e-9
        assert np.linalg.eigvalsh(periods.riemann_matrix().imag).min() > 0
        assert periods.differential_labels == basis.labels
        assert np.array_equal(periods.intersection, cycles.intersection)

    def test_json(self, elliptic: HyperellipticModel) -> None:
        """Periods are stored as [re, im] pairs."""
        periods, _ = period_matrix(elliptic)
        data = periods.to_json()
        assert np.asarray(data["omega"]).shape == (1, 2, 2)
        assert len(data["cycles"]) == 2


class TestEllipticHelpers:
    """Tests for AGM, elliptic K and modular reduction."""

    def test_agm(self) -> None:
        """AGM(1, sqrt 2) is Gauss's constant reciprocal."""
        assert agm(1, np.sqrt(2)).real == pytest.approx(1.1981402347355922, rel=1e-14)

    def test_k_at_zero(self) -> None:
        """K(0) = pi / 2."""
        assert complete_elliptic_k(0).real == pytest.approx(np.pi / 2)

    def test_fundamental_domain(self) -> None:
        """The reduced point lies in the domain and is the Moebius image."""
        tau = complex(2.3, 0.1)
        reduced, matrix = fundamental_domain(tau)
        (a, b), (c, d) = matrix.tolist()
        assert a * d - b * c == 1
        assert abs(reduced.real) <= 0.5 + 1e-12
        assert abs(reduced) >= 1 - 1e-12
        assert reduced == pytest.approx((a * tau + b) / (c * tau + d))

    def test_lower_half_plane(self) -> None:
        """tau must have positive imaginary part."""
        with pytest.raises(ValueError):
            fundamental_domain(complex(0.0, -1.0))

    def test_sl2z_equivalence(self) -> None:
        """tau, tau + 1 and -1/tau are equivalent; i and 2i are not."""
        tau = complex(0.3, 1.7)
        assert sl2z_equivalent(tau, tau + 1)
        assert sl2z_equivalent(tau, -1 / tau)
        assert not sl2z_equivalent(1j, 2j)

    def test_elliptic_tau_genus(self) -> None:
        """Only genus one models have a single tau."""
        with pytest.raises(PeriodMatrixError):
            elliptic_tau(model("x**5 - x"))

    def test_elliptic_tau_square_lattice(self) -> None:
        """y^2 = x^3 - x has the square lattice, tau ~ i."""
        assert sl2z_equivalent(elliptic_tau(model("x**3 - x")), 1j)
