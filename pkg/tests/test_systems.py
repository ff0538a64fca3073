"""Tests for the systems module."""

from __future__ import annotations

from dataclasses import replace

import pytest
import sympy

from aci_workbench.algebra import MultiPoly, as_exact
from aci_workbench.errors import DimensionError, ParameterError
from aci_workbench.systems import (
    HamiltonianSystem,
    canonical_poisson,
    get_system,
    hamiltonian_vector_field,
    henon_heiles_curve,
    is_skew,
    kowalewski_curve,
    list_systems,
    poisson_bracket,
    validate_clebsch_parameters,
)


class TestRegistry:
    """Tests for building registry systems."""

    def test_list_systems(self) -> None:
        """The three registry systems are listed."""
        assert [d.name for d in list_systems()] == ["henon-heiles", "kowalewski", "clebsch"]

    @pytest.mark.parametrize("name", ["henon-heiles", "kowalewski", "clebsch"])
    def test_invariants_conserved(self, name: str) -> None:
        """Every registry invariant is constant along the flow."""
        system = get_system(name)
        assert all(r.is_zero() for r in system.invariance_residuals())

    def test_dimensions(self) -> None:
        """Phase space dimensions."""
        assert get_system("henon-heiles").dimension == 4
        assert get_system("kowalewski").dimension == 6
        assert get_system("clebsch").dimension == 6

    def test_henon_heiles_with_parameters(self) -> None:
        """Nonzero a and b keep the system integrable."""
        system = get_system("henon-heiles", {"a": 1, "b": "1/2"})
        assert system.parameters["b"] == sympy.Rational(1, 2)
        assert all(r.is_zero() for r in system.invariance_residuals())

    def test_float_parameter_rejected(self) -> None:
        """Parameters must be exact."""
        with pytest.raises(ParameterError):
            get_system("henon-heiles", {"a": 0.5})

    def test_unknown_parameter(self) -> None:
        """Unknown parameter names are reported."""
        with pytest.raises(ParameterError, match="unknown parameters"):
            get_system("kowalewski", {"c9": 1})

    def test_unknown_system(self) -> None:
        """Unknown system names are reported."""
        with pytest.raises(ParameterError, match="unknown system"):
            get_system("toda")

    def test_kowalewski_levels(self) -> None:
        """The third level is fixed to 1."""
        system = get_system("kowalewski", {"c4": 3})
        assert system.levels[2] == as_exact(1)
        assert system.levels[3] == as_exact(3)
        assert system.poisson is None


class TestClebschParameters:
    """Tests for the Clebsch parameter conditions."""

    def test_default_a_from_b_and_rho(self) -> None:
        """a_i = -b_j b_k / rho satisfies both conditions."""
        system = get_system("clebsch")
        assert [int(v) for v in system.parameters["a"]] == [-6, -3, -2]

    def test_bad_a(self) -> None:
        """a_i = b_i breaks the cyclic sum condition."""
        with pytest.raises(ParameterError):
            validate_clebsch_parameters((1, 2, 3), (1, 2, 3), 1)

    def test_repeated_a(self) -> None:
        """The a_i must be distinct."""
        with pytest.raises(ParameterError, match="distinct"):
            validate_clebsch_parameters((1, 1, 2), (1, 2, 3), 1)

    def test_d_normalisation(self) -> None:
        """d1^2 + d2^2 + 1 must vanish."""
        with pytest.raises(ParameterError):
            get_system("clebsch", {"d1_squared": 1, "d2_squared": 1})


class TestPoisson:
    """Tests for Poisson brackets and Hamiltonian vector fields."""

    def test_canonical_is_skew(self) -> None:
        """J = [[0, I], [-I, 0]] is skew."""
        assert is_skew(canonical_poisson(("q", "p")))

    def test_canonical_needs_even_dimension(self) -> None:
        """Odd phase spaces have no canonical structure."""
        with pytest.raises(DimensionError):
            canonical_poisson(("x", "y", "z"))

    def test_non_skew_rejected(self) -> None:
        """A symmetric Poisson matrix is refused on construction."""
        system = get_system("henon-heiles")
        one = MultiPoly.constant(system.phase_variables, 1)
        zero = MultiPoly.zero(system.phase_variables)
        bad = [[one if i == j else zero for j in range(4)] for i in range(4)]
        with pytest.raises(DimensionError, match="skew"):
            replace(system, poisson=bad)

    def test_henon_heiles_involution(self) -> None:
        """H1 and H2 Poisson-commute."""
        system = get_system("henon-heiles")
        h1, h2 = system.invariants
        assert poisson_bracket(h1, h2, system.poisson).is_zero()

    def test_hamiltonian_field_reproduces_flow(self) -> None:
        """J grad H1 is the registered vector field."""
        system = get_system("henon-heiles")
        generated = hamiltonian_vector_field(system.invariants[0], system.poisson)
        assert tuple(generated) == system.vector_field

    def test_clebsch_casimir(self) -> None:
        """|p|^2 commutes with every coordinate."""
        system = get_system("clebsch")
        casimir = system.invariants[1]
        for name in system.phase_variables:
            coordinate = MultiPoly.variable(system.phase_variables, name)
            assert poisson_bracket(coordinate, casimir, system.poisson).is_zero()

    def test_system_dimension_check(self) -> None:
        """The vector field needs one component per variable."""
        x = MultiPoly.variable(("x", "y"), "x")
        with pytest.raises(DimensionError):
            HamiltonianSystem("broken", ("x", "y"), (x,), (), ())


class TestPrintedCurves:
    """Tests for the printed divisor relations."""

    def test_henon_heiles_curve_coefficients(self) -> None:
        """Leading and constant coefficients at a = b = 0, c2 = 1."""
        curve = henon_heiles_curve()
        assert curve.terms[(0, 2)] == as_exact(1)
        assert curve.terms[(8, 0)] == as_exact("7/15552")
        assert curve.terms[(0, 0)] == as_exact("-1/36")

    def test_henon_heiles_curve_is_even(self) -> None:
        """Only even powers of alpha occur."""
        assert all(k[0] % 2 == 0 for k in henon_heiles_curve(a=1, b=2, c1=3, c2=5).terms)

    def test_kowalewski_epsilon(self) -> None:
        """epsilon must be a sign."""
        with pytest.raises(ParameterError):
            kowalewski_curve(0)

    def test_kowalewski_signs_differ(self) -> None:
        """The two components differ only in the alpha2 term."""
        diff = kowalewski_curve(1) - kowalewski_curve(-1)
        assert diff == MultiPoly.from_expr("2*alpha1**2*alpha2 - 2*alpha2", ("alpha1", "alpha2"))
