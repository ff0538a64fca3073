"""Tests for the painleve module."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
import sympy

from aci_workbench.algebra import MultiPoly
from aci_workbench.divisor import invariance_defect
from aci_workbench.errors import FamilyError, SpectrumError, WeightHomogeneityError
from aci_workbench.painleve import (
    LaurentFamily,
    _exact_solve,
    detect_weights,
    expand_family,
    kowalewski_matrix,
    kowalewski_spectrum,
    max_series_coefficient,
    newton_solve,
    ode_residuals,
    principal_balances,
    recentre_family,
    shift_balance,
    solve_balances,
    track_continuum,
    weights_are_valid,
)
from aci_workbench.systems import HamiltonianSystem, get_system

A, B = sympy.Rational(1, 3), sympy.Integer(2)
FAMILY_PARAMETERS = ("alpha", "beta", "gamma")


@pytest.fixture(scope="module")
def henon_heiles() -> HamiltonianSystem:
    return get_system("henon-heiles", {"a": "1/3", "b": 2})


@pytest.fixture(scope="module")
def henon_heiles_family(henon_heiles: HamiltonianSystem) -> LaurentFamily:
    balances = solve_balances(henon_heiles, random_starts=40, seed=1)
    (balance, spectrum), *_ = principal_balances(henon_heiles, balances)
    return expand_family(henon_heiles, balance, spectrum, 8)


def printed(expr: str) -> MultiPoly:
    """A coefficient of the q1 series with A and B substituted."""
    names = {n: sympy.Symbol(n) for n in (*FAMILY_PARAMETERS, "A", "B")}
    value = sympy.sympify(expr, locals=names).subs({names["A"]: A, names["B"]: B})
    return MultiPoly.from_expr(sympy.expand(value), FAMILY_PARAMETERS)


class TestWeights:
    """Tests for weight detection."""

    @pytest.mark.parametrize(
        ("name", "expected"),
        [
            ("henon-heiles", (1, 2, 2, 3)),
            ("kowalewski", (1, 1, 1, 2, 2, 2)),
            ("clebsch", (1, 1, 1, 1, 1, 1)),
        ],
    )
    def test_registry_weights(self, name: str, expected: tuple[int, ...]) -> None:
        """Smallest weights of the registry systems."""
        assert detect_weights(get_system(name)) == expected

    def test_invalid_weights(self, henon_heiles: HamiltonianSystem) -> None:
        """Uniform weights do not fit Henon-Heiles."""
        assert weights_are_valid(henon_heiles, (1, 2, 2, 3))
        assert not weights_are_valid(henon_heiles, (1, 1, 1, 1))
        assert not weights_are_valid(henon_heiles, (0, 2, 2, 3))

    def test_constant_field_not_homogeneous(self) -> None:
        """x' = 1 has no positive weights."""
        one = MultiPoly.constant(("x",), 1)
        system = HamiltonianSystem("constant", ("x",), (one,), (), ())
        with pytest.raises(WeightHomogeneityError):
            detect_weights(system)


class TestBalances:
    """Tests for the leading-order balance solver."""

    def test_newton_solve(self) -> None:
        """Newton converges to a root of x^2 - 4."""
        x, residual, _ = newton_solve(
            lambda v: np.array([v[0] ** 2 - 4]),
            lambda v: np.array([[2 * v[0]]]),
            np.array([1.0]),
        )
        assert x[0] == pytest.approx(2.0)
        assert residual < 1e-12

    def test_henon_heiles_balance_is_a_line(self, henon_heiles: HamiltonianSystem) -> None:
        """x0 = (alpha, -1, -alpha, 2) is found once, exactly."""
        balances = solve_balances(henon_heiles, random_starts=40, seed=1)
        family = [b for b in balances if b.is_family]
        assert len(family) == 1
        point = family[0].leading_coefficients(FAMILY_PARAMETERS)
        assert point == [
            MultiPoly.variable(FAMILY_PARAMETERS, "alpha"),
            MultiPoly.constant(FAMILY_PARAMETERS, -1),
            -MultiPoly.variable(FAMILY_PARAMETERS, "alpha"),
            MultiPoly.constant(FAMILY_PARAMETERS, 2),
        ]
        assert family[0].to_json()["kind"] == "family"


class TestSpectrum:
    """Tests for Kowalewski exponents."""

    def test_henon_heiles_resonances(self, henon_heiles_family: LaurentFamily) -> None:
        """Eigenvalues -1, 0, 3, 6 with three free parameters."""
        spectrum = henon_heiles_family.spectrum
        assert spectrum.resonances == [0, 3, 6]
        assert spectrum.free_parameter_count == 3
        assert sorted(round(z.real) for z in spectrum.eigenvalues) == [-1, 0, 3, 6]
        assert spectrum.is_principal(4)

    def test_invariant_degrees_are_eigenvalues(self, henon_heiles_family: LaurentFamily) -> None:
        """Both invariants have weighted degree 6."""
        assert henon_heiles_family.spectrum.invariant_degrees == {"H1": 6, "H2": 6}

    def test_matrix_is_jacobian_plus_weights(
        self, henon_heiles: HamiltonianSystem, henon_heiles_family: LaurentFamily
    ) -> None:
        """Recomputing the spectrum from the balance gives the same matrix and resonances."""
        balance = henon_heiles_family.balance
        spectrum = kowalewski_spectrum(henon_heiles, balance)
        np.testing.assert_allclose(spectrum.matrix, kowalewski_matrix(henon_heiles, balance))
        assert spectrum.resonances == henon_heiles_family.spectrum.resonances

    def test_poor_balance_rejected(self, henon_heiles: HamiltonianSystem, henon_heiles_family: LaurentFamily) -> None:
        """A balance with a large residual has no spectrum."""
        with pytest.raises(SpectrumError, match="residual"):
            kowalewski_spectrum(henon_heiles, replace(henon_heiles_family.balance, residual=1.0))

    @pytest.mark.parametrize(("name", "families"), [("kowalewski", 2), ("clebsch", None)])
    def test_free_parameter_counts(self, name: str, families: int | None) -> None:
        """Principal balances carry dim - 1 = 5 free parameters."""
        system = get_system(name)
        principal = principal_balances(system, solve_balances(system, random_starts=80, seed=0))
        assert principal
        if families is not None:
            assert len(principal) == families
        assert all(spectrum.free_parameter_count == 5 for _, spectrum in principal)


class TestFamilies:
    """Tests for Laurent family expansion."""

    def test_parameter_orders(self, henon_heiles_family: LaurentFamily) -> None:
        """alpha enters at order 0, beta at 3, gamma at 6."""
        assert henon_heiles_family.exact
        assert henon_heiles_family.parameters == FAMILY_PARAMETERS
        assert henon_heiles_family.parameter_orders == {"alpha": 0, "beta": 3, "gamma": 6}

    def test_low_order_coefficients(self, henon_heiles_family: LaurentFamily) -> None:
        """q1 to order t and q2 to order t^0."""
        assert henon_heiles_family.coefficient("q1", 2) == printed("alpha**3/12 + alpha*A/2 - alpha*B/12")
        assert henon_heiles_family.coefficient("q2", 2) == printed("alpha**2/12 - B/12")
        assert henon_heiles_family.coefficient("q1", 3) == printed("beta")
        assert henon_heiles_family.coefficient("q2", 5) == printed("alpha*beta/3")
        assert henon_heiles_family.coefficient("q2", 6) == printed("gamma")

    @pytest.mark.parametrize(
        ("k", "expr"),
        [
            (
                4,
                "alpha*A*B/24 - alpha**5/72 + 11*alpha**3*B/720 - 11*alpha**3*A/120 - alpha*B**2/720"
                " - alpha*A**2/8",
            ),
            (5, "-beta*alpha**2/12 + beta*B/60 - A*beta/10"),
            (
                6,
                "-alpha*gamma/9 - alpha**7/15552 - alpha**5*A/2160 + alpha**5*B/12960 + alpha**3*B**2/25920"
                " + alpha**3*A**2/1440 - alpha**3*A*B/4320 + alpha*A*B**2/1440 - alpha*B**3/19440"
                " - alpha*A**2*B/288 + alpha*A**3/144",
            ),
        ],
    )
    def test_printed_q1_coefficients(self, henon_heiles_family: LaurentFamily, k: int, expr: str) -> None:
        """The expanded q1 coefficients equal the closed forms exactly."""
        assert henon_heiles_family.coefficient("q1", k) == printed(expr)

    def test_invariants_constant(self, henon_heiles: HamiltonianSystem, henon_heiles_family: LaurentFamily) -> None:
        """H1 and H2 have no t^k terms with k != 0."""
        assert invariance_defect(henon_heiles_family, henon_heiles.invariants) == 0.0

    def test_series_solves_ode(self, henon_heiles: HamiltonianSystem, henon_heiles_family: LaurentFamily) -> None:
        """x' - f(x) vanishes through the truncation."""
        residuals = ode_residuals(henon_heiles, henon_heiles_family)
        assert max(max_series_coefficient(r) for r in residuals) == 0.0

    def test_order_below_resonance(self, henon_heiles: HamiltonianSystem, henon_heiles_family: LaurentFamily) -> None:
        """The expansion must reach past the largest resonance."""
        with pytest.raises(FamilyError, match="below max resonance"):
            expand_family(henon_heiles, henon_heiles_family.balance, henon_heiles_family.spectrum, 5)

    def test_wrong_parameter_names(self, henon_heiles: HamiltonianSystem, henon_heiles_family: LaurentFamily) -> None:
        """One name per free parameter."""
        with pytest.raises(FamilyError, match="parameter names"):
            expand_family(
                henon_heiles,
                henon_heiles_family.balance,
                henon_heiles_family.spectrum,
                8,
                parameter_names=("s", "u"),
            )

    def test_json(self, henon_heiles_family: LaurentFamily) -> None:
        """The family serializes its structure."""
        data = henon_heiles_family.to_json()
        assert data["leading_exponents"] == [1, 2, 2, 3]
        assert data["free_columns"]["3"] == [0]
        assert len(data["coefficients"]) == 9


class TestPolynomialPivots:
    """Tests for solving with pivots whose determinant depends on the parameters."""

    S = ("s",)

    def poly(self, expr: str) -> MultiPoly:
        return MultiPoly.from_expr(expr, self.S)

    def test_divisible_solution(self) -> None:
        """diag(s, 1) x = (s^2, 1) gives x = (s, 1)."""
        a = [[self.poly("s"), self.poly("0")], [self.poly("0"), self.poly("1")]]
        x, free, rows = _exact_solve(a, [self.poly("s**2"), self.poly("1")], 2, [], self.S)
        assert x == [self.poly("s"), self.poly("1")]
        assert free == ()
        assert rows == (0, 1)

    def test_rational_solution_rejected(self) -> None:
        """x = 1/s is not a polynomial."""
        a = [[self.poly("s"), self.poly("0")], [self.poly("0"), self.poly("1")]]
        with pytest.raises(FamilyError, match="polynomial"):
            _exact_solve(a, [self.poly("1"), self.poly("1")], 2, [], self.S)

    @pytest.fixture(scope="class")
    def kowalewski(self) -> tuple[HamiltonianSystem, list]:
        system = get_system("kowalewski")
        return system, principal_balances(system, solve_balances(system, random_starts=80, seed=0))

    def test_kowalewski_families_expand(self, kowalewski: tuple[HamiltonianSystem, list]) -> None:
        """Both principal families expand exactly with five parameters."""
        system, principal = kowalewski
        assert len(principal) == 2
        for balance, spectrum in principal:
            family = expand_family(system, balance, spectrum, spectrum.max_resonance + 1)
            assert family.exact
            assert len(family.parameters) == spectrum.free_parameter_count == 5
            residuals = ode_residuals(system, family)
            assert max(max_series_coefficient(r) for r in residuals) == 0.0


class TestContinuum:
    """Tests for balances on a curved continuum, as in the Clebsch case."""

    @pytest.fixture(scope="class")
    def clebsch(self) -> tuple[HamiltonianSystem, list]:
        system = get_system("clebsch")
        return system, solve_balances(system, random_starts=80, seed=0)

    @pytest.fixture(scope="class")
    def family(self, clebsch: tuple[HamiltonianSystem, list]) -> LaurentFamily:
        system, balances = clebsch
        balance, spectrum = principal_balances(system, balances)[0]
        return expand_family(system, balance, spectrum, spectrum.max_resonance + 1)

    def test_points_are_merged(self, clebsch: tuple[HamiltonianSystem, list]) -> None:
        """Newton points on one continuum collapse to one representative."""
        _, balances = clebsch
        continuum = [b for b in balances if b.on_continuum]
        assert 1 <= len(continuum) <= 4
        assert len(balances) < 20
        assert all(b.to_json()["kind"] == "continuum" for b in continuum)

    def test_chart_parameter_completes_count(self, clebsch: tuple[HamiltonianSystem, list]) -> None:
        """The k = 0 chart shift brings each family to dim - 1 = 5 parameters."""
        system, balances = clebsch
        principal = principal_balances(system, balances)
        assert principal
        for balance, spectrum in principal:
            assert balance.on_continuum
            family = expand_family(system, balance, spectrum, spectrum.max_resonance + 1)
            assert len(family.parameters) == spectrum.free_parameter_count == 5
            assert family.parameter_orders["theta0"] == 0
            assert family.free_columns[0] == (balance.chart_column,)
            residuals = ode_residuals(system, family)
            assert max(max_series_coefficient(r) for r in residuals) < 1e-8

    def test_track_to_same_value(self, clebsch: tuple[HamiltonianSystem, list]) -> None:
        """Tracking to the current chart value returns the base point."""
        system, balances = clebsch
        balance = next(b for b in balances if b.on_continuum)
        x = track_continuum(system, balance, balance.x0[balance.chart_column])
        np.testing.assert_allclose(x, balance.x0, atol=1e-10)

    def test_shift_balance(self, clebsch: tuple[HamiltonianSystem, list]) -> None:
        """A shifted balance has the new chart value and stays on the continuum."""
        system, balances = clebsch
        balance = next(b for b in balances if b.on_continuum)
        j = balance.chart_column
        moved = shift_balance(system, balance, 0.3)
        assert moved.x0[j] == pytest.approx(balance.x0[j] + 0.3)
        assert moved.residual < 1e-10
        assert moved.on_continuum

    def test_recentre_family(self, clebsch: tuple[HamiltonianSystem, list], family: LaurentFamily) -> None:
        """Re-expanding at another base point keeps names and order and stays coherent."""
        system, _ = clebsch
        local = recentre_family(system, family, 0.2 + 0.1j)
        assert local.parameters == family.parameters
        assert local.order == family.order
        assert not np.allclose(local.balance.x0, family.balance.x0)
        assert invariance_defect(local, system.invariants) < 1e-6

    def test_recentre_needs_continuum(
        self, henon_heiles: HamiltonianSystem, henon_heiles_family: LaurentFamily
    ) -> None:
        """A straight line of balances is parametrized exactly and is not re-centred."""
        with pytest.raises(FamilyError, match="continuum"):
            recentre_family(henon_heiles, henon_heiles_family, 0.1)
