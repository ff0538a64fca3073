"""Tests for the series module."""

from __future__ import annotations

import pytest

from aci_workbench.algebra import MultiPoly, as_exact
from aci_workbench.errors import DimensionError, TruncationError
from aci_workbench.series import LaurentSeries, LaurentVectorSeries, series_multiply, substitute_series

PARAMS = ("s",)


def c(value: object) -> MultiPoly:
    return MultiPoly.constant(PARAMS, value)


def series(valuation: int, values: list[object], precision: int | None = None) -> LaurentSeries:
    return LaurentSeries(PARAMS, valuation, tuple(c(v) for v in values), precision)


class TestLaurentSeries:
    """Tests for truncated Laurent series arithmetic."""

    def test_precision_trims_coefficients(self) -> None:
        """Coefficients at or past the precision are dropped."""
        s = series(-1, [1, 2, 3, 4], precision=1)
        assert len(s.coefficients) == 2

    def test_coefficient_beyond_precision(self) -> None:
        """Asking for an unknown coefficient raises."""
        s = series(-1, [1, 2], precision=1)
        with pytest.raises(TruncationError):
            s.coefficient(1)

    def test_coefficient_below_valuation_is_zero(self) -> None:
        """Exponents below the valuation have zero coefficient."""
        assert series(0, [1]).coefficient(-3).is_zero()

    def test_sum_takes_joint_precision(self) -> None:
        """The sum is known only where both terms are."""
        total = series(-1, [1, 1], precision=1) + series(0, [1, 1, 1], precision=3)
        assert total.precision == 1
        assert total.coefficient(0) == c(2)

    def test_product_of_poles(self) -> None:
        """(1/t + 1)^2 = 1/t^2 + 2/t + 1."""
        s = series(-1, [1, 1])
        square = s * s
        assert square.valuation == -2
        assert [square.coefficient(k) for k in (-2, -1, 0)] == [c(1), c(2), c(1)]

    def test_product_precision(self) -> None:
        """A pole times a truncated series loses one order."""
        product = series(-1, [1]) * series(0, [1, 1, 1], precision=3)
        assert product.precision == 2

    def test_power(self) -> None:
        """Cube of a Laurent polynomial."""
        cube = series(-1, [1, 1]) ** 3
        assert cube.coefficient(-1) == c(3)

    def test_derivative(self) -> None:
        """d/dt (1/t + t) = -1/t^2 + 1."""
        d = series(-1, [1, 0, 1]).derivative()
        assert d.valuation == -2
        assert d.coefficient(-2) == c(-1)
        assert d.coefficient(0) == c(1)

    def test_evaluate(self) -> None:
        """Numeric value at a parameter point and time."""
        s = LaurentSeries(PARAMS, -1, (c(1), MultiPoly.variable(PARAMS, "s")), None)
        assert s.evaluate([2], 0.5).real == pytest.approx(4.0)

    def test_term_magnitudes(self) -> None:
        """Magnitudes of the individual terms."""
        assert series(-1, [1, 1]).term_magnitudes([0], 0.5) == pytest.approx([2.0, 1.0])

    def test_variable_mismatch(self) -> None:
        """Series over different parameters do not combine."""
        other = LaurentSeries(("u",), 0, (MultiPoly.constant(("u",), 1),), None)
        with pytest.raises(DimensionError):
            series(0, [1]) + other


class TestSeriesMultiply:
    """Tests for series_multiply."""

    def test_monomials(self) -> None:
        """(1/t)(1/t) = 1/t^2."""
        product = series_multiply(series(-1, [1]), series(-1, [1]))
        assert product.valuation == -2
        assert product.coefficients == (c(1),)

    def test_difference_of_squares(self) -> None:
        """(1/t + s t)(1/t - s t) = 1/t^2 - s^2 t^2."""
        s = MultiPoly.variable(PARAMS, "s")
        plus = LaurentSeries(PARAMS, -1, (c(1), c(0), s), None)
        minus = LaurentSeries(PARAMS, -1, (c(1), c(0), -s), None)
        product = series_multiply(plus, minus)
        assert product.coefficient(-2) == c(1)
        assert all(product.coefficient(k).is_zero() for k in (-1, 0, 1))
        assert product.coefficient(2) == -(s * s)

    def test_cut(self) -> None:
        """An explicit precision truncates the product."""
        product = series_multiply(series(-1, [1, 1]), series(-1, [1, 1]), precision=0)
        assert product.precision == 0
        assert len(product.coefficients) == 2
        with pytest.raises(TruncationError):
            product.coefficient(0)


class TestSubstitution:
    """Tests for substituting series into polynomials."""

    @pytest.fixture
    def vector(self) -> LaurentVectorSeries:
        """x = 1/t + s t, y = 1/t^2 to order 2."""
        zero = c(0)
        s = MultiPoly.variable(PARAMS, "s")
        rows = ((c(1), c(1)), (zero, zero), (s, zero))
        return LaurentVectorSeries(("x", "y"), PARAMS, (1, 2), rows, 2)

    def test_component_precision(self, vector: LaurentVectorSeries) -> None:
        """Component i is known up to t^(N - k_i)."""
        assert vector.component(0).precision == 2
        assert vector.component(1).precision == 1

    def test_substitute(self, vector: LaurentVectorSeries) -> None:
        """x^2 - y = 2 s + O(t)."""
        p = MultiPoly.from_expr("x**2 - y", ("x", "y"))
        result = substitute_series(p, vector)
        assert result.coefficient(-2).is_zero()
        assert result.coefficient(0) == MultiPoly.variable(PARAMS, "s") * as_exact(2)

    def test_substitute_wrong_variables(self, vector: LaurentVectorSeries) -> None:
        """The polynomial must be over the phase variables."""
        with pytest.raises(DimensionError):
            substitute_series(MultiPoly.from_expr("u", ("u", "v")), vector)

    def test_relative_precision_kept(self, vector: LaurentVectorSeries) -> None:
        """y^3 keeps the three known orders of y."""
        result = substitute_series(MultiPoly.from_expr("y**3", ("x", "y")), vector)
        assert result.valuation == -6
        assert result.known_terms == 3
