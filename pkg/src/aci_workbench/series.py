"""Truncated Laurent series in one time variable with polynomial coefficients."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

from aci_workbench.algebra import MultiPoly, poly_eval, to_complex
from aci_workbench.errors import DimensionError, TruncationError


def _min_precision(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


@dataclass(frozen=True)
class LaurentSeries:
    """Sum of c_j t^(valuation + j); coefficients are known below ``precision``.

    ``precision`` is the first unknown exponent, or None when the series is
    exact (a finite Laurent polynomial).
    """

    variables: tuple[str, ...]
    valuation: int
    coefficients: tuple[MultiPoly, ...]
    precision: int | None = None

    def __post_init__(self) -> None:
        if self.precision is not None:
            if self.precision < self.valuation:
                object.__setattr__(self, "valuation", self.precision)
                object.__setattr__(self, "coefficients", ())
            keep = self.precision - self.valuation
            if len(self.coefficients) > keep:
                object.__setattr__(self, "coefficients", tuple(self.coefficients[:keep]))
        for c in self.coefficients:
            if c.variables != self.variables:
                raise DimensionError("series coefficients must share the parameter variables")

    @classmethod
    def constant(cls, variables: Sequence[str], value: Any) -> LaurentSeries:
        poly = value if isinstance(value, MultiPoly) else MultiPoly.constant(variables, value)
        return cls(tuple(variables), 0, (poly,), None)

    @property
    def exact_mode(self) -> bool:
        return all(c.exact for c in self.coefficients)

    @property
    def known_terms(self) -> int:
        """Number of exponents with a known coefficient (inf-like for exact series)."""
        if self.precision is None:
            return len(self.coefficients)
        return self.precision - self.valuation

    def _zero(self) -> MultiPoly:
        return MultiPoly.zero(self.variables, exact=self.exact_mode)

    def coefficient(self, exponent: int) -> MultiPoly:
        """Coefficient of t**exponent; raises TruncationError beyond precision."""
        if self.precision is not None and exponent >= self.precision:
            raise TruncationError(f"t^{exponent} is beyond the series precision t^{self.precision}")
        idx = exponent - self.valuation
        if 0 <= idx < len(self.coefficients):
            return self.coefficients[idx]
        return self._zero()

    def _top(self) -> int:
        """One past the last exponent that must be materialised."""
        if self.precision is not None:
            return self.precision
        return self.valuation + len(self.coefficients)

    def __add__(self, other: LaurentSeries) -> LaurentSeries:
        if other.variables != self.variables:
            raise DimensionError("series parameter variables differ")
        low = min(self.valuation, other.valuation)
        precision = _min_precision(self.precision, other.precision)
        top = precision if precision is not None else max(self._top(), other._top())
        coeffs = []
        for k in range(low, top):
            a = self.coefficient(k) if k < self._top() else self._zero()
            b = other.coefficient(k) if k < other._top() else other._zero()
            coeffs.append(a + b)
        return LaurentSeries(self.variables, low, tuple(coeffs), precision)

    def __neg__(self) -> LaurentSeries:
        return LaurentSeries(self.variables, self.valuation, tuple(-c for c in self.coefficients), self.precision)

    def __sub__(self, other: LaurentSeries) -> LaurentSeries:
        return self + (-other)

    def scale(self, factor: Any) -> LaurentSeries:
        return LaurentSeries(
            self.variables, self.valuation, tuple(c * factor for c in self.coefficients), self.precision
        )

    def __mul__(self, other: LaurentSeries) -> LaurentSeries:
        if not isinstance(other, LaurentSeries):
            return self.scale(other)
        if other.variables != self.variables:
            raise DimensionError("series parameter variables differ")
        low = self.valuation + other.valuation
        pa = None if self.precision is None else self.precision + other.valuation
        pb = None if other.precision is None else other.precision + self.valuation
        precision = _min_precision(pa, pb)
        if precision is None:
            top = low + len(self.coefficients) + len(other.coefficients) - 1
        else:
            top = precision
        coeffs = []
        na, nb = len(self.coefficients), len(other.coefficients)
        zero = MultiPoly.zero(self.variables, exact=self.exact_mode and other.exact_mode)
        for k in range(low, max(top, low)):
            idx = k - low
            acc = zero
            for i in range(max(0, idx - nb + 1), min(idx, na - 1) + 1):
                a = self.coefficients[i]
                b = other.coefficients[idx - i]
                if a and b:
                    acc = acc + a * b
            coeffs.append(acc)
        return LaurentSeries(self.variables, low, tuple(coeffs), precision)

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> LaurentSeries:
        if exponent < 0:
            raise ValueError("negative powers are not supported")
        result = LaurentSeries.constant(self.variables, MultiPoly.constant(self.variables, 1))
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def derivative(self) -> LaurentSeries:
        coeffs = tuple(c * (self.valuation + j) for j, c in enumerate(self.coefficients))
        precision = None if self.precision is None else self.precision - 1
        return LaurentSeries(self.variables, self.valuation - 1, coeffs, precision)

    def evaluate(self, point: Sequence[Any], t: complex) -> complex:
        """Numeric value of the known terms at parameter point and time t."""
        t = complex(t)
        return sum(
            (to_complex(poly_eval(c, point)) * t ** (self.valuation + j) for j, c in enumerate(self.coefficients)),
            0j,
        )

    def term_magnitudes(self, point: Sequence[Any], t: complex) -> list[float]:
        t = complex(t)
        return [
            abs(to_complex(poly_eval(c, point)) * t ** (self.valuation + j)) for j, c in enumerate(self.coefficients)
        ]


@dataclass(frozen=True)
class LaurentVectorSeries:
    """x_i(t) = sum_j x_i^(j) t^(j - k_i) for j = 0..N, one entry per phase variable."""

    phase_variables: tuple[str, ...]
    parameters: tuple[str, ...]
    leading_exponents: tuple[int, ...]
    coefficients: tuple[tuple[MultiPoly, ...], ...]
    truncation_order: int

    def __post_init__(self) -> None:
        m = len(self.phase_variables)
        if len(self.leading_exponents) != m:
            raise DimensionError("one leading exponent per phase variable is required")
        for row in self.coefficients:
            if len(row) != m:
                raise DimensionError("each coefficient vector needs one entry per phase variable")

    def component(self, i: int) -> LaurentSeries:
        k = self.leading_exponents[i]
        coeffs = tuple(row[i] for row in self.coefficients[: self.truncation_order + 1])
        return LaurentSeries(self.parameters, -k, coeffs, self.truncation_order - k + 1)

    def components(self) -> list[LaurentSeries]:
        return [self.component(i) for i in range(len(self.phase_variables))]

    def evaluate(self, point: Sequence[Any], t: complex) -> list[complex]:
        return [s.evaluate(point, t) for s in self.components()]


def series_multiply(a: LaurentSeries, b: LaurentSeries, precision: int | None = None) -> LaurentSeries:
    """Product of two series, optionally cut at t**precision.

    The valuation of the product is the sum of the valuations; the known
    precision never exceeds what the factors support.
    """
    product = a * b
    if precision is None:
        return product
    return LaurentSeries(
        product.variables,
        product.valuation,
        product.coefficients,
        _min_precision(product.precision, precision),
    )


def substitute_series(p: MultiPoly, series: LaurentVectorSeries | Sequence[LaurentSeries]) -> LaurentSeries:
    """Compose a polynomial in the phase variables with a vector of series.

    The precision of the result is the minimum over monomials of the
    precision their product carries; asking for a polynomial whose result
    has no known coefficient raises TruncationError.
    """
    if isinstance(series, LaurentVectorSeries):
        if p.variables != series.phase_variables:
            raise DimensionError(f"polynomial variables {p.variables} differ from {series.phase_variables}")
        comps = series.components()
    else:
        comps = list(series)
        if len(comps) != p.nvars:
            raise DimensionError("one series per polynomial variable is required")
    if not comps:
        raise DimensionError("empty series vector")
    params = comps[0].variables
    exact_mode = p.exact and all(c.exact_mode for c in comps)
    result = LaurentSeries(params, 0, (), None)
    powers: list[dict[int, LaurentSeries]] = [{1: c} for c in comps]

    def power(i: int, e: int) -> LaurentSeries:
        cache = powers[i]
        if e not in cache:
            half = power(i, e // 2)
            sq = half * half
            cache[e] = sq * comps[i] if e % 2 else sq
        return cache[e]

    for key, coeff in p.terms.items():
        term = LaurentSeries.constant(params, coeff if exact_mode else to_complex(coeff))
        for i, e in enumerate(key):
            if e:
                term = term * power(i, e)
        result = result + term
    if result.precision is not None and result.precision <= result.valuation:
        raise TruncationError(
            f"substitution leaves no known coefficient (precision t^{result.precision}); raise the series order"
        )
    return result
