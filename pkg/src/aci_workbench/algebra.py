"""Sparse multivariate polynomials over Gaussian rationals, with a complex-float mirror."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from fractions import Fraction
from itertools import product as cartesian
from numbers import Integral
from typing import Any, Callable

import numpy as np
import sympy
from sympy.polys.domains import QQ, QQ_I
from sympy.polys.polyerrors import ExactQuotientFailed

from aci_workbench.errors import DimensionError

logger = logging.getLogger(__name__)

GaussianRational = QQ_I.dtype
Exponent = tuple[int, ...]

MAX_DENOMINATOR = 10**6
RATIONAL_TOLERANCE = 1e-8


# ---------------------------------------------------------------------------
# Scalars
# ---------------------------------------------------------------------------


def _to_qq(value: Any) -> Any:
    if isinstance(value, bool):
        raise TypeError("booleans are not polynomial coefficients")
    if isinstance(value, Integral):
        return QQ(int(value))
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, str):
        frac = Fraction(value.strip())
        return QQ(frac.numerator, frac.denominator)
    if isinstance(value, sympy.Rational):
        return QQ(int(value.p), int(value.q))
    if isinstance(value, float):
        raise TypeError(f"float {value!r} is not exact; pass a string or Fraction")
    return QQ.convert(value)


def as_exact(value: Any) -> GaussianRational:
    """Convert a value to an exact Gaussian rational.

    Accepts ints, Fractions, ``"p/q"`` strings, ``[re, im]`` pairs of those,
    sympy numbers and Gaussian rationals. Floats and complex numbers are
    rejected because their conversion would silently round.
    """
    if isinstance(value, GaussianRational):
        return value
    if isinstance(value, complex):
        raise TypeError(f"complex {value!r} is not exact; use rationalize()")
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"expected [re, im], got {value!r}")
        return QQ_I(_to_qq(value[0]), _to_qq(value[1]))
    if isinstance(value, sympy.Basic) and not isinstance(value, sympy.Rational):
        if value.has(sympy.Float):
            raise TypeError(f"{value!r} contains floats and is not exact")
        return QQ_I.from_sympy(value)
    return QQ_I(_to_qq(value), QQ(0))


def is_exact_scalar(value: Any) -> bool:
    """Return True if value can be used as an exact coefficient."""
    return isinstance(value, (GaussianRational, Integral, Fraction, str, sympy.Rational)) and not isinstance(
        value, bool
    )


def to_complex(value: Any) -> complex:
    """Convert an exact or numeric scalar to a Python complex."""
    if isinstance(value, GaussianRational):
        return complex(float(value.x), float(value.y))
    if isinstance(value, (Fraction, str)):
        return complex(float(Fraction(value)))
    return complex(value)


def _snap_real(x: float, max_denominator: int, tol: float) -> Fraction | None:
    frac = Fraction(x).limit_denominator(max_denominator)
    if abs(float(frac) - x) <= tol * max(1.0, abs(x)):
        return frac
    return None


def rationalize(
    value: complex,
    max_denominator: int = MAX_DENOMINATOR,
    tol: float = RATIONAL_TOLERANCE,
) -> GaussianRational | None:
    """Snap a complex float to a nearby Gaussian rational, or return None."""
    value = complex(value)
    re = _snap_real(value.real, max_denominator, tol)
    im = _snap_real(value.imag, max_denominator, tol)
    if re is None or im is None:
        return None
    return as_exact([re, im])


def _fraction_text(q: Any) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def format_scalar(value: Any) -> str | list[Any]:
    """Encode a coefficient for JSON: "p/q", ["p/q", "r/s"] or [re, im] floats."""
    if isinstance(value, GaussianRational):
        re = _fraction_text(value.x)
        if not value.y:
            return re
        return [re, _fraction_text(value.y)]
    z = complex(value)
    return [z.real, z.imag]


def parse_scalar(obj: Any) -> Any:
    """Decode a coefficient written by format_scalar."""
    if isinstance(obj, str):
        return as_exact(obj)
    if isinstance(obj, (list, tuple)) and len(obj) == 2:
        if all(isinstance(part, str) for part in obj):
            return as_exact(obj)
        return complex(float(obj[0]), float(obj[1]))
    if isinstance(obj, bool):
        raise ValueError(f"invalid coefficient: {obj!r}")
    if isinstance(obj, int):
        return as_exact(obj)
    if isinstance(obj, float):
        return complex(obj)
    raise ValueError(f"invalid coefficient: {obj!r}")


def _scalar_str(value: Any) -> str:
    if isinstance(value, GaussianRational):
        return str(QQ_I.to_sympy(value))
    z = complex(value)
    return f"({z.real:.12g}{z.imag:+.12g}j)"


# ---------------------------------------------------------------------------
# MultiPoly
# ---------------------------------------------------------------------------


class MultiPoly:
    """A polynomial in named variables stored as exponent vector -> coefficient.

    Coefficients are either all exact Gaussian rationals or all complex
    floats (the float mirror). Zero coefficients are never stored. Mixing an
    exact and a float operand yields a float result.
    """

    __slots__ = ("variables", "terms", "exact")

    def __init__(
        self,
        variables: Sequence[str],
        terms: Mapping[Exponent, Any] | None = None,
        *,
        exact: bool | None = None,
    ) -> None:
        self.variables: tuple[str, ...] = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise DimensionError(f"duplicate variable names: {self.variables}")
        items = dict(terms or {})
        if exact is None:
            exact = all(is_exact_scalar(c) for c in items.values())
        self.exact: bool = exact
        nvars = len(self.variables)
        clean: dict[Exponent, Any] = {}
        for key, coeff in items.items():
            key = tuple(int(e) for e in key)
            if len(key) != nvars:
                raise DimensionError(f"exponent {key} does not match {nvars} variables")
            if any(e < 0 for e in key):
                raise ValueError(f"negative exponent in {key}")
            value = as_exact(coeff) if exact else to_complex(coeff)
            if value:
                clean[key] = value
        self.terms: dict[Exponent, Any] = clean

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, variables: Sequence[str], *, exact: bool = True) -> MultiPoly:
        return cls(variables, {}, exact=exact)

    @classmethod
    def constant(cls, variables: Sequence[str], value: Any) -> MultiPoly:
        key = (0,) * len(tuple(variables))
        return cls(variables, {key: value}, exact=not isinstance(value, (complex, float)))

    @classmethod
    def variable(cls, variables: Sequence[str], name: str) -> MultiPoly:
        variables = tuple(variables)
        if name not in variables:
            raise DimensionError(f"unknown variable {name!r}")
        key = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {key: 1})

    @classmethod
    def from_expr(cls, expr: Any, variables: Sequence[str]) -> MultiPoly:
        """Build an exact polynomial from a sympy expression or string."""
        variables = tuple(variables)
        symbols = sympy.symbols(variables) if variables else ()
        if isinstance(symbols, sympy.Symbol):
            symbols = (symbols,)
        expr = sympy.sympify(expr, locals=dict(zip(variables, symbols)))
        if not symbols:
            return cls.constant((), QQ_I.from_sympy(expr))
        poly = sympy.Poly(expr, *symbols, domain=QQ_I)
        return cls(variables, {monom: coeff for monom, coeff in poly.terms()}, exact=True)

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> MultiPoly:
        """Decode {"vars": [...], "terms": [{"e": [...], "c": ...}]}."""
        try:
            variables = tuple(obj["vars"])
            raw_terms = obj["terms"]
        except (KeyError, TypeError) as e:
            raise ValueError(f"polynomial JSON needs 'vars' and 'terms': {e}") from e
        terms: dict[Exponent, Any] = {}
        for term in raw_terms:
            key = tuple(term["e"])
            terms[key] = parse_scalar(term["c"])
        return cls(variables, terms)

    def to_json(self) -> dict[str, Any]:
        return {
            "vars": list(self.variables),
            "terms": [
                {"e": list(key), "c": format_scalar(coeff)}
                for key, coeff in sorted(self.terms.items(), reverse=True)
            ],
        }

    # -- inspection ----------------------------------------------------------

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_constant(self) -> bool:
        return all(not any(key) for key in self.terms)

    def constant_term(self) -> Any:
        zero_key = (0,) * self.nvars
        if zero_key in self.terms:
            return self.terms[zero_key]
        return QQ_I.zero if self.exact else 0j

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(key) for key in self.terms), default=-1)

    def degree_in(self, name: str) -> int:
        idx = self._index(name)
        return max((key[idx] for key in self.terms), default=-1)

    def weighted_degree(self, weights: Sequence[int]) -> int | None:
        """Largest weighted degree of any term, None for the zero polynomial."""
        if len(weights) != self.nvars:
            raise DimensionError("weight vector does not match variables")
        if not self.terms:
            return None
        return max(sum(w * e for w, e in zip(weights, key)) for key in self.terms)

    def weighted_part(self, weights: Sequence[int], weight: int) -> MultiPoly:
        """Terms of exactly the given weighted degree."""
        kept = {k: c for k, c in self.terms.items() if sum(w * e for w, e in zip(weights, k)) == weight}
        return MultiPoly(self.variables, kept, exact=self.exact)

    def max_abs_coefficient(self) -> float:
        return max((abs(to_complex(c)) for c in self.terms.values()), default=0.0)

    def free_variables(self) -> tuple[str, ...]:
        used = [any(key[i] for key in self.terms) for i in range(self.nvars)]
        return tuple(v for v, u in zip(self.variables, used) if u)

    def _index(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise DimensionError(f"unknown variable {name!r} (have {self.variables})") from None

    # -- conversion ----------------------------------------------------------

    def to_complex(self) -> MultiPoly:
        if not self.exact:
            return self
        return MultiPoly(self.variables, {k: to_complex(c) for k, c in self.terms.items()}, exact=False)

    def to_exact(
        self, max_denominator: int = MAX_DENOMINATOR, tol: float = RATIONAL_TOLERANCE
    ) -> MultiPoly | None:
        """Rationalize every coefficient; None if any coefficient fails to snap."""
        if self.exact:
            return self
        snapped: dict[Exponent, Any] = {}
        for key, coeff in self.terms.items():
            value = rationalize(coeff, max_denominator, tol)
            if value is None:
                return None
            snapped[key] = value
        return MultiPoly(self.variables, snapped, exact=True)

    def to_expr(self) -> sympy.Expr:
        symbols = sympy.symbols(self.variables) if self.variables else ()
        if isinstance(symbols, sympy.Symbol):
            symbols = (symbols,)
        total = sympy.Integer(0)
        for key, coeff in self.terms.items():
            c = QQ_I.to_sympy(coeff) if self.exact else sympy.sympify(complex(coeff))
            total += c * sympy.Mul(*[s**e for s, e in zip(symbols, key)])
        return total

    def with_variables(self, variables: Sequence[str]) -> MultiPoly:
        """Re-express over a different variable list containing all used variables."""
        variables = tuple(variables)
        if variables == self.variables:
            return self
        position = {v: i for i, v in enumerate(variables)}
        for name in self.free_variables():
            if name not in position:
                raise DimensionError(f"variable {name!r} missing from {variables}")
        terms: dict[Exponent, Any] = {}
        for key, coeff in self.terms.items():
            new = [0] * len(variables)
            for name, e in zip(self.variables, key):
                if e:
                    new[position[name]] = e
            terms[tuple(new)] = coeff
        return MultiPoly(variables, terms, exact=self.exact)

    def rename(self, mapping: Mapping[str, str]) -> MultiPoly:
        return MultiPoly(tuple(mapping.get(v, v) for v in self.variables), self.terms, exact=self.exact)

    # -- arithmetic ----------------------------------------------------------

    def _lift(self, other: Any) -> MultiPoly:
        if isinstance(other, MultiPoly):
            if other.variables != self.variables:
                raise DimensionError(f"variable mismatch: {self.variables} vs {other.variables}")
            return other
        return MultiPoly.constant(self.variables, other)

    @staticmethod
    def _align(a: MultiPoly, b: MultiPoly) -> tuple[MultiPoly, MultiPoly, bool]:
        if a.exact and b.exact:
            return a, b, True
        return a.to_complex(), b.to_complex(), False

    def __add__(self, other: Any) -> MultiPoly:
        a, b, is_exact = self._align(self, self._lift(other))
        terms = dict(a.terms)
        for key, coeff in b.terms.items():
            if key in terms:
                value = terms[key] + coeff
                if value:
                    terms[key] = value
                else:
                    del terms[key]
            else:
                terms[key] = coeff
        return _raw(a.variables, terms, is_exact)

    __radd__ = __add__

    def __neg__(self) -> MultiPoly:
        return _raw(self.variables, {k: -c for k, c in self.terms.items()}, self.exact)

    def __sub__(self, other: Any) -> MultiPoly:
        return self + (-self._lift(other))

    def __rsub__(self, other: Any) -> MultiPoly:
        return self._lift(other) + (-self)

    def __mul__(self, other: Any) -> MultiPoly:
        a, b, is_exact = self._align(self, self._lift(other))
        if not a.terms or not b.terms:
            return _raw(a.variables, {}, is_exact)
        terms: dict[Exponent, Any] = {}
        for ka, ca in a.terms.items():
            for kb, cb in b.terms.items():
                key = tuple(x + y for x, y in zip(ka, kb))
                value = ca * cb
                if key in terms:
                    terms[key] = terms[key] + value
                else:
                    terms[key] = value
        return _raw(a.variables, {k: c for k, c in terms.items() if c}, is_exact)

    __rmul__ = __mul__

    def scale(self, factor: Any) -> MultiPoly:
        return self * factor

    def __pow__(self, exponent: int) -> MultiPoly:
        if exponent < 0:
            raise ValueError("negative powers are not polynomials")
        result = MultiPoly.constant(self.variables, 1)
        if not self.exact:
            result = result.to_complex()
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def __eq__(self, other: object) -> bool:
        if isinstance(other, MultiPoly):
            if other.variables != self.variables:
                return False
            return (self - other).is_zero()
        try:
            return (self - MultiPoly.constant(self.variables, other)).is_zero()
        except (TypeError, ValueError):
            return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    # -- calculus ------------------------------------------------------------

    def diff(self, name: str) -> MultiPoly:
        idx = self._index(name)
        terms: dict[Exponent, Any] = {}
        for key, coeff in self.terms.items():
            e = key[idx]
            if e:
                new = key[:idx] + (e - 1,) + key[idx + 1 :]
                terms[new] = coeff * e
        return _raw(self.variables, terms, self.exact)

    def gradient(self) -> list[MultiPoly]:
        return [self.diff(v) for v in self.variables]

    def coefficient_of(self, name: str, power: int) -> MultiPoly:
        """Coefficient of name**power, as a polynomial with that variable removed."""
        idx = self._index(name)
        terms = {
            key[:idx] + (0,) + key[idx + 1 :]: coeff for key, coeff in self.terms.items() if key[idx] == power
        }
        return _raw(self.variables, terms, self.exact)

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, point: Sequence[Any]) -> Any:
        return poly_eval(self, point)

    def compose(self, mapping: Mapping[str, MultiPoly]) -> MultiPoly:
        """Substitute polynomials for variables. Unmapped variables must be absent."""
        if not mapping:
            return self
        targets = {p.variables for p in mapping.values()}
        if len(targets) != 1:
            raise DimensionError("substituted polynomials must share one variable list")
        (new_vars,) = targets
        images: list[MultiPoly] = []
        for v in self.variables:
            if v in mapping:
                images.append(mapping[v])
            elif v in new_vars:
                images.append(MultiPoly.variable(new_vars, v))
            elif self.degree_in(v) > 0:
                raise DimensionError(f"no substitution for variable {v!r}")
            else:
                images.append(MultiPoly.constant(new_vars, 1))
        cache: list[dict[int, MultiPoly]] = [{1: img} for img in images]

        def power(i: int, e: int) -> MultiPoly:
            if e not in cache[i]:
                cache[i][e] = images[i] ** e
            return cache[i][e]

        result = MultiPoly.zero(new_vars, exact=self.exact)
        for key, coeff in self.terms.items():
            term = MultiPoly.constant(new_vars, coeff)
            for i, e in enumerate(key):
                if e:
                    term = term * power(i, e)
            result = result + term
        return result

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        if self.exact:
            return str(self.to_expr())
        parts = []
        for key, coeff in sorted(self.terms.items(), reverse=True):
            mono = "*".join(f"{v}**{e}" if e > 1 else v for v, e in zip(self.variables, key) if e)
            parts.append(_scalar_str(coeff) + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"MultiPoly({self.variables}, {self})"


def _raw(variables: tuple[str, ...], terms: dict[Exponent, Any], is_exact: bool) -> MultiPoly:
    """Build a MultiPoly from already-clean terms without re-validating."""
    poly = object.__new__(MultiPoly)
    poly.variables = variables
    poly.terms = terms
    poly.exact = is_exact
    return poly


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def poly_eval(p: MultiPoly, point: Sequence[Any]) -> Any:
    """Evaluate p at a point.

    Exact when p is exact and every coordinate is exact; otherwise the
    complex-float mirror is used.
    """
    point = list(point)
    if len(point) != p.nvars:
        raise DimensionError(f"point has {len(point)} coordinates, polynomial has {p.nvars} variables")
    use_exact = p.exact and all(is_exact_scalar(x) for x in point)
    if use_exact:
        values = [as_exact(x) for x in point]
        total = QQ_I.zero
    else:
        values = [to_complex(x) for x in point]
        total = 0j
    powers: list[dict[int, Any]] = [{0: QQ_I.one if use_exact else 1 + 0j} for _ in values]

    def power(i: int, e: int) -> Any:
        cache = powers[i]
        if e not in cache:
            cache[e] = values[i] ** e
        return cache[e]

    for key, coeff in p.terms.items():
        term = coeff if use_exact else to_complex(coeff)
        for i, e in enumerate(key):
            if e:
                term = term * power(i, e)
        total = total + term
    return total


class CompiledPolys:
    """Vectorised numeric evaluator for a list of polynomials in shared variables."""

    def __init__(self, polys: Sequence[MultiPoly]) -> None:
        polys = list(polys)
        if not polys:
            raise DimensionError("nothing to compile")
        self.variables = polys[0].variables
        keys: dict[Exponent, int] = {}
        for p in polys:
            if p.variables != self.variables:
                raise DimensionError("compiled polynomials must share variables")
            for key in p.terms:
                keys.setdefault(key, len(keys))
        nterms = max(len(keys), 1)
        self.exponents = np.zeros((nterms, len(self.variables)), dtype=int)
        for key, idx in keys.items():
            self.exponents[idx] = key
        self.coefficients = np.zeros((len(polys), nterms), dtype=complex)
        for row, p in enumerate(polys):
            for key, coeff in p.terms.items():
                self.coefficients[row, keys[key]] = to_complex(coeff)

    def __call__(self, x: Sequence[complex] | np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        monomials = np.prod(x[None, :] ** self.exponents, axis=1)
        return self.coefficients @ monomials


def compile_jacobian(polys: Sequence[MultiPoly]) -> Callable[[np.ndarray], np.ndarray]:
    """Return a callable giving the numeric Jacobian matrix of polys."""
    polys = list(polys)
    m = polys[0].nvars
    flat = CompiledPolys([p.diff(v) for p in polys for v in p.variables])

    def jacobian(x: np.ndarray) -> np.ndarray:
        return flat(x).reshape(len(polys), m)

    return jacobian


# ---------------------------------------------------------------------------
# Polynomial matrices
# ---------------------------------------------------------------------------

PolyMatrix = list[list[MultiPoly]]


def poly_det(matrix: PolyMatrix) -> MultiPoly:
    """Determinant by Laplace expansion with memoised minors."""
    n = len(matrix)
    if n == 0:
        raise DimensionError("empty matrix")
    if any(len(row) != n for row in matrix):
        raise DimensionError("matrix is not square")
    variables = matrix[0][0].variables
    memo: dict[tuple[int, ...], MultiPoly] = {}

    def minor(row: int, cols: tuple[int, ...]) -> MultiPoly:
        if row == n:
            return MultiPoly.constant(variables, 1)
        if cols in memo:
            return memo[cols]
        total = MultiPoly.zero(variables, exact=matrix[0][0].exact)
        for pos, col in enumerate(cols):
            entry = matrix[row][col]
            if entry.is_zero():
                continue
            sub = minor(row + 1, cols[:pos] + cols[pos + 1 :])
            if sub.is_zero():
                continue
            term = entry * sub
            total = total - term if pos % 2 else total + term
        memo[cols] = total
        return total

    return minor(0, tuple(range(n)))


def poly_submatrix(matrix: PolyMatrix, rows: Sequence[int], cols: Sequence[int]) -> PolyMatrix:
    return [[matrix[r][c] for c in cols] for r in rows]


def poly_adjugate(matrix: PolyMatrix) -> PolyMatrix:
    """Adjugate: adj[j][i] = (-1)**(i+j) det(matrix without row i, column j)."""
    n = len(matrix)
    variables = matrix[0][0].variables
    if n == 1:
        return [[MultiPoly.constant(variables, 1)]]
    adj = [[MultiPoly.zero(variables) for _ in range(n)] for _ in range(n)]
    for i in range(n):
        rows = [r for r in range(n) if r != i]
        for j in range(n):
            cols = [c for c in range(n) if c != j]
            cofactor = poly_det(poly_submatrix(matrix, rows, cols))
            adj[j][i] = -cofactor if (i + j) % 2 else cofactor
    return adj


def poly_matvec(matrix: PolyMatrix, vector: Sequence[MultiPoly]) -> list[MultiPoly]:
    result = []
    for row in matrix:
        acc = MultiPoly.zero(vector[0].variables, exact=vector[0].exact)
        for entry, value in zip(row, vector):
            if entry and value:
                acc = acc + entry * value
        result.append(acc)
    return result


def poly_exact_quotient(a: MultiPoly, b: MultiPoly) -> MultiPoly | None:
    """a / b when b divides a over the Gaussian rationals, otherwise None."""
    b = a._lift(b)
    if b.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    if not (a.exact and b.exact):
        raise TypeError("exact division needs exact polynomials")
    if a.is_zero():
        return MultiPoly.zero(a.variables)
    if b.is_constant():
        return a * b.constant_term() ** -1
    symbols = sympy.symbols(a.variables)
    if isinstance(symbols, sympy.Symbol):
        symbols = (symbols,)
    numerator = sympy.Poly.from_dict(a.terms, *symbols, domain=QQ_I)
    denominator = sympy.Poly.from_dict(b.terms, *symbols, domain=QQ_I)
    try:
        quotient = numerator.exquo(denominator)
    except ExactQuotientFailed:
        return None
    return MultiPoly(a.variables, dict(quotient.terms()), exact=True)


def constant_matrix(values: Iterable[Iterable[Any]], variables: Sequence[str]) -> PolyMatrix:
    return [[MultiPoly.constant(variables, v) for v in row] for row in values]



def exponent_grid(bounds: Sequence[int]) -> list[Exponent]:
    """All exponent vectors with 0 <= e_i <= bounds[i]."""
    return [tuple(e) for e in cartesian(*(range(b + 1) for b in bounds))]
