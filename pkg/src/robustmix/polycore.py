"""Multivariate polynomial arithmetic with exact-rational and float coefficient modes.

A polynomial lives over variables X_1..X_d and is stored sparsely as a map
from exponent tuples (the degree vector of each monomial) to coefficients.
Exact mode uses arbitrary-precision rationals (gmpy2.mpq when available,
fractions.Fraction otherwise); float mode uses Python floats.  Exact mode is
the carrier for every symbolic identity in the generating-function layer;
float mode is what the estimators consume.

Vectorization maps a polynomial to a dense coefficient vector under a fixed
graded-lexicographic monomial order shared program-wide.  Three coefficient
weightings are supported:

  raw     coefficient as stored,
  tensor  coefficient / sqrt(multinomial(alpha)), the Frobenius norm of the
          symmetric coefficient tensor,
  series  tensor additionally scaled by 1/sqrt(|alpha|!), matching the
          1/m! normalization of generating-function series coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

try:
    from gmpy2 import mpq as _mpq

    def rational(x, y=None):
        return _mpq(x) if y is None else _mpq(x, y)

except ImportError:  # pragma: no cover
    def rational(x, y=None):
        return Fraction(x) if y is None else Fraction(x, y)


#: Default cap on the total degree any single operation may produce.
DEFAULT_DEGREE_CAP = 16

Monomial = tuple  # exponent tuple, one non-negative int per variable


class DegreeCapError(ValueError):
    """An operation would exceed the configured total-degree cap."""


class PolynomialModeError(ValueError):
    """Operands disagree on dimension or coefficient mode."""


def monomial_degree(mono: Monomial) -> int:
    return sum(mono)


def monomial_type(v: Sequence[int]) -> tuple:
    """Sorted multiset of the coordinates of an integer vector.

    Permutation-invariant by construction: monomial_type((1, 2)) equals
    monomial_type((2, 1)).
    """
    return tuple(sorted(v))


def monomial_multinomial(mono: Monomial) -> int:
    """Number of distinct orderings of the multiset underlying the monomial."""
    m = sum(mono)
    out = math.factorial(m)
    for a in mono:
        out //= math.factorial(a)
    return out


def graded_lex_monomials(d: int, degree_bound: int) -> list[Monomial]:
    """All exponent tuples of total degree <= degree_bound in graded-lex order.

    Degree ascends; within a degree, tuples sort with earlier variables
    carrying higher exponents first (x1^2, x1 x2, x2^2, ...).
    """
    out: list[Monomial] = []
    for deg in range(degree_bound + 1):
        out.extend(_homogeneous_monomials(d, deg))
    return out


def _homogeneous_monomials(d: int, deg: int) -> list[Monomial]:
    if d == 1:
        return [(deg,)]
    out = []
    for first in range(deg, -1, -1):
        for rest in _homogeneous_monomials(d - 1, deg - first):
            out.append((first,) + rest)
    return out


class MultivariatePolynomial:
    """Sparse polynomial in d variables, exact-rational or float coefficients.

    Zero coefficients are never stored; the zero polynomial has an empty term
    map.  Instances are treated as immutable values: every operation returns
    a fresh polynomial.
    """

    __slots__ = ("d", "mode", "terms")

    def __init__(self, d: int, terms: Mapping[Monomial, object] | None = None,
                 mode: str = "exact", _clean: bool = False):
        if mode not in ("exact", "float"):
            raise PolynomialModeError(f"unknown coefficient mode {mode!r}")
        self.d = d
        self.mode = mode
        if terms is None:
            self.terms = {}
        elif _clean:
            self.terms = dict(terms)
        else:
            conv = rational if mode == "exact" else float
            cleaned = {}
            for mono, coeff in terms.items():
                mono = tuple(int(e) for e in mono)
                if len(mono) != d or any(e < 0 for e in mono):
                    raise ValueError(f"bad exponent tuple {mono} for d={d}")
                c = conv(coeff)
                if c != 0:
                    cleaned[mono] = cleaned.get(mono, conv(0)) + c
            self.terms = {m: c for m, c in cleaned.items() if c != 0}

    # ---------------------------------------------------------------- basics

    @classmethod
    def zero(cls, d: int, mode: str = "exact") -> "MultivariatePolynomial":
        return cls(d, {}, mode, _clean=True)

    @classmethod
    def constant(cls, d: int, value, mode: str = "exact") -> "MultivariatePolynomial":
        return cls(d, {(0,) * d: value}, mode)

    @classmethod
    def variable(cls, d: int, idx: int, mode: str = "exact") -> "MultivariatePolynomial":
        exp = [0] * d
        exp[idx] = 1
        return cls(d, {tuple(exp): 1}, mode)

    @classmethod
    def linear_form(cls, coeffs: Sequence, mode: str = "exact") -> "MultivariatePolynomial":
        d = len(coeffs)
        terms = {}
        for i, c in enumerate(coeffs):
            if c != 0:
                exp = [0] * d
                exp[i] = 1
                terms[tuple(exp)] = c
        return cls(d, terms, mode)

    @classmethod
    def quadratic_form(cls, matrix, mode: str = "exact") -> "MultivariatePolynomial":
        """X^T A X for a symmetric matrix A (nested sequences or ndarray)."""
        d = len(matrix)
        terms = {}
        for i in range(d):
            for j in range(i, d):
                c = matrix[i][j] if i == j else matrix[i][j] + matrix[j][i]
                if c != 0:
                    exp = [0] * d
                    exp[i] += 1
                    exp[j] += 1
                    terms[tuple(exp)] = terms.get(tuple(exp), 0) + c
        return cls(d, terms, mode)

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; the zero polynomial reports degree 0."""
        return max((sum(m) for m in self.terms), default=0)

    def __eq__(self, other) -> bool:
        return (isinstance(other, MultivariatePolynomial) and self.d == other.d
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.d, frozenset(self.terms.items())))

    def _check_compatible(self, other: "MultivariatePolynomial"):
        if self.d != other.d:
            raise PolynomialModeError(f"dimension mismatch: {self.d} vs {other.d}")
        if self.mode != other.mode:
            raise PolynomialModeError(f"mode mismatch: {self.mode} vs {other.mode}")

    # ------------------------------------------------------------ arithmetic

    def __add__(self, other: "MultivariatePolynomial") -> "MultivariatePolynomial":
        self._check_compatible(other)
        out = dict(self.terms)
        for mono, coeff in other.terms.items():
            s = out.get(mono, 0) + coeff
            if s == 0:
                out.pop(mono, None)
            else:
                out[mono] = s
        return MultivariatePolynomial(self.d, out, self.mode, _clean=True)

    def __sub__(self, other: "MultivariatePolynomial") -> "MultivariatePolynomial":
        return self + (-other)

    def __neg__(self) -> "MultivariatePolynomial":
        return MultivariatePolynomial(
            self.d, {m: -c for m, c in self.terms.items()}, self.mode, _clean=True)

    def scale(self, scalar) -> "MultivariatePolynomial":
        conv = rational if self.mode == "exact" else float
        s = conv(scalar)
        if s == 0:
            return MultivariatePolynomial.zero(self.d, self.mode)
        return MultivariatePolynomial(
            self.d, {m: c * s for m, c in self.terms.items()}, self.mode, _clean=True)

    def __mul__(self, other) -> "MultivariatePolynomial":
        if not isinstance(other, MultivariatePolynomial):
            return self.scale(other)
        return multiply(self, other)

    __rmul__ = __mul__

    def pow(self, n: int, degree_cap: int | None = None) -> "MultivariatePolynomial":
        if n < 0:
            raise ValueError("negative power")
        out = MultivariatePolynomial.constant(self.d, 1, self.mode)
        base = self
        while n:
            if n & 1:
                out = multiply(out, base, degree_cap)
            n >>= 1
            if n:
                base = multiply(base, base, degree_cap)
        return out

    def evaluate(self, point: Sequence) -> object:
        conv = rational if self.mode == "exact" else float
        total = conv(0)
        pt = [conv(x) for x in point]
        for mono, coeff in self.terms.items():
            v = coeff
            for x, e in zip(pt, mono):
                if e:
                    v = v * x ** e
            total += v
        return total

    def substitute(self, replacements: dict[int, "MultivariatePolynomial"],
                   degree_cap: int | None = None) -> "MultivariatePolynomial":
        """Substitute polynomials for selected variables (by index)."""
        d_out = next(iter(replacements.values())).d
        out = MultivariatePolynomial.zero(d_out, self.mode)
        for mono, coeff in self.terms.items():
            term = MultivariatePolynomial.constant(d_out, coeff, self.mode)
            for i, e in enumerate(mono):
                if e == 0:
                    continue
                if i not in replacements:
                    raise ValueError(f"no replacement for variable {i}")
                term = multiply(term, replacements[i].pow(e, degree_cap), degree_cap)
            out = out + term
        return out

    def to_float(self) -> "MultivariatePolynomial":
        return MultivariatePolynomial(
            self.d, {m: float(c) for m, c in self.terms.items()}, "float", _clean=True)

    def to_exact(self, limit_denominator: int | None = None) -> "MultivariatePolynomial":
        terms = {}
        for m, c in self.terms.items():
            f = Fraction(c)
            if limit_denominator:
                f = f.limit_denominator(limit_denominator)
            terms[m] = rational(f.numerator, f.denominator)
        return MultivariatePolynomial(self.d, terms, "exact")

    def coefficient(self, mono: Monomial):
        return self.terms.get(tuple(mono), rational(0) if self.mode == "exact" else 0.0)

    def __repr__(self):
        return f"MultivariatePolynomial(d={self.d}, {format_polynomial(self)!r})"


# -------------------------------------------------------------- module-level ops

def add(p: MultivariatePolynomial, q: MultivariatePolynomial) -> MultivariatePolynomial:
    return p + q


def multiply(p: MultivariatePolynomial, q: MultivariatePolynomial,
             degree_cap: int | None = DEFAULT_DEGREE_CAP) -> MultivariatePolynomial:
    """Distributive product, exact in rational mode.

    degree_cap bounds the total degree of the result (None disables the
    check); exceeding it raises DegreeCapError rather than silently building
    a huge polynomial.
    """
    p._check_compatible(q)
    if p.is_zero() or q.is_zero():
        return MultivariatePolynomial.zero(p.d, p.mode)
    if degree_cap is not None and p.degree() + q.degree() > degree_cap:
        raise DegreeCapError(
            f"product degree {p.degree() + q.degree()} exceeds cap {degree_cap}")
    out: dict[Monomial, object] = {}
    q_items = list(q.terms.items())
    for mono_p, cp in p.terms.items():
        for mono_q, cq in q_items:
            mono = tuple(a + b for a, b in zip(mono_p, mono_q))
            v = out.get(mono)
            out[mono] = cp * cq if v is None else v + cp * cq
    out = {m: c for m, c in out.items() if c != 0}
    return MultivariatePolynomial(p.d, out, p.mode, _clean=True)


@dataclass
class CoefficientVector:
    """Dense coefficient vector in the shared graded-lex order."""

    entries: np.ndarray
    d: int
    degree_bound: int
    weighting: str = "raw"

    def norm_sq(self) -> float:
        return float(np.dot(self.entries, self.entries))

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())


_WEIGHTS: dict[str, Callable[[Monomial], float]] = {
    "raw": lambda mono: 1.0,
    "tensor": lambda mono: 1.0 / math.sqrt(monomial_multinomial(mono)),
    "series": lambda mono: 1.0 / math.sqrt(
        monomial_multinomial(mono) * math.factorial(sum(mono))),
}


def vectorize(p: MultivariatePolynomial, degree_bound: int,
              weighting: str = "raw") -> CoefficientVector:
    """Dense vectorization of p under the fixed graded-lex order."""
    if p.degree() > degree_bound:
        raise ValueError(f"degree {p.degree()} exceeds bound {degree_bound}")
    order = graded_lex_monomials(p.d, degree_bound)
    weight = _WEIGHTS[weighting]
    entries = np.zeros(len(order))
    for i, mono in enumerate(order):
        c = p.terms.get(mono)
        if c is not None:
            entries[i] = float(c) * weight(mono)
    return CoefficientVector(entries, p.d, degree_bound, weighting)


def coeff_norm_sq(p: MultivariatePolynomial, weighting: str = "raw") -> float:
    """||v(p)||^2 without materializing the dense vector."""
    weight = _WEIGHTS[weighting]
    return float(sum(float(c) ** 2 * weight(m) ** 2 for m, c in p.terms.items()))


def product_norm_ratio(f: MultivariatePolynomial, g: MultivariatePolynomial,
                       degree_cap: int | None = None) -> float:
    """||v(fg)||^2 / (||v(f)||^2 ||v(g)||^2), strictly positive for nonzero inputs.

    For fixed degree and dimension the ratio stays inside constant bounds;
    callers record the empirical extremes rather than asserting a constant.
    """
    if f.is_zero() or g.is_zero():
        raise ValueError("product_norm_ratio requires nonzero polynomials")
    fg = multiply(f, g, degree_cap)
    return coeff_norm_sq(fg) / (coeff_norm_sq(f) * coeff_norm_sq(g))


def dot_product_pairing(a: MultivariatePolynomial, b: MultivariatePolynomial,
                        c: MultivariatePolynomial, e: MultivariatePolynomial,
                        degree_cap: int | None = None) -> tuple[float, float]:
    """Returns (v(AB).v(CD), ||v(AC)|| * ||v(BD)||); lhs <= rhs for real inputs."""
    for other in (b, c, e):
        a._check_compatible(other)
    bound = max(1, a.degree() + b.degree(), c.degree() + e.degree(),
                a.degree() + c.degree(), b.degree() + e.degree())
    ab = vectorize(multiply(a, b, degree_cap), bound)
    cd = vectorize(multiply(c, e, degree_cap), bound)
    lhs = float(np.dot(ab.entries, cd.entries))
    rhs = math.sqrt(coeff_norm_sq(multiply(a, c, degree_cap))) * \
        math.sqrt(coeff_norm_sq(multiply(b, e, degree_cap)))
    return lhs, rhs


# ------------------------------------------------------------------ text format

def format_polynomial(p: MultivariatePolynomial) -> str:
    """Render as `coeff * x1^a1 ... xd^ad` terms joined by ` + `."""
    if p.is_zero():
        return "0"
    parts = []
    order = sorted(p.terms, key=lambda m: (sum(m), tuple(-e for e in m)))
    for mono in order:
        c = p.terms[mono]
        factors = [str(c)]
        for i, e in enumerate(mono):
            if e == 1:
                factors.append(f"x{i + 1}")
            elif e > 1:
                factors.append(f"x{i + 1}^{e}")
        parts.append(" * ".join(factors))
    return " + ".join(parts)


def parse_polynomial(text: str, d: int, mode: str = "exact") -> MultivariatePolynomial:
    """Inverse of format_polynomial (on its own output grammar)."""
    text = text.strip()
    if text == "0":
        return MultivariatePolynomial.zero(d, mode)
    terms: dict[Monomial, object] = {}
    for chunk in text.split("+"):
        factors = [f.strip() for f in chunk.strip().split("*")]
        exp = [0] * d
        coeff_text = factors[0]
        for f in factors[1:]:
            if "^" in f:
                name, power = f.split("^")
            else:
                name, power = f, "1"
            idx = int(name.lstrip("x")) - 1
            exp[idx] += int(power)
        if mode == "exact":
            if "/" in coeff_text:
                num, den = coeff_text.split("/")
                coeff = rational(int(num), int(den))
            else:
                coeff = rational(int(coeff_text))
        else:
            coeff = float(coeff_text)
        mono = tuple(exp)
        terms[mono] = terms.get(mono, 0) + coeff
    return MultivariatePolynomial(d, terms, mode)
