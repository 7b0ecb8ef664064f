"""Hermite polynomials: univariate, homogenized, multivariate, and mixture-level.

The univariate family follows the probabilists' recurrence
H_m(x) = x H_{m-1}(x) - (m-1) H_{m-2}(x).  Homogenization replaces each
x^(m-2j) monomial by x^(m-2j) (y^2)^j so the two-variable family satisfies
exp(xz - y^2 z^2 / 2) = sum_m H_m(x, y^2) z^m / m!.  The multivariate kernel
is H_m(X, z) = H_m(z.X, ||X||^2), homogeneous of degree m in X, and a
mixture's degree-m Hermite polynomial is the expectation of that kernel over
z drawn from the mixture.

For a component with mean mu and covariance I + S the generating series
exp(a y + b y^2 / 2), a = mu.X, b = X^T S X, obeys the first-order recurrence
(m+1) g_{m+1} = a g_m + b g_{m-1}, which is how closed forms are produced in
both exact and float mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gaussians import GaussianMixture
from .polycore import (
    MultivariatePolynomial,
    graded_lex_monomials,
    monomial_multinomial,
    multiply,
    rational,
)


@dataclass(frozen=True)
class HermiteUnivariate:
    m: int
    coefficients: tuple  # coefficients[i] = integer coefficient of x^i

    def as_polynomial(self) -> MultivariatePolynomial:
        return MultivariatePolynomial(
            1, {(i,): c for i, c in enumerate(self.coefficients) if c != 0}, "exact")

    def evaluate(self, x: float) -> float:
        return float(sum(c * x**i for i, c in enumerate(self.coefficients)))


@dataclass(frozen=True)
class MixtureHermite:
    m: int
    polynomial: MultivariatePolynomial  # in X_1..X_d


def hermite_univariate(m: int) -> HermiteUnivariate:
    if m < 0:
        raise ValueError("order must be >= 0")
    prev2, prev1 = [1], [0, 1]  # H_0, H_1
    if m == 0:
        return HermiteUnivariate(0, (1,))
    if m == 1:
        return HermiteUnivariate(1, (0, 1))
    for order in range(2, m + 1):
        cur = [0] * (order + 1)
        for i, c in enumerate(prev1):
            cur[i + 1] += c
        for i, c in enumerate(prev2):
            cur[i] -= (order - 1) * c
        prev2, prev1 = prev1, cur
    return HermiteUnivariate(m, tuple(prev1))


def hermite_homogenized(m: int) -> MultivariatePolynomial:
    """H_m(x, y^2) as an exact polynomial in (x, y); y appears in even powers."""
    uni = hermite_univariate(m)
    terms = {}
    for i, c in enumerate(uni.coefficients):
        if c == 0:
            continue
        j = (m - i) // 2
        terms[(i, 2 * j)] = c
    return MultivariatePolynomial(2, terms, "exact")


def hermite_multivariate(m: int, d: int,
                         degree_cap: int | None = None) -> MultivariatePolynomial:
    """H_m(X, z) over 2d variables ordered (X_1..X_d, z_1..z_d).

    X-homogeneous of degree m; coefficients of X-monomials are integer
    polynomials in z.
    """
    if degree_cap is None:
        degree_cap = 2 * m + 2
    uni = hermite_univariate(m)
    n = 2 * d
    zx_terms = {}
    for i in range(d):
        e = [0] * n
        e[i] += 1
        e[d + i] += 1
        zx_terms[tuple(e)] = 1
    zx = MultivariatePolynomial(n, zx_terms, "exact")
    xsq = MultivariatePolynomial(
        n, {tuple(2 if j == i else 0 for j in range(n)): 1 for i in range(d)}, "exact")
    out = MultivariatePolynomial.zero(n, "exact")
    zx_pows = _powers(zx, m, degree_cap)
    xsq_pows = _powers(xsq, m // 2, degree_cap)
    for i, c in enumerate(uni.coefficients):
        if c == 0:
            continue
        j = (m - i) // 2
        out = out + multiply(zx_pows[i], xsq_pows[j], degree_cap).scale(c)
    return out


def _powers(p: MultivariatePolynomial, up_to: int, cap: int) -> list[MultivariatePolynomial]:
    pows = [MultivariatePolynomial.constant(p.d, 1, p.mode)]
    for _ in range(up_to):
        pows.append(multiply(pows[-1], p, cap))
    return pows


# --------------------------------------------------- closed-form mixture layer

@dataclass(frozen=True)
class IsotropicParams:
    """Mixture in the I + S covariance convention, exact or float mode.

    weights, means, cov_devs hold plain numbers (rationals in exact mode);
    cov_devs are the deviations S_i, i.e. full covariance minus identity.
    """

    weights: tuple
    means: tuple          # tuple of coordinate tuples
    cov_devs: tuple       # tuple of row-major symmetric matrices (nested tuples)
    mode: str = "exact"

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return len(self.means[0])

    @classmethod
    def from_mixture(cls, mix: GaussianMixture) -> "IsotropicParams":
        eye = np.eye(mix.d)
        return cls(
            tuple(float(w) for w in mix.weights),
            tuple(tuple(float(x) for x in g.mean) for g in mix.components),
            tuple(tuple(tuple(float(x) for x in row) for row in (g.cov - eye))
                  for g in mix.components),
            mode="float",
        )

    def component_forms(self) -> list[tuple[MultivariatePolynomial, MultivariatePolynomial]]:
        """(a_i, b_i) with a_i = mu_i . X and b_i = X^T S_i X."""
        out = []
        for mu, s in zip(self.means, self.cov_devs):
            a = MultivariatePolynomial.linear_form(mu, self.mode)
            b = MultivariatePolynomial.quadratic_form(s, self.mode)
            out.append((a, b))
        return out


def component_exp_series(a: MultivariatePolynomial, b: MultivariatePolynomial,
                         truncation: int,
                         degree_cap: int | None = None) -> list[MultivariatePolynomial]:
    """Series coefficients g_0..g_T of exp(a y + b y^2 / 2) in y.

    Driven by the recurrence (m+1) g_{m+1} = a g_m + b g_{m-1}; exact in
    rational mode.
    """
    if degree_cap is None:
        degree_cap = max(2, a.degree(), b.degree()) * truncation + 2
    g = [MultivariatePolynomial.constant(a.d, 1, a.mode)]
    for m in range(truncation):
        nxt = multiply(a, g[m], degree_cap)
        if m >= 1:
            nxt = nxt + multiply(b, g[m - 1], degree_cap)
        if a.mode == "exact":
            nxt = nxt.scale(rational(1, m + 1))
        else:
            nxt = nxt.scale(1.0 / (m + 1))
        g.append(nxt)
    return g


def mixture_hermite_closed_form(params: IsotropicParams | GaussianMixture,
                                m: int, truncation: int | None = None) -> MixtureHermite:
    """h_m as m! times the y^m coefficient of sum_i w_i exp(a_i y + b_i y^2/2)."""
    if isinstance(params, GaussianMixture):
        params = IsotropicParams.from_mixture(params)
    if truncation is None:
        truncation = m
    if m > truncation:
        raise ValueError(f"order {m} exceeds series truncation {truncation}")
    total = MultivariatePolynomial.zero(params.d, params.mode)
    for w, (a, b) in zip(params.weights, params.component_forms()):
        g = component_exp_series(a, b, m)
        total = total + g[m].scale(w)
    return MixtureHermite(m, total.scale(math.factorial(m)))


def mixture_hermite_all(params: IsotropicParams | GaussianMixture,
                        m_max: int) -> list[MixtureHermite]:
    """h_0..h_max in one series sweep."""
    if isinstance(params, GaussianMixture):
        params = IsotropicParams.from_mixture(params)
    totals = [MultivariatePolynomial.zero(params.d, params.mode)
              for _ in range(m_max + 1)]
    for w, (a, b) in zip(params.weights, params.component_forms()):
        g = component_exp_series(a, b, m_max)
        for m in range(m_max + 1):
            totals[m] = totals[m] + g[m].scale(w)
    return [MixtureHermite(m, t.scale(math.factorial(m)))
            for m, t in enumerate(totals)]


# ------------------------------------------------------------ empirical layer

@dataclass
class HermiteKernelStructure:
    """Evaluation plan for H_m(X, z): one row of z-monomial coefficients per
    X-monomial of degree m."""

    m: int
    d: int
    x_monomials: list[tuple]
    z_exponents: np.ndarray      # (n_z, d) distinct z exponent rows
    coeff_matrix: np.ndarray     # (n_x, n_z) integer coefficients


def hermite_kernel_structure(m: int, d: int) -> HermiteKernelStructure:
    kernel = hermite_multivariate(m, d)
    x_monos = [mono for mono in graded_lex_monomials(d, m) if sum(mono) == m]
    x_index = {mono: i for i, mono in enumerate(x_monos)}
    z_rows: dict[tuple, int] = {}
    entries = []
    for mono, coeff in kernel.terms.items():
        xm, zm = mono[:d], mono[d:]
        zi = z_rows.setdefault(zm, len(z_rows))
        entries.append((x_index[xm], zi, float(coeff)))
    coeff_matrix = np.zeros((len(x_monos), len(z_rows)))
    for xi, zi, c in entries:
        coeff_matrix[xi, zi] = c
    z_exponents = np.array(list(z_rows), dtype=int).reshape(len(z_rows), d)
    return HermiteKernelStructure(m, d, x_monos, z_exponents, coeff_matrix)


def hermite_sample_vectors(samples: np.ndarray, m: int,
                           weighting: str = "raw") -> tuple[np.ndarray, list[tuple]]:
    """Per-sample coefficient vectors of H_m(X, z_j), one row per sample.

    weighting scales each X-monomial column as in polycore.vectorize, so
    row means are directly comparable to vectorized closed forms.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n, d = samples.shape
    if n == 0:
        raise ValueError("empty sample set")
    st = hermite_kernel_structure(m, d)
    # z-monomial values per sample: products of powers of coordinates
    zvals = np.ones((n, st.z_exponents.shape[0]))
    for j in range(d):
        exps = st.z_exponents[:, j]
        mx = exps.max() if exps.size else 0
        if mx == 0:
            continue
        pows = np.ones((n, mx + 1))
        for e in range(1, mx + 1):
            pows[:, e] = pows[:, e - 1] * samples[:, j]
        zvals *= pows[:, exps]
    vecs = zvals @ st.coeff_matrix.T
    if weighting != "raw":
        from .polycore import _WEIGHTS

        w = np.array([_WEIGHTS[weighting](mono) for mono in st.x_monomials])
        vecs = vecs * w
    return vecs, st.x_monomials


def empirical_hermite(samples: np.ndarray, m: int) -> MixtureHermite:
    """Sample average of H_m(X, z_j) as a float-mode polynomial in X."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    vecs, monos = hermite_sample_vectors(samples, m, weighting="raw")
    mean = vecs.mean(axis=0)
    terms = {mono: c for mono, c in zip(monos, mean) if c != 0.0}
    return MixtureHermite(
        m, MultivariatePolynomial(samples.shape[1], terms, "float"))


def hermite_coefficients_csv(h: MixtureHermite, degree_bound: int | None = None) -> str:
    """CSV dump (monomial index, graded-lex position, coefficient)."""
    bound = degree_bound if degree_bound is not None else h.m
    order = graded_lex_monomials(h.polynomial.d, bound)
    lines = ["monomial,position,coefficient"]
    for pos, mono in enumerate(order):
        c = h.polynomial.terms.get(mono)
        if c is not None:
            tag = "*".join(f"x{i+1}^{e}" for i, e in enumerate(mono) if e) or "1"
            lines.append(f"{tag},{pos},{float(c)!r}")
    return "\n".join(lines) + "\n"
