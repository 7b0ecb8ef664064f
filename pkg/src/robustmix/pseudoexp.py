"""Degree-bounded pseudoexpectations over polynomial constraint systems.

A ConstraintSystem is relaxed to a moment SDP: one PSD moment matrix over a
(possibly restricted) monomial basis, localizing blocks for inequalities,
and linear rows for equalities, solved by the dense interior-point engine in
sdp.py.  Every returned PseudoExpectation can be re-audited by an
independent checker that rebuilds the moment matrix from the raw moment
dictionary and spot-checks Cauchy-Schwarz on random pairs.

Two program builders live here: the parameter-solving program (component
linear/quadratic forms under Gram constraints plus Hermite-closeness) and
the clustering program (boolean sample weights whose selected subset must
have Gaussian-looking pair moments).  The parameter program is expressed
directly in the component mean forms mu~_i and flattened covariance forms
sigma~_i; orthonormal-basis variables u, v are eliminated by encoding their
Gram data <mu~_i, mu~_j> = <A_i, A_j> (same for B), which preserves the
feasible variety while keeping the monomial basis small enough for a dense
solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse

from . import sdp
from .gaussians import flatten_dim, flatten_pairs
from .polycore import (
    MultivariatePolynomial,
    _WEIGHTS,
    graded_lex_monomials,
    multiply,
)

DEFAULT_MONOMIAL_CAP = 3000

#: Hermite-closeness constraint count per component count ("sufficiently
#: large integer depending only on k"; a desk-scale choice, flagged in reports).
DEFAULT_C_TABLE = {1: 2, 2: 6, 3: 8}


class SizeCapError(ValueError):
    """The relaxation would exceed the dense-SDP monomial cap."""


class GuessValidityError(ValueError):
    """A parameter guess violates the separation / magnitude / weight rules."""


@dataclass
class ConstraintSystem:
    variables: list[str]
    equalities: list[MultivariatePolynomial]
    inequalities: list[MultivariatePolynomial]
    degree: int
    basis_filter: Callable[[tuple], bool] | None = None
    sampler: Callable[[np.random.Generator], np.ndarray] | None = None
    name: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def check_degrees(self):
        if self.degree % 2:
            raise ValueError("relaxation degree must be even")
        for p in self.equalities + self.inequalities:
            if p.degree() > self.degree:
                raise ValueError(
                    f"constraint degree {p.degree()} exceeds system degree "
                    f"{self.degree}")

    def to_debug_json(self) -> str:
        import json

        from .polycore import format_polynomial

        return json.dumps({
            "name": self.name,
            "variables": self.variables,
            "degree": self.degree,
            "equalities": [format_polynomial(q) for q in self.equalities],
            "inequalities": [format_polynomial(q) for q in self.inequalities],
            "metadata": {k: str(v) for k, v in self.metadata.items()},
        }, sort_keys=True, indent=1)


@dataclass
class Relaxation:
    system: ConstraintSystem
    basis: list[tuple]
    y_monomials: list[tuple]
    y_index: dict[tuple, int]
    blocks: list[sdp.MatrixBlock]
    scalars: sdp.ScalarRows | None
    e_mat: np.ndarray
    f_vec: np.ndarray
    dangling: int


def _monomial_of_product(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def build_relaxation(system: ConstraintSystem,
                     monomial_cap: int = DEFAULT_MONOMIAL_CAP) -> Relaxation:
    system.check_degrees()
    n = system.n_vars
    t = system.degree
    filt = system.basis_filter or (lambda mono: True)
    basis = [mono for mono in graded_lex_monomials(n, t // 2) if filt(mono)]
    y_index: dict[tuple, int] = {}

    def yid(mono: tuple) -> int:
        idx = y_index.get(mono)
        if idx is None:
            idx = len(y_index)
            y_index[mono] = idx
        return idx

    # moment matrix block
    rows, cols, vars_, coefs = [], [], [], []
    for i, bi in enumerate(basis):
        for j in range(i, len(basis)):
            v = yid(_monomial_of_product(bi, basis[j]))
            rows.append(i), cols.append(j), vars_.append(v), coefs.append(1.0)
            if j != i:
                rows.append(j), cols.append(i), vars_.append(v), coefs.append(1.0)
    blocks = [sdp.MatrixBlock(
        len(basis), np.zeros((len(basis), len(basis))),
        np.array(rows), np.array(cols), np.array(vars_), np.array(coefs),
        "moment")]

    # localizing blocks / scalar rows for inequalities
    s_rows, s_consts, s_labels = [], [], []
    for gi, g in enumerate(system.inequalities):
        dg = g.degree()
        mult = [m for m in basis if 2 * sum(m) + dg <= t]
        if len(mult) <= 1:
            row = {}
            for mono, coef in g.terms.items():
                row[yid(mono)] = row.get(yid(mono), 0.0) + float(coef)
            s_rows.append(row)
            s_consts.append(0.0)
            s_labels.append(f"ineq{gi}")
            continue
        r2, c2, v2, a2 = [], [], [], []
        for i, mi in enumerate(mult):
            for j in range(i, len(mult)):
                base = _monomial_of_product(mi, mult[j])
                for mono, coef in g.terms.items():
                    v = yid(_monomial_of_product(base, mono))
                    r2.append(i), c2.append(j), v2.append(v), a2.append(float(coef))
                    if j != i:
                        r2.append(j), c2.append(i), v2.append(v), a2.append(float(coef))
        blocks.append(sdp.MatrixBlock(
            len(mult), np.zeros((len(mult), len(mult))),
            np.array(r2), np.array(c2), np.array(v2), np.array(a2),
            f"loc{gi}"))

    # equality rows: Ey = f.  multipliers range over monomials already in play
    eq_rows: list[dict[int, float]] = []
    eq_rhs: list[float] = []
    one = tuple([0] * n)
    eq_rows.append({yid(one): 1.0})
    eq_rhs.append(1.0)
    known = list(y_index)  # snapshot before equality expansion
    for q in system.equalities:
        dq = q.degree()
        mults = [m for m in known if sum(m) + dq <= t]
        for mlt in mults:
            row: dict[int, float] = {}
            usable = True
            for mono, coef in q.terms.items():
                prod = _monomial_of_product(mlt, mono)
                if prod not in y_index and sum(prod) > t:
                    usable = False
                    break
                idx = yid(prod)
                row[idx] = row.get(idx, 0.0) + float(coef)
            if usable and row:
                eq_rows.append(row)
                eq_rhs.append(0.0)

    if len(y_index) > monomial_cap:
        raise SizeCapError(
            f"{len(y_index)} monomials exceed the cap {monomial_cap}")

    n_y = len(y_index)
    e_mat = np.zeros((len(eq_rows), n_y))
    for r, row in enumerate(eq_rows):
        for idx, coef in row.items():
            e_mat[r, idx] += coef
    scalars = None
    if s_rows:
        data, ri, ci = [], [], []
        for r, row in enumerate(s_rows):
            for idx, coef in row.items():
                ri.append(r), ci.append(idx), data.append(coef)
        scalars = sdp.ScalarRows(
            np.array(s_consts),
            scipy.sparse.csr_matrix((data, (ri, ci)), shape=(len(s_rows), n_y)),
            s_labels)

    y_monomials = list(y_index)
    covered = set()
    for blk in blocks:
        covered.update(blk.vars.tolist())
    dangling = n_y - len(covered)
    return Relaxation(system, basis, y_monomials, y_index, blocks, scalars,
                      e_mat, np.array(eq_rhs), dangling)


# --------------------------------------------------------------- result types

@dataclass
class PseudoExpectation:
    moment_values: dict[tuple, float]
    basis: list[tuple]
    n_vars: int
    degree: int
    status: str = "optimal"
    objective_value: float | None = None
    gap: float = 0.0
    residuals: dict = field(default_factory=dict)
    raw_y: np.ndarray | None = None

    def expectation(self, poly: MultivariatePolynomial) -> float:
        total = 0.0
        for mono, coef in poly.terms.items():
            if mono not in self.moment_values:
                raise KeyError(f"monomial {mono} outside the moment support")
            total += float(coef) * self.moment_values[mono]
        return total

    def moment_matrix(self) -> np.ndarray:
        nb = len(self.basis)
        m = np.empty((nb, nb))
        for i, bi in enumerate(self.basis):
            for j in range(i, nb):
                m[i, j] = m[j, i] = self.moment_values[
                    _monomial_of_product(bi, self.basis[j])]
        return m

    def linear_moment(self, var_idx: int) -> float:
        mono = tuple(1 if i == var_idx else 0 for i in range(self.n_vars))
        return self.moment_values.get(mono, 0.0)

    def pair_moment(self, i: int, j: int) -> float:
        mono = [0] * self.n_vars
        mono[i] += 1
        mono[j] += 1
        return self.moment_values.get(tuple(mono), 0.0)


@dataclass
class Infeasible:
    status: str  # "infeasible" or "marginal"
    phase1_slack: float
    message: str = ""

    def __bool__(self):
        return False


def dirac(point: np.ndarray, system: ConstraintSystem,
          monomial_cap: int = DEFAULT_MONOMIAL_CAP) -> PseudoExpectation:
    """Point-evaluation pseudoexpectation on the system's moment support."""
    relax = build_relaxation(system, monomial_cap)
    pt = np.asarray(point, float)
    values = {}
    for mono in relax.y_monomials:
        v = 1.0
        for x, e in zip(pt, mono):
            if e:
                v *= x ** e
        values[mono] = v
    pe = PseudoExpectation(values, relax.basis, system.n_vars, system.degree,
                           status="dirac")
    pe.residuals = constraint_residuals(pe, system)
    return pe


def constraint_residuals(pe: PseudoExpectation,
                         system: ConstraintSystem) -> dict:
    eq = 0.0
    for q in system.equalities:
        try:
            eq = max(eq, abs(pe.expectation(q)))
        except KeyError:
            pass
    ineq = math.inf
    for g in system.inequalities:
        try:
            ineq = min(ineq, pe.expectation(g))
        except KeyError:
            pass
    eigs = np.linalg.eigvalsh(pe.moment_matrix())
    return {"equality_max": eq,
            "inequality_min": None if ineq is math.inf else ineq,
            "psd_min_eig": float(eigs[0])}


def solve(system: ConstraintSystem,
          objective: MultivariatePolynomial | None = None,
          options: sdp.SDPOptions | None = None,
          monomial_cap: int = DEFAULT_MONOMIAL_CAP,
          trace_center: float = 0.0,
          warm_points: int = 0,
          seed: int = 0,
          warm_vector: np.ndarray | None = None,
          relaxation: Relaxation | None = None) -> PseudoExpectation | Infeasible:
    """Relax and solve; feasibility problems return the analytic center.

    trace_center > 0 adds a -trace(M) pull on feasibility solves (a
    trace-regularized center).  warm_points > 0 averages that many Dirac
    moment vectors from system.sampler into the interior-point warm start;
    warm_vector supplies a raw moment vector directly (e.g. the previous
    solution when only the objective changed).  Passing a prebuilt
    relaxation skips the build.
    """
    relax = relaxation or build_relaxation(system, monomial_cap)
    n_y = len(relax.y_monomials)
    b = None
    if objective is not None:
        b = np.zeros(n_y)
        for mono, coef in objective.terms.items():
            idx = relax.y_index.get(mono)
            if idx is None:
                raise KeyError(f"objective monomial {mono} not in support")
            b[idx] += float(coef)
    elif trace_center > 0:
        b = np.zeros(n_y)
        for mono in (m for m in relax.basis):
            sq = _monomial_of_product(mono, mono)
            b[relax.y_index[sq]] -= trace_center
    warm = warm_vector
    if warm is None and warm_points and system.sampler is not None:
        rng = np.random.default_rng(seed)
        warm = moment_vector_of_samples(
            relax, [system.sampler(rng) for _ in range(warm_points)])
    res = sdp.solve_lmi(relax.blocks, n_y, objective=b, scalars=relax.scalars,
                        equalities=(relax.e_mat, relax.f_vec),
                        warm_start=warm, options=options)
    if res.status in ("infeasible", "marginal"):
        return Infeasible(res.status, res.phase1_slack, res.message)
    values = {mono: float(res.y[idx]) for mono, idx in relax.y_index.items()}
    pe = PseudoExpectation(values, relax.basis, system.n_vars, system.degree,
                           status=res.status,
                           objective_value=res.objective, gap=res.gap)
    pe.raw_y = res.y
    pe.residuals = constraint_residuals(pe, system)
    pe.residuals["newton_steps"] = res.newton_steps
    pe.residuals["dangling_monomials"] = relax.dangling
    return pe


def moment_vector_of_samples(relax: Relaxation, points) -> np.ndarray:
    """Average Dirac moment vector of the given assignments."""
    n_y = len(relax.y_monomials)
    acc = np.zeros(n_y)
    for pt in points:
        pt = np.asarray(pt, float)
        vec = np.ones(n_y)
        for idx, mono in enumerate(relax.y_monomials):
            v = 1.0
            for x, e in zip(pt, mono):
                if e:
                    v *= x ** e
            vec[idx] = v
        acc += vec
    return acc / max(1, len(points))


# --------------------------------------------------------- independent checker

@dataclass
class CheckReport:
    ok: bool
    unit_value: float
    psd_min_eig: float
    cauchy_schwarz_margin: float
    failures: list[str] = field(default_factory=list)


def check_pseudoexpectation(pe: PseudoExpectation, n_pairs: int = 100,
                            tol_psd: float = 1e-6, tol_cs: float = 1e-7,
                            seed: int = 0) -> CheckReport:
    """Audit a pseudoexpectation from its raw moment dictionary alone.

    Checks E~[1] = 1, PSD-ness of the rebuilt moment matrix, and
    Cauchy-Schwarz E~[fg] <= sqrt(E~[f^2] E~[g^2]) on random low-degree
    pairs, with every expectation computed by direct monomial lookup.
    """
    failures = []
    one = tuple([0] * pe.n_vars)
    unit = pe.moment_values.get(one, 0.0)
    if abs(unit - 1.0) > 1e-7:
        failures.append(f"E[1] = {unit}")
    min_eig = float(np.linalg.eigvalsh(pe.moment_matrix())[0])
    if min_eig < -tol_psd:
        failures.append(f"moment matrix eigenvalue {min_eig}")
    rng = np.random.default_rng(seed)
    margin = math.inf
    half = [m for m in pe.basis if 2 * sum(m) <= pe.degree]
    for _ in range(n_pairs):
        f = _random_combo(half, pe.n_vars, rng)
        g = _random_combo(half, pe.n_vars, rng)
        try:
            e_fg = pe.expectation(multiply(f, g, None))
            ff = pe.expectation(multiply(f, f, None))
            gg = pe.expectation(multiply(g, g, None))
        except KeyError:
            continue
        rhs = math.sqrt(max(ff, 0.0) * max(gg, 0.0))
        margin = min(margin, rhs - abs(e_fg))
        if abs(e_fg) > rhs + tol_cs + 1e-9 * (1 + rhs):
            failures.append(f"Cauchy-Schwarz violated by {abs(e_fg) - rhs:.3g}")
            break
    return CheckReport(not failures, unit, min_eig,
                       margin if margin is not math.inf else 0.0, failures)


def _random_combo(basis: list[tuple], n: int, rng) -> MultivariatePolynomial:
    picks = rng.choice(len(basis), size=min(3, len(basis)), replace=False)
    terms = {}
    for idx in picks:
        terms[basis[idx]] = rng.standard_normal()
    return MultivariatePolynomial(n, terms, "float")


# ------------------------------------------------------- parameter program

@dataclass(frozen=True)
class HermiteTarget:
    """Series-weighted coefficient vector of a degree-p Hermite polynomial."""

    p: int
    vector: np.ndarray
    monomials: tuple


def hermite_targets_from_params(params, c_count: int) -> dict[int, HermiteTarget]:
    """Exact targets from a known mixture (synthetic-instance path)."""
    from .hermite import mixture_hermite_all

    hs = mixture_hermite_all(params, c_count)
    out = {}
    for p in range(1, c_count + 1):
        monos = [m for m in graded_lex_monomials(hs[p].polynomial.d, p)
                 if sum(m) == p]
        w = np.array([_WEIGHTS["series"](m) for m in monos])
        vec = np.array([float(hs[p].polynomial.terms.get(m, 0.0)) for m in monos])
        out[p] = HermiteTarget(p, vec * w, tuple(monos))
    return out


def hermite_targets_from_estimates(estimates, c_count: int) -> dict[int, HermiteTarget]:
    """Targets from robust estimation output (HermiteEstimates)."""
    out = {}
    for p in range(1, c_count + 1):
        rh = estimates.per_degree[p - 1]
        if rh.weighting != "series":
            raise ValueError("parameter program expects series weighting")
        out[p] = HermiteTarget(p, rh.vector.copy(), tuple(rh.monomials))
    return out


def _component_blocks(k: int, d: int) -> list[list[int]]:
    """Variable indices per component: [m_i (d), s_i (D)] concatenated."""
    dd = flatten_dim(d)
    blocks = []
    for i in range(k):
        m_slice = list(range(i * d, (i + 1) * d))
        s_slice = list(range(k * d + i * dd, k * d + (i + 1) * dd))
        blocks.append(m_slice + s_slice)
    return blocks


def validate_guess(weights: np.ndarray, a_mat: np.ndarray, b_mat: np.ndarray,
                   c_sep: float, delta_bound: float, w_min: float):
    k = len(weights)
    if np.any(weights < w_min / 2 - 1e-12):
        raise GuessValidityError("guessed weight below w_min / 2")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise GuessValidityError("guessed weights must sum to 1")
    for mat, tag in ((a_mat, "A"), (b_mat, "B")):
        for i in range(k):
            if np.linalg.norm(mat[i]) > 2 * delta_bound + 1e-12:
                raise GuessValidityError(f"||{tag}_{i}|| exceeds 2*Delta")
            for j in range(i + 1, k):
                gap = np.linalg.norm(mat[i] - mat[j])
                if 1e-12 < gap < c_sep / 2 - 1e-12:
                    raise GuessValidityError(
                        f"{tag}_{i}, {tag}_{j} neither equal nor c/2-separated")


def build_parameter_program(weights: np.ndarray, a_mat: np.ndarray,
                            b_mat: np.ndarray,
                            targets: dict[int, HermiteTarget],
                            eps_prime: float, k: int, d: int,
                            c_sep: float = 1.0, delta_bound: float = 2.0,
                            w_min: float = 0.2,
                            c_count: int | None = None,
                            degree: int | None = None,
                            norm_ball_max_degree: int = 4) -> ConstraintSystem:
    """Hermite-closeness program over component forms.

    Variables are the mean forms mu~_i in R^d and flattened covariance forms
    sigma~_i in R^D; the guessed coordinate matrices A, B enter through Gram
    equality constraints <mu~_i, mu~_j> = <A_i, A_j> (same for B with
    sigma~).  For p up to c_count the hypothetical Hermite polynomial must
    match the target: exactly as the norm-ball ||v(h~_p - hbar_p)||^2 <=
    100 eps' when 2p fits the relaxation degree, coefficientwise with radius
    sqrt(100 eps') otherwise; orders whose degree exceeds the relaxation are
    skipped and recorded in metadata["skipped_orders"].
    """
    weights = np.asarray(weights, float)
    a_mat = np.asarray(a_mat, float)
    b_mat = np.asarray(b_mat, float)
    validate_guess(weights, a_mat, b_mat, c_sep, delta_bound, w_min)
    if c_count is None:
        c_count = DEFAULT_C_TABLE[k]
    dd = flatten_dim(d)
    n = k * (d + dd)
    if degree is None:
        degree = 4
    names = [f"mu{i + 1}_{l + 1}" for i in range(k) for l in range(d)]
    names += [f"sig{i + 1}_{a + 1}{b + 1}" for i in range(k)
              for (a, b) in flatten_pairs(d)]

    gram_m = a_mat @ a_mat.T
    gram_s = b_mat @ b_mat.T
    equalities = []
    for i in range(k):
        for j in range(i, k):
            terms = {}
            for l in range(d):
                mono = [0] * n
                mono[i * d + l] += 1
                mono[j * d + l] += 1
                terms[tuple(mono)] = terms.get(tuple(mono), 0.0) + 1.0
            terms[tuple([0] * n)] = -gram_m[i, j]
            equalities.append(MultivariatePolynomial(n, terms, "float"))
            terms = {}
            for c in range(dd):
                mono = [0] * n
                mono[k * d + i * dd + c] += 1
                mono[k * d + j * dd + c] += 1
                terms[tuple(mono)] = terms.get(tuple(mono), 0.0) + 1.0
            terms[tuple([0] * n)] = -gram_s[i, j]
            equalities.append(MultivariatePolynomial(n, terms, "float"))

    # symbolic Hermite coefficients over the joint (X, vars) ring
    coeff_polys = _symbolic_hermite_coefficients(weights, k, d, n, c_count)
    inequalities = []
    skipped = []
    slack = 100.0 * eps_prime
    for p in range(1, c_count + 1):
        target = targets[p]
        monos = target.monomials
        w_arr = np.array([_WEIGHTS["series"](m) for m in monos])
        residuals = []
        for mono, wgt, tval in zip(monos, w_arr, target.vector):
            q = coeff_polys[p].get(mono,
                                   MultivariatePolynomial.zero(n, "float"))
            residuals.append(q.scale(wgt)
                             - MultivariatePolynomial.constant(n, tval, "float"))
        if 2 * p <= min(norm_ball_max_degree, degree):
            total = MultivariatePolynomial.constant(n, slack, "float")
            for r in residuals:
                total = total - multiply(r, r, None)
            inequalities.append(total)
        elif p <= degree:
            tau = math.sqrt(slack)
            for r in residuals:
                tau_p = MultivariatePolynomial.constant(n, tau, "float")
                inequalities.append(tau_p - r)
                inequalities.append(tau_p + r)
        else:
            skipped.append(p)

    blocks = _component_blocks(k, d)
    var_comp = np.empty(n, dtype=int)
    for ci, idxs in enumerate(blocks):
        var_comp[idxs] = ci

    def basis_filter(mono: tuple) -> bool:
        deg = sum(mono)
        if deg <= 2:
            return True
        comps = {var_comp[i] for i, e in enumerate(mono) if e}
        return len(comps) == 1

    sampler = _gram_sampler(weights, a_mat, b_mat, k, d)
    system = ConstraintSystem(
        names, equalities, inequalities, degree,
        basis_filter=basis_filter if n > 6 else None,
        sampler=sampler, name=f"parameter-program-k{k}-d{d}",
        metadata={"skipped_orders": skipped, "c_count": c_count,
                  "eps_prime": eps_prime, "weights": weights.tolist(),
                  "A": a_mat.tolist(), "B": b_mat.tolist()})
    return system


def _symbolic_hermite_coefficients(weights, k, d, n, c_count
                                   ) -> list[dict[tuple, MultivariatePolynomial]]:
    """coeff_polys[p][x_mono] = polynomial in the program variables.

    Built from the series recurrence (m+1) g_{m+1} = a g_m + b g_{m-1} over
    the joint ring with X variables first, then stripped of the X part.
    """
    from .hermite import component_exp_series

    joint = d + n
    dd = flatten_dim(d)
    pairs = flatten_pairs(d)
    totals = [MultivariatePolynomial.zero(joint, "float")
              for _ in range(c_count + 1)]
    for i in range(k):
        a_terms = {}
        for l in range(d):
            mono = [0] * joint
            mono[l] = 1
            mono[d + i * d + l] = 1
            a_terms[tuple(mono)] = 1.0
        b_terms = {}
        for c, (p1, p2) in enumerate(pairs):
            mono = [0] * joint
            mono[p1] += 1
            mono[p2] += 1
            mono[d + k * d + i * dd + c] = 1
            b_terms[tuple(mono)] = 1.0
        a = MultivariatePolynomial(joint, a_terms, "float")
        b = MultivariatePolynomial(joint, b_terms, "float")
        g = component_exp_series(a, b, c_count, degree_cap=3 * c_count + 2)
        for p in range(c_count + 1):
            totals[p] = totals[p] + g[p].scale(float(weights[i]))
    out = []
    for p in range(c_count + 1):
        scaled = totals[p].scale(math.factorial(p))
        grouped: dict[tuple, dict[tuple, float]] = {}
        for mono, coef in scaled.terms.items():
            xm, vm = mono[:d], mono[d:]
            grouped.setdefault(xm, {})[vm] = float(coef)
        out.append({xm: MultivariatePolynomial(n, terms, "float")
                    for xm, terms in grouped.items()})
    return out


def _gram_sampler(weights, a_mat, b_mat, k, d):
    dd = flatten_dim(d)

    def sampler(rng: np.random.Generator) -> np.ndarray:
        qm = np.linalg.qr(rng.standard_normal((d, d)))[0][:, :k].T  # k x d rows
        qs = np.linalg.qr(rng.standard_normal((dd, dd)))[0][:, :k].T
        ms = a_mat @ qm
        ss = b_mat @ qs
        return np.concatenate([ms.reshape(-1), ss.reshape(-1)])

    return sampler


def build_means_program(weights: np.ndarray, a_mat: np.ndarray,
                        cov_flats: np.ndarray,
                        targets: dict[int, HermiteTarget],
                        eps_prime: float, k: int, d: int,
                        c_sep: float = 1.0, delta_bound: float = 2.0,
                        w_min: float = 0.2,
                        c_count: int | None = None,
                        degree: int | None = None,
                        norm_ball_max_degree: int | None = None) -> ConstraintSystem:
    """Means-only variant: covariances fixed to numeric flattened values.

    Variables are just the mean forms mu~_i; the component quadratic forms
    b_i come from cov_flats (k x D), so the hypothetical Hermite coefficients
    are polynomials in the means alone.
    """
    weights = np.asarray(weights, float)
    a_mat = np.asarray(a_mat, float)
    cov_flats = np.asarray(cov_flats, float)
    validate_guess(weights, a_mat, a_mat, c_sep, delta_bound, w_min)
    if c_count is None:
        c_count = DEFAULT_C_TABLE[k]
    n = k * d
    if degree is None:
        degree = 6 if n <= 4 else 4
    if norm_ball_max_degree is None:
        norm_ball_max_degree = degree
    names = [f"mu{i + 1}_{l + 1}" for i in range(k) for l in range(d)]
    gram_m = a_mat @ a_mat.T
    equalities = []
    for i in range(k):
        for j in range(i, k):
            terms = {}
            for l in range(d):
                mono = [0] * n
                mono[i * d + l] += 1
                mono[j * d + l] += 1
                terms[tuple(mono)] = terms.get(tuple(mono), 0.0) + 1.0
            terms[tuple([0] * n)] = -gram_m[i, j]
            equalities.append(MultivariatePolynomial(n, terms, "float"))

    coeff_polys = _symbolic_means_hermite(weights, cov_flats, k, d, n, c_count)
    inequalities = []
    skipped = []
    slack = 100.0 * eps_prime
    for p in range(1, c_count + 1):
        target = targets[p]
        residuals = []
        for mono, tval in zip(target.monomials, target.vector):
            wgt = _WEIGHTS["series"](mono)
            q = coeff_polys[p].get(mono, MultivariatePolynomial.zero(n, "float"))
            residuals.append(q.scale(wgt)
                             - MultivariatePolynomial.constant(n, tval, "float"))
        if 2 * p <= min(norm_ball_max_degree, degree):
            total = MultivariatePolynomial.constant(n, slack, "float")
            for r in residuals:
                total = total - multiply(r, r, None)
            inequalities.append(total)
        elif p <= degree:
            tau = math.sqrt(slack)
            for r in residuals:
                tau_p = MultivariatePolynomial.constant(n, tau, "float")
                inequalities.append(tau_p - r)
                inequalities.append(tau_p + r)
        else:
            skipped.append(p)

    def sampler(rng: np.random.Generator) -> np.ndarray:
        qm = np.linalg.qr(rng.standard_normal((d, d)))[0][:, :k].T
        return (a_mat @ qm).reshape(-1)

    return ConstraintSystem(
        names, equalities, inequalities, degree, sampler=sampler,
        name=f"means-program-k{k}-d{d}",
        metadata={"skipped_orders": skipped, "c_count": c_count,
                  "eps_prime": eps_prime})


def _symbolic_means_hermite(weights, cov_flats, k, d, n, c_count
                            ) -> list[dict[tuple, MultivariatePolynomial]]:
    from .hermite import component_exp_series

    joint = d + n
    pairs = flatten_pairs(d)
    totals = [MultivariatePolynomial.zero(joint, "float")
              for _ in range(c_count + 1)]
    for i in range(k):
        a_terms = {}
        for l in range(d):
            mono = [0] * joint
            mono[l] = 1
            mono[d + i * d + l] = 1
            a_terms[tuple(mono)] = 1.0
        b_terms = {}
        for c, (p1, p2) in enumerate(pairs):
            if cov_flats[i, c] == 0.0:
                continue
            mono = [0] * joint
            mono[p1] += 1
            mono[p2] += 1
            b_terms[tuple(mono)] = float(cov_flats[i, c])
        a = MultivariatePolynomial(joint, a_terms, "float")
        b = MultivariatePolynomial(joint, b_terms, "float")
        g = component_exp_series(a, b, c_count, degree_cap=3 * c_count + 2)
        for p in range(c_count + 1):
            totals[p] = totals[p] + g[p].scale(float(weights[i]))
    out = []
    for p in range(c_count + 1):
        scaled = totals[p].scale(math.factorial(p))
        grouped: dict[tuple, dict[tuple, float]] = {}
        for mono, coef in scaled.terms.items():
            xm, vm = mono[:d], mono[d:]
            grouped.setdefault(xm, {})[vm] = float(coef)
        out.append({xm: MultivariatePolynomial(n, terms, "float")
                    for xm, terms in grouped.items()})
    return out


# ------------------------------------------------------- clustering program

@dataclass
class ClusteringProgram:
    system: ConstraintSystem
    samples: np.ndarray
    probes: np.ndarray
    thetas: np.ndarray
    k: int
    eps: float


def build_clustering_program(samples: np.ndarray, k: int, t: int = 4,
                             delta: float = 0.1, eps: float = 0.0,
                             mode: str = "reduced", n_probes: int = 8,
                             theta_safety: float = 4.0,
                             seed: int = 0,
                             monomial_cap: int = DEFAULT_MONOMIAL_CAP):
    """Select-a-cluster program over boolean weights w_1..w_n.

    Reduced mode (the solver path): booleanity w_i^2 = w_i, counting
    n/k - eps*n <= sum w <= n/k, and for a set of probe directions v the
    pair-moment conditions theta_v * Q2_v(w) - Q4_v(w) >= 0 where
    Q2, Q4 are the selected subset's second / fourth moments of pair
    differences along v.  A subset mixing two separated clusters has
    Q4/Q2 far above the Gaussian ratio and is cut off; theta_v is
    calibrated from a lower quantile of the observed pair statistics.

    Full mode returns a FullClusteringFamily residual evaluator carrying the
    entire constraint family (z / X' / matrix square-root variables); it is a
    fidelity check, not a solver path.
    """
    x = np.atleast_2d(np.asarray(samples, float))
    n, d = x.shape
    if mode == "full":
        return FullClusteringFamily(x, k, t, delta, eps)
    if mode != "reduced":
        raise ValueError(f"unknown mode {mode!r}")
    if 1 + n + n * (n + 1) // 2 > monomial_cap + n + 1:
        raise SizeCapError(f"n={n} exceeds the reduced-mode cap")
    rng = np.random.default_rng(seed)
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    probes = [vt[i] for i in range(min(2, vt.shape[0]))]
    while len(probes) < n_probes:
        v = rng.standard_normal(d)
        probes.append(v / np.linalg.norm(v))
    probes = np.array(probes)

    names = [f"w{i + 1}" for i in range(n)]
    equalities = []
    for i in range(n):
        mono_lin = [0] * n
        mono_lin[i] = 1
        mono_sq = [0] * n
        mono_sq[i] = 2
        equalities.append(MultivariatePolynomial(
            n, {tuple(mono_sq): 1.0, tuple(mono_lin): -1.0}, "float"))
    inequalities = []
    count_terms = {}
    for i in range(n):
        mono = [0] * n
        mono[i] = 1
        count_terms[tuple(mono)] = 1.0 / n  # normalized to O(1) scale
    total_w = MultivariatePolynomial(n, count_terms, "float")
    # multinomial cluster sizes fluctuate by ~sqrt(n)/k around n/k; the
    # counting window covers that plus the eps corruption budget
    size_sd = math.sqrt(max(k - 1, 0) / (k * k * n))
    lo = 1.0 / k - eps - 2.5 * size_sd - 1e-9
    hi = 1.0 / k + 2.5 * size_sd + 1e-9
    inequalities.append(total_w - MultivariatePolynomial.constant(n, lo, "float"))
    inequalities.append(MultivariatePolynomial.constant(n, hi, "float")
                        - total_w)

    thetas = []
    for v in probes:
        proj = x @ v
        diffs = proj[:, None] - proj[None, :]
        d2 = diffs ** 2
        # within-cluster scale: per-point quantile distances at the largest
        # level that still looks unimodal (a split probe shows a huge jump
        # between the within-cluster band and the cross-cluster band), so the
        # estimate tracks the within-cluster median whether or not this
        # probe separates; median(2 sigma^2 chi^2_1) = 0.455 * 2 sigma^2
        # converts to the Gaussian ratio E[d^4]/E[d^2] = 6 sigma^2
        off = d2 + np.diag(np.full(n, np.nan))
        levels = sorted({0.5, 0.25, 0.5 / k})
        q_meds = {lv: max(float(np.median(np.nanquantile(off, lv, axis=1))),
                          1e-12) for lv in levels}
        base = q_meds[levels[0]]
        bulk = max(q for q in q_meds.values() if q <= 50.0 * base)
        theta = theta_safety * (6.0 / 0.455 / 2.0) * bulk
        # clip squared distances so no single pair (e.g. an adversarial
        # spike) dominates the statistic; the exploit of offsetting large
        # negative coefficients with slightly negative pair pseudo-moments
        # dies once coefficient magnitudes are uniform
        cap = 8.0 * theta
        m2 = np.minimum(d2, cap)
        coefs = theta * m2 - m2 ** 2
        norm = max(float(np.abs(coefs).max()), 1e-12)
        thetas.append(theta)
        terms: dict[tuple, float] = {}
        for i in range(n):
            for j in range(i + 1, n):
                mono = [0] * n
                mono[i] = 1
                mono[j] = 1
                c = 2.0 * coefs[i, j] / norm
                if c != 0.0:
                    terms[tuple(mono)] = c
        inequalities.append(MultivariatePolynomial(n, terms, "float"))
        # per-anchor rows: the same statistic restricted to pairs through
        # one point cannot be offset by negative mass elsewhere
        row_coefs = 2.0 * theta * m2 - m2 ** 2
        for i in range(n):
            terms = {}
            for j in range(n):
                if j == i:
                    continue
                mono = [0] * n
                mono[i] += 1
                mono[j] += 1
                c = row_coefs[i, j] / norm
                if c != 0.0:
                    terms[tuple(mono)] = c
            if terms:
                inequalities.append(MultivariatePolynomial(n, terms, "float"))

    target = n / k

    def sampler(rng2: np.random.Generator) -> np.ndarray:
        w = np.zeros(n)
        take = int(round(target - eps * n / 2))
        w[rng2.choice(n, size=max(1, take), replace=False)] = 1.0
        return w

    system = ConstraintSystem(
        names, equalities, inequalities, 2, sampler=sampler,
        name=f"clustering-reduced-n{n}-k{k}",
        metadata={"t": t, "delta": delta, "eps": eps,
                  "thetas": [float(th) for th in thetas]})
    return ClusteringProgram(system, x, probes, np.array(thetas), k, eps)


def solve_clustering_moments(prog: ClusteringProgram,
                             objective_weights: np.ndarray,
                             options: sdp.SDPOptions | None = None
                             ) -> PseudoExpectation | Infeasible:
    """Degree-2 clustering solve via the splitting (ADMM) conic solver.

    The moment matrix over the basis {1, w_1..w_n} is the primal variable
    directly.  Entrywise nonnegativity (valid for boolean weights, and what
    blocks the exploit of offsetting probe constraints with negative pair
    pseudo-moments) is part of the cone, and projection-based iterations are
    robust to the degenerate optimal faces these instances produce.
    """
    x = prog.samples
    n = x.shape[0]
    nb = n + 1

    def poly_to_matrix(poly: MultivariatePolynomial):
        mat = np.zeros((nb, nb))
        const = 0.0
        for mono, coef in poly.terms.items():
            deg = sum(mono)
            c = float(coef)
            if deg == 0:
                const += c
            elif deg == 1:
                i = mono.index(1) + 1
                mat[0, i] += c / 2.0
                mat[i, 0] += c / 2.0
            else:
                ij = [pos for pos, e in enumerate(mono) for _ in range(e)]
                i, j = ij[0] + 1, ij[1] + 1
                if i == j:
                    mat[i, i] += c
                else:
                    mat[i, j] += c / 2.0
                    mat[j, i] += c / 2.0
        return mat, const

    eq_mats, eq_rhs = [], []
    unit = np.zeros((nb, nb))
    unit[0, 0] = 1.0
    eq_mats.append(unit)
    eq_rhs.append(1.0)
    for q in prog.system.equalities:
        mat, const = poly_to_matrix(q)
        eq_mats.append(mat)
        eq_rhs.append(-const)
    ineq_mats, ineq_rhs = [], []
    for g in prog.system.inequalities:
        mat, const = poly_to_matrix(g)
        ineq_mats.append(mat)
        ineq_rhs.append(-const)
    c_mat = np.zeros((nb, nb))
    for i, w in enumerate(np.asarray(objective_weights, float)):
        c_mat[0, i + 1] += w / 2.0
        c_mat[i + 1, 0] += w / 2.0
    res = sdp.solve_primal_moment_admm(nb, eq_mats, np.array(eq_rhs),
                                       ineq_mats, np.array(ineq_rhs), c_mat)
    if res.x is None or res.status != "optimal":
        return Infeasible("infeasible", res.residual,
                          f"splitting solver {res.status}")
    x_mat = res.x
    scale = max(x_mat[0, 0], 1e-9)
    x_mat = x_mat / scale  # renormalize E[1] = 1 against first-order error
    values: dict[tuple, float] = {tuple([0] * n): float(x_mat[0, 0])}
    basis = [tuple([0] * n)]
    for i in range(n):
        mono = [0] * n
        mono[i] = 1
        basis.append(tuple(mono))
        values[tuple(mono)] = float(x_mat[0, i + 1])
        for j in range(i, n):
            mono2 = [0] * n
            mono2[i] += 1
            mono2[j] += 1
            values[tuple(mono2)] = float(x_mat[i + 1, j + 1])
    pe = PseudoExpectation(values, basis, n, 2, status=res.status,
                           objective_value=res.objective, gap=res.residual)
    pe.residuals = {"admm_iterations": res.iterations,
                    "residual": res.residual,
                    "psd_min_eig": float(np.linalg.eigvalsh(x_mat)[0])}
    return pe


class FullClusteringFamily:
    """The verbatim constraint family with z, X', Sigma^(+-1/2) variables.

    Residuals are evaluated numerically at a full assignment; symbolic
    construction of the degree-(3t+1) polynomials would dwarf the dense-SDP
    cap, so this object serves as the tiny-n fidelity check.
    """

    def __init__(self, samples: np.ndarray, k: int, t: int, delta: float,
                 eps: float):
        self.samples = samples
        self.k = k
        self.t = t
        self.delta = delta
        self.eps = eps

    def residuals(self, w: np.ndarray, z: np.ndarray, x_prime: np.ndarray,
                  s_half: np.ndarray, s_neg_half: np.ndarray) -> dict:
        x = self.samples
        n, d = x.shape
        k = self.k
        out = {}
        out["booleanity_w"] = float(np.max(np.abs(w * w - w)))
        out["booleanity_z"] = float(np.max(np.abs(z * z - z)))
        out["corruption_match"] = float(
            np.max(np.abs(z[:, None] * (x - x_prime))))
        out["z_count"] = abs(float(z.sum()) - (1 - self.eps) * n / k)
        out["w_count"] = abs(float(w.sum()) - n / k)
        mu = (k / n) * (w[:, None] * x_prime).sum(axis=0)
        centered = x_prime - mu
        sigma_w = (k / n) * (w[:, None] * centered).T @ centered
        out["sqrt_consistency"] = float(
            np.max(np.abs(s_half @ s_half - sigma_w)))
        proj = s_neg_half @ s_half
        out["projector"] = float(np.max(np.abs(proj @ proj - proj)))
        out["range_match"] = float(np.max(np.abs(
            (w[:, None] * (centered @ proj.T)) - (w[:, None] * centered))))
        whitened = centered @ s_neg_half.T
        worst = 0.0
        for s in range(1, self.t + 1):
            emp = _weighted_tensor_moment(whitened, w, s) * (k / n)
            gauss = _gaussian_moment_tensor(d, s)
            worst = max(worst, float(np.sum((emp - gauss) ** 2)))
        out["moments_worst"] = worst
        out["moments_bound"] = self.delta * d ** (-2 * self.t)
        return out

    def dirac_feasible(self, w, z, x_prime, s_half, s_neg_half,
                       tol: float = 1e-7) -> bool:
        r = self.residuals(w, z, x_prime, s_half, s_neg_half)
        hard = max(r["booleanity_w"], r["booleanity_z"], r["corruption_match"],
                   r["z_count"], r["w_count"], r["sqrt_consistency"],
                   r["projector"], r["range_match"])
        return hard <= tol and r["moments_worst"] <= r["moments_bound"]


def _weighted_tensor_moment(points: np.ndarray, w: np.ndarray, s: int) -> np.ndarray:
    n, d = points.shape
    acc = np.zeros([d] * s)
    for i in range(n):
        if w[i] == 0:
            continue
        t = points[i]
        cur = np.array(w[i])
        for _ in range(s):
            cur = np.multiply.outer(cur, t)
        acc += cur
    return acc


def _pairing_count(idx: tuple) -> int:
    """Number of perfect matchings of idx positions with equal values."""
    if not idx:
        return 1
    total = 0
    first, rest = idx[0], idx[1:]
    for j, v in enumerate(rest):
        if v == first:
            total += _pairing_count(rest[:j] + rest[j + 1:])
    return total


def _gaussian_moment_tensor(d: int, s: int) -> np.ndarray:
    """E[g^{tensor s}] for g ~ N(0, I_d) by Isserlis pairing counts."""
    if s == 0:
        return np.array(1.0)
    out = np.zeros([d] * s)
    if s % 2 == 1:
        return out
    for idx in np.ndindex(*([d] * s)):
        out[idx] = _pairing_count(idx)
    return out
