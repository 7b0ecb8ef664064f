"""Formal power series in y, differential operators, and identity verification.

The generating function of a mixture in the I + S covariance convention is
F(y) = sum_i w_i exp(a_i(X) y + b_i(X) y^2 / 2) with a_i linear and b_i
quadratic in X.  The operator (d/dy - (c(X) + y d(X))) maps a term
P(y, X) exp(a y + b y^2/2) to (P' + (a-c)P + (b-d) y P) exp(a y + b y^2/2),
so a scheduled product of such operators annihilates every component except
one and leaves an explicit product of parameter differences as the y^0
coefficient.  Everything here runs on exact rational instantiations; a wrong
schedule or a perturbed parameter is caught as a nonzero polynomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .hermite import IsotropicParams, component_exp_series, mixture_hermite_all
from .polycore import (
    MultivariatePolynomial,
    coeff_norm_sq,
    multiply,
    rational,
)


class TruncationError(ValueError):
    """The series truncation cannot support the requested operation."""


@dataclass
class FormalSeries:
    """Power series in y, coefficients are polynomials in X, truncated at T."""

    truncation: int
    coefficients: list[MultivariatePolynomial]

    def __post_init__(self):
        if len(self.coefficients) != self.truncation + 1:
            raise ValueError("coefficient list length must be truncation + 1")

    @property
    def d(self) -> int:
        return self.coefficients[0].d

    def __add__(self, other: "FormalSeries") -> "FormalSeries":
        t = min(self.truncation, other.truncation)
        return FormalSeries(t, [self.coefficients[m] + other.coefficients[m]
                                for m in range(t + 1)])

    def scale(self, s) -> "FormalSeries":
        return FormalSeries(self.truncation, [c.scale(s) for c in self.coefficients])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coefficients)


@dataclass(frozen=True)
class DiffOperator:
    """Acts as d/dy - (c(X) + y * d(X)); c linear, d quadratic in X."""

    c: MultivariatePolynomial
    d_poly: MultivariatePolynomial

    @classmethod
    def from_component(cls, mean_form: MultivariatePolynomial,
                       cov_form: MultivariatePolynomial) -> "DiffOperator":
        return cls(mean_form, cov_form)


def apply_operator(op: DiffOperator, s: FormalSeries,
                   degree_cap: int | None = None) -> FormalSeries:
    """One operator application; the truncation drops by one.

    Output coefficient m is (m+1) c_{m+1} - c(X) c_m - d(X) c_{m-1}.
    """
    if s.truncation < 1:
        raise TruncationError("series truncation exhausted")
    if degree_cap is None:
        degree_cap = max(c.degree() for c in s.coefficients) + op.d_poly.degree() + 2
    out = []
    for m in range(s.truncation):
        term = s.coefficients[m + 1].scale(m + 1)
        term = term - multiply(op.c, s.coefficients[m], degree_cap)
        if m >= 1:
            term = term - multiply(op.d_poly, s.coefficients[m - 1], degree_cap)
        out.append(term)
    return FormalSeries(s.truncation - 1, out)


@dataclass
class ExpComponentSeries:
    """P(y, X) exp(a(X) y + b(X) y^2/2) with the prefactor tracked exactly.

    prefactor[j] is the X-polynomial coefficient of y^j; trailing zero
    entries are trimmed so len(prefactor) - 1 is the exact y-degree.
    """

    prefactor: list[MultivariatePolynomial]
    a: MultivariatePolynomial
    b: MultivariatePolynomial

    def y_degree(self) -> int:
        return len(self.prefactor) - 1

    def leading(self) -> MultivariatePolynomial:
        return self.prefactor[-1]

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.prefactor)


def apply_operator_exp(op: DiffOperator, comp: ExpComponentSeries,
                       degree_cap: int | None = None) -> ExpComponentSeries:
    """Exact symbolic update of the prefactor; the exponential factor is fixed.

    New prefactor is P' + (a - c) P + (b - d) y P.  Degree bookkeeping: own
    operator (c, d) = (a, b) drops the y-degree by one and multiplies the
    leading coefficient by the old degree; d != b raises the degree with
    leading coefficient L (b - d); d = b, c != a keeps the degree with
    leading coefficient L (a - c).
    """
    if comp.is_zero():
        return ExpComponentSeries([comp.prefactor[0].scale(0)], comp.a, comp.b)
    p = comp.prefactor
    a_minus_c = comp.a - op.c
    b_minus_d = comp.b - op.d_poly
    n = len(p)
    if degree_cap is None:
        degree_cap = max(q.degree() for q in p) + 4
    out = [MultivariatePolynomial.zero(comp.a.d, comp.a.mode) for _ in range(n + 1)]
    for j in range(1, n):
        out[j - 1] = out[j - 1] + p[j].scale(j)          # P'
    for j in range(n):
        if not a_minus_c.is_zero():
            out[j] = out[j] + multiply(a_minus_c, p[j], degree_cap)
        if not b_minus_d.is_zero():
            out[j + 1] = out[j + 1] + multiply(b_minus_d, p[j], degree_cap)
    while len(out) > 1 and out[-1].is_zero():
        out.pop()
    return ExpComponentSeries(out, comp.a, comp.b)


def expand_exp_component(comp: ExpComponentSeries, truncation: int) -> FormalSeries:
    """Multiply the prefactor into the exponential's series, truncated."""
    g = component_exp_series(comp.a, comp.b, truncation)
    zero = MultivariatePolynomial.zero(comp.a.d, comp.a.mode)
    coeffs = [zero for _ in range(truncation + 1)]
    cap = (max(q.degree() for q in comp.prefactor)
           + max(2, comp.b.degree()) * truncation + 2)
    for j, pj in enumerate(comp.prefactor):
        if pj.is_zero():
            continue
        for m in range(truncation + 1 - j):
            coeffs[m + j] = coeffs[m + j] + multiply(pj, g[m], cap)
    return FormalSeries(truncation, coeffs)


# ----------------------------------------------------------------- schedules

@dataclass(frozen=True)
class ScheduleStep:
    side: str        # "true" or "hyp"
    component: int   # 1-based component index
    exponent: int


@dataclass(frozen=True)
class OperatorSchedule:
    """Steps listed in composition order (leftmost operator first).

    Application to a series proceeds right-to-left, i.e. over reversed(steps).
    """

    k: int
    target: str
    steps: tuple[ScheduleStep, ...]
    equal_count: int = 0  # j: how many of Sigma_1..Sigma_{k-1} equal Sigma_k

    def total_applications(self) -> int:
        return sum(s.exponent for s in self.steps)

    def final_exponent(self) -> int:
        return self.steps[0].exponent

    def constant(self) -> int:
        """The scalar constant of the elimination identity.

        The final operator run is the survivor's own annihilator, applied
        exactly (y-degree) times, so the accumulated factor is the factorial
        of the final exponent.
        """
        return math.factorial(self.final_exponent())


def build_schedule(k: int, target: str = "covariance",
                   equality_pattern: int | None = None) -> OperatorSchedule:
    """Operator exponent list for the elimination identity of the given case.

    target "covariance": final exponent 2^(2k-1) - 1.
    target "mean": final exponent 2^(2k-1) - 2^(k-1) - 1 (shared covariances).
    target "general": equality_pattern = j, the number of indices among
    1..k-1 whose covariance equals component k's; final exponent
    2^(2k-1) - 1 - (2^k + ... + 2^(k+j-1)).  j = 0 recovers the covariance
    case.
    """
    if k < 1 or k > 3:
        raise ValueError("desk scale supports 1 <= k <= 3")
    j = 0
    if target == "covariance":
        final = 2 ** (2 * k - 1) - 1
    elif target == "mean":
        final = 2 ** (2 * k - 1) - 2 ** (k - 1) - 1
    elif target == "general":
        j = equality_pattern or 0
        if not 0 <= j <= k - 1:
            raise ValueError(f"equality pattern j={j} out of range for k={k}")
        final = 2 ** (2 * k - 1) - 1 - sum(2 ** (k + i - 1) for i in range(1, j + 1))
    else:
        raise ValueError(f"unknown target {target!r}")
    steps = [ScheduleStep("hyp", k, final)]
    for i in range(k - 1, 0, -1):
        steps.append(ScheduleStep("hyp", i, 2 ** (k + i - 1)))
    for i in range(k, 0, -1):
        steps.append(ScheduleStep("true", i, 2 ** (i - 1)))
    return OperatorSchedule(k, target, tuple(steps), j)


def _operators_for(params: IsotropicParams) -> list[DiffOperator]:
    return [DiffOperator(a, b) for a, b in params.component_forms()]


def series_of_mixture(params: IsotropicParams, truncation: int) -> FormalSeries:
    """F(y) truncated: coefficient m is h_m / m!."""
    zero = MultivariatePolynomial.zero(params.d, params.mode)
    coeffs = [zero for _ in range(truncation + 1)]
    for w, (a, b) in zip(params.weights, params.component_forms()):
        g = component_exp_series(a, b, truncation)
        for m in range(truncation + 1):
            coeffs[m] = coeffs[m] + g[m].scale(w)
    return FormalSeries(truncation, coeffs)


# -------------------------------------------------------------- verification

class BookkeepingError(AssertionError):
    """A schedule step violated the degree / leading-coefficient contract."""


@dataclass
class EliminationResult:
    lhs: MultivariatePolynomial
    rhs: MultivariatePolynomial
    equal: bool
    constant: int
    case: str
    k: int


def _step_expectation(comp: ExpComponentSeries, op: DiffOperator):
    """Predicted (degree change, leading factor) for one application."""
    if op.c == comp.a and op.d_poly == comp.b:
        return "drop", None
    if op.d_poly != comp.b:
        return "raise", comp.b - op.d_poly
    return "hold", comp.a - op.c


def _apply_schedule_exp(components: list[ExpComponentSeries],
                        schedule: OperatorSchedule,
                        operators: dict[tuple[str, int], DiffOperator],
                        check_bookkeeping: bool = True) -> list[ExpComponentSeries]:
    out = []
    for comp in components:
        cur = comp
        for step in reversed(schedule.steps):
            op = operators[(step.side, step.component)]
            for _ in range(step.exponent):
                if cur.is_zero():
                    break
                if check_bookkeeping:
                    kind, factor = _step_expectation(cur, op)
                    old_deg = cur.y_degree()
                    old_lead = cur.leading()
                nxt = apply_operator_exp(op, cur)
                if check_bookkeeping and not nxt.is_zero():
                    if kind == "drop":
                        ok = (nxt.y_degree() == old_deg - 1
                              and nxt.leading() == old_lead.scale(old_deg))
                    elif kind == "raise":
                        ok = (nxt.y_degree() == old_deg + 1
                              and nxt.leading() == multiply(old_lead, factor, None))
                    else:
                        ok = (nxt.y_degree() == old_deg
                              and nxt.leading() == multiply(old_lead, factor, None))
                    if not ok:
                        raise BookkeepingError(
                            f"step {step} broke the {kind} contract")
                cur = nxt
        out.append(cur)
    return out


def verify_elimination(mix_true: IsotropicParams, mix_hyp: IsotropicParams,
                       k: int, case: str = "covariance",
                       equality_pattern: int | None = None,
                       direction: str = "hyp") -> EliminationResult:
    """Check the y=0 elimination identity on exact numeric instantiations.

    direction "hyp" applies the hyp-final schedule to the hypothetical
    mixture's series (claim 1 of each pair); "true" swaps the roles (claim 2).
    lhs is computed by truncated-series arithmetic, rhs is the closed-form
    product with constant (final exponent)!; equality is exact.
    """
    if direction == "true":
        swapped = verify_elimination(mix_hyp, mix_true, k, case,
                                     equality_pattern, direction="hyp")
        return EliminationResult(swapped.lhs, swapped.rhs, swapped.equal,
                                 swapped.constant, case + "/true-side", k)
    schedule = build_schedule(k, case, equality_pattern)
    if case == "mean" and mix_true.cov_devs != mix_hyp.cov_devs:
        raise ValueError("mean case requires shared covariances")
    total = schedule.total_applications()
    truncation = total + 2
    ops = {}
    true_forms = mix_true.component_forms()
    hyp_forms = mix_hyp.component_forms()
    for i in range(k):
        ops[("true", i + 1)] = DiffOperator(*true_forms[i])
        ops[("hyp", i + 1)] = DiffOperator(*hyp_forms[i])

    target = series_of_mixture(mix_hyp, truncation)
    cap = 2 * total + max(p.degree() for p in target.coefficients) + 4
    for step in reversed(schedule.steps):
        op = ops[(step.side, step.component)]
        for _ in range(step.exponent):
            target = apply_operator(op, target, cap)
    lhs = target.coefficients[0]

    # independent bookkeeping route doubles as the degree-contract assertion
    comps = [ExpComponentSeries(
        [MultivariatePolynomial.constant(mix_hyp.d, w, mix_hyp.mode)], a, b)
        for w, (a, b) in zip(mix_hyp.weights, hyp_forms)]
    surviving = _apply_schedule_exp(comps, schedule, ops)
    book = MultivariatePolynomial.zero(mix_hyp.d, mix_hyp.mode)
    for comp in surviving:
        book = book + comp.prefactor[0]
    if book != lhs:
        raise BookkeepingError("series route and exp bookkeeping disagree")

    rhs = _claim_product(mix_true, mix_hyp, k, case, schedule)
    return EliminationResult(lhs, rhs, lhs == rhs, schedule.constant(), case, k)


def _claim_product(mt: IsotropicParams, mh: IsotropicParams, k: int,
                   case: str, schedule: OperatorSchedule) -> MultivariatePolynomial:
    d = mh.d
    mode = mh.mode
    tf = mt.component_forms()
    hf = mh.component_forms()
    cap = 2 * schedule.total_applications() + 6
    out = MultivariatePolynomial.constant(d, schedule.constant(), mode)
    out = out.scale(mh.weights[k - 1])
    if case == "mean":
        mean_diff = hf[k - 1][0] - tf[k - 1][0]
        out = multiply(out, mean_diff.pow(2 ** (k - 1), cap), cap)
        for i in range(1, k):
            cov_diff = tf[k - 1][1] - tf[i - 1][1]
            out = multiply(out, cov_diff.pow(2 ** (i - 1) + 2 ** (k + i - 1), cap), cap)
        return out
    j = schedule.equal_count
    for i in range(1, k + 1):
        cov_diff = hf[k - 1][1] - tf[i - 1][1]
        out = multiply(out, cov_diff.pow(2 ** (i - 1), cap), cap)
    for i in range(1, j + 1):
        mean_diff = hf[k - 1][0] - hf[i - 1][0]
        out = multiply(out, mean_diff.pow(2 ** (k + i - 1), cap), cap)
    for i in range(j + 1, k):
        cov_diff = hf[k - 1][1] - hf[i - 1][1]
        out = multiply(out, cov_diff.pow(2 ** (k + i - 1), cap), cap)
    return out


def verify_null_operator(mix: IsotropicParams, k: int, T: int = 6) -> bool:
    """True iff D_k^(2^(k-1)) ... D_1^1 annihilates F through T coefficients."""
    total = 2 ** k - 1
    series = series_of_mixture(mix, T + total)
    forms = mix.component_forms()
    cap = 2 * (T + total) + 4
    for i in range(1, k + 1):
        op = DiffOperator(*forms[i - 1])
        for _ in range(2 ** (i - 1)):
            series = apply_operator(op, series, cap)
    return series.is_zero()


# ------------------------------------------ operator algebra over Hermite basis

@dataclass
class AbstractSeries:
    """Series whose coefficients are linear combinations of abstract
    generators g_0..g_G with polynomial weights; generator g_m stands for the
    m-th series coefficient h_m / m! of the target mixture."""

    truncation: int
    weights: list[dict[int, MultivariatePolynomial]]
    d: int
    mode: str

    @classmethod
    def generic(cls, truncation: int, d: int, mode: str = "exact") -> "AbstractSeries":
        one = MultivariatePolynomial.constant(d, 1, mode)
        return cls(truncation, [{m: one} for m in range(truncation + 1)], d, mode)


def apply_operator_abstract(op: DiffOperator, s: AbstractSeries,
                            degree_cap: int) -> AbstractSeries:
    if s.truncation < 1:
        raise TruncationError("series truncation exhausted")
    out: list[dict[int, MultivariatePolynomial]] = []
    for m in range(s.truncation):
        acc: dict[int, MultivariatePolynomial] = {}
        for g, q in s.weights[m + 1].items():
            acc[g] = q.scale(m + 1)
        for g, q in s.weights[m].items():
            t = multiply(op.c, q, degree_cap)
            acc[g] = acc[g] - t if g in acc else -t
        if m >= 1:
            for g, q in s.weights[m - 1].items():
                t = multiply(op.d_poly, q, degree_cap)
                acc[g] = acc[g] - t if g in acc else -t
        out.append({g: q for g, q in acc.items() if not q.is_zero()})
    return AbstractSeries(s.truncation - 1, out, s.d, s.mode)


def identity_decomposition_check(mix_true: IsotropicParams,
                                 mix_hyp: IsotropicParams, k: int,
                                 case: str = "covariance",
                                 equality_pattern: int | None = None
                                 ) -> MultivariatePolynomial:
    """Residual of the P_0 + sum P_i (h~_i - h_i) decomposition; must be zero.

    The P_i are extracted by applying the schedule to a series with abstract
    coefficients, which tracks the operator algebra over the Hermite basis.
    """
    schedule = build_schedule(k, case, equality_pattern)
    total = schedule.total_applications()
    truncation = total + 1
    d = mix_hyp.d
    cap = 2 * total + 6
    ops = {}
    for i, (a, b) in enumerate(mix_true.component_forms()):
        ops[("true", i + 1)] = DiffOperator(a, b)
    for i, (a, b) in enumerate(mix_hyp.component_forms()):
        ops[("hyp", i + 1)] = DiffOperator(a, b)
    abstract = AbstractSeries.generic(truncation, d, mix_hyp.mode)
    for step in reversed(schedule.steps):
        op = ops[(step.side, step.component)]
        for _ in range(step.exponent):
            abstract = apply_operator_abstract(op, abstract, cap)
    q_weights = abstract.weights[0]
    max_g = max(q_weights) if q_weights else 0
    h_hyp = mixture_hermite_all(mix_hyp, max_g)
    h_true = mixture_hermite_all(mix_true, max_g)
    rhs = _claim_product(mix_true, mix_hyp, k, case, schedule)
    residual = rhs
    for g, q in q_weights.items():
        diff = h_hyp[g].polynomial - h_true[g].polynomial
        if diff.is_zero():
            continue
        scale = rational(1, math.factorial(g)) if mix_hyp.mode == "exact" \
            else 1.0 / math.factorial(g)
        residual = residual - multiply(q, diff, None).scale(scale)
    return residual


# ------------------------------------------------------- equivalence diagnostic

@dataclass
class EquivalenceResult:
    matched: bool
    matching: list[int] | None
    divergence: tuple[int, tuple] | None
    max_coeff_gap: float


def mixture_equivalence_diagnostic(mix_a: IsotropicParams, mix_b: IsotropicParams,
                                   m_max: int, tol: float) -> EquivalenceResult:
    """Hermite-coefficient comparison plus component matching.

    If every Hermite coefficient agrees within tol for m <= m_max, each
    component of B is matched to its nearest component of A by parameter
    distance (the matching certified by near-vanishing of the corresponding
    factor in the elimination product); otherwise the first diverging order
    and monomial are reported.
    """
    ha = mixture_hermite_all(mix_a, m_max)
    hb = mixture_hermite_all(mix_b, m_max)
    worst = 0.0
    for m in range(m_max + 1):
        diff = ha[m].polynomial - hb[m].polynomial
        if diff.is_zero():
            continue
        gaps = {mono: abs(float(c)) for mono, c in diff.terms.items()}
        mono, gap = max(gaps.items(), key=lambda kv: kv[1])
        worst = max(worst, gap)
        if gap > tol:
            return EquivalenceResult(False, None, (m, mono), worst)
    matching = []
    for jb in range(mix_b.k):
        best, best_gap = None, None
        for ia in range(mix_a.k):
            mean_gap = coeff_norm_sq(
                MultivariatePolynomial.linear_form(mix_b.means[jb], mix_b.mode)
                - MultivariatePolynomial.linear_form(mix_a.means[ia], mix_a.mode))
            cov_gap = coeff_norm_sq(
                MultivariatePolynomial.quadratic_form(mix_b.cov_devs[jb], mix_b.mode)
                - MultivariatePolynomial.quadratic_form(mix_a.cov_devs[ia], mix_a.mode))
            gap = mean_gap + cov_gap
            if best_gap is None or gap < best_gap:
                best, best_gap = ia, gap
        matching.append(best)
    return EquivalenceResult(True, matching, None, worst)


# --------------------------------------------------------------- JSON report

def identity_report(k_values=(1, 2, 3), trials: int = 5, seed: int = 0) -> dict:
    """Run the elimination identities and return the CLI report payload."""
    import random

    rng = random.Random(seed)
    report = {"cases": [], "failures": 0, "trials": 0, "max_residual_norm": 0.0}
    for k in k_values:
        d = {1: 2, 2: 2, 3: 1}[k]
        cases = [("covariance", None), ("mean", None)]
        cases += [("general", j) for j in range(1, k)]
        for case, j in cases:
            fails = 0
            for _ in range(trials):
                mt, mh = random_instance_pair(k, d, rng, case, j)
                res = verify_elimination(mt, mh, k, case, j)
                if not res.equal:
                    fails += 1
                    gap = res.lhs - res.rhs
                    report["max_residual_norm"] = max(
                        report["max_residual_norm"],
                        math.sqrt(coeff_norm_sq(gap.to_float())))
            report["cases"].append({"case": case, "k": k, "pattern": j,
                                    "trials": trials, "failures": fails})
            report["failures"] += fails
            report["trials"] += trials
    return report


def random_rational(rng, num_range=3, dens=(1, 2, 3)):
    num = rng.randint(-num_range, num_range)
    return rational(num, rng.choice(dens))


def random_instance_pair(k: int, d: int, rng, case: str = "covariance",
                         equality_pattern: int | None = None
                         ) -> tuple[IsotropicParams, IsotropicParams]:
    """Random exact-rational (true, hypothetical) pair honoring the case.

    Resamples until all parameter differences the identity divides by are
    nonzero polynomials.
    """
    j = equality_pattern or 0

    def rand_mean():
        return tuple(random_rational(rng) for _ in range(d))

    def rand_cov():
        m = [[rational(0)] * d for _ in range(d)]
        for r in range(d):
            for c in range(r, d):
                v = random_rational(rng)
                m[r][c] = v
                m[c][r] = v
        return tuple(tuple(row) for row in m)

    def rand_weights():
        raw = [rational(rng.randint(1, 4)) for _ in range(k)]
        s = sum(raw)
        return tuple(w / s for w in raw)

    for _ in range(200):
        means_t = [rand_mean() for _ in range(k)]
        means_h = [rand_mean() for _ in range(k)]
        covs_t = [rand_cov() for _ in range(k)]
        if case == "mean":
            covs_h = list(covs_t)
        else:
            covs_h = [rand_cov() for _ in range(k)]
        if case == "general" and j > 0:
            for i in range(j):
                covs_t[i] = covs_t[k - 1]
                covs_h[i] = covs_h[k - 1]
        mt = IsotropicParams(rand_weights(), tuple(means_t), tuple(covs_t))
        mh = IsotropicParams(rand_weights(), tuple(means_h), tuple(covs_h))
        if _instance_generic(mt, mh, k, case, j):
            return mt, mh
    raise RuntimeError("could not sample a generic instance")


def _instance_generic(mt: IsotropicParams, mh: IsotropicParams, k: int,
                      case: str, j: int) -> bool:
    tf = mt.component_forms()
    hf = mh.component_forms()
    if case == "mean":
        if (hf[k - 1][0] - tf[k - 1][0]).is_zero():
            return False
        return all(not (tf[k - 1][1] - tf[i][1]).is_zero() for i in range(k - 1))
    for i in range(k):
        if (hf[k - 1][1] - tf[i][1]).is_zero():
            return False
    for i in range(j):
        if (hf[k - 1][0] - hf[i][0]).is_zero():
            return False
    for i in range(j, k - 1):
        if (hf[k - 1][1] - hf[i][1]).is_zero():
            return False
    return True
