"""Dense interior-point solver for linear matrix inequality problems.

Problem form: maximize b . y subject to, per block,
F_block(y) = C + sum_i y_i A_i  being positive semidefinite, and E y = f.

Solved by log-det barrier path following with equality-constrained damped
Newton steps.  Matrix blocks are inflated by a fixed sigma * I (default
1e-7): moment relaxations of systems with polynomial equalities have no
strictly feasible point (the equality ideal forces singular moment
matrices), and the inflation restores an interior while keeping the reported
PSD violation under the 1e-6 tolerance budget.  Feasibility is decided by a
phase-I slack minimization; box bounds on the variables keep phase I from
wandering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse


@dataclass
class MatrixBlock:
    """F(y) = const + sum over entries of coef * y[var] at (row, col).

    Entries carry both (r, c) and (c, r) for off-diagonal cells so traces and
    gradients need no symmetry bookkeeping.
    """

    size: int
    const: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vars: np.ndarray
    coefs: np.ndarray
    label: str = ""

    def materialize(self, y: np.ndarray) -> np.ndarray:
        f = self.const.copy()
        np.add.at(f, (self.rows, self.cols), self.coefs * y[self.vars])
        return f


@dataclass
class ScalarRows:
    """A bundle of 1x1 blocks: F_j(y) = const[j] + (S y)[j] >= 0."""

    const: np.ndarray
    matrix: scipy.sparse.csr_matrix  # n_rows x n_vars
    labels: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return self.const.size

    def materialize(self, y: np.ndarray) -> np.ndarray:
        return self.const + self.matrix @ y


@dataclass
class SDPResult:
    status: str               # "optimal" | "infeasible" | "marginal" | "stalled"
    y: np.ndarray | None
    objective: float | None
    gap: float
    phase1_slack: float
    newton_steps: int
    message: str = ""
    final_t: float = 0.0
    objective_scale: float = 0.0


class SDPOptions:
    def __init__(self, sigma: float = 1e-7, gap_tol: float = 1e-5,
                 feas_margin: float = 1e-5, y_box: float = 1e4,
                 mu_factor: float = 20.0, max_newton: int = 2000,
                 center_tol: float = 1e-9, boxes_with_objective: bool = False,
                 verbose: bool = False):
        self.sigma = sigma
        self.gap_tol = gap_tol
        self.feas_margin = feas_margin
        self.y_box = y_box
        self.mu_factor = mu_factor
        self.max_newton = max_newton
        self.center_tol = center_tol
        # box rows keep phase I and analytic centers bounded; with an
        # objective over an already-bounded feasible set they only inflate
        # the barrier parameter, so they are dropped unless requested
        self.boxes_with_objective = boxes_with_objective
        self.verbose = verbose


class _BlockPlan:
    """Precomputed index structures for one matrix block's Hessian.

    Blocks where every variable touches at most two cells (plain degree-2
    moment matrices) use the closed form
    tr(X A_a X A_b) = 2 c_a c_b (X[i_a,i_b] X[j_a,j_b] + X[i_a,j_b] X[j_a,i_b]);
    general blocks go through chunked GEMMs U_t = Finv A_t Finv followed by a
    sparse contraction against the stacked A matrices.
    """

    def __init__(self, blk: MatrixBlock, chunk: int):
        order = np.argsort(blk.vars, kind="stable")
        self.rows = blk.rows[order]
        self.cols = blk.cols[order]
        self.vars = blk.vars[order]
        self.coefs = blk.coefs[order]
        self.uniq, self.local = np.unique(self.vars, return_inverse=True)
        counts = np.bincount(self.local)
        self.pair_mode = counts.max() <= 2
        nb = blk.size
        if self.pair_mode:
            m = self.uniq.size
            seen = np.zeros(m, dtype=bool)
            eye_i = np.empty(m, dtype=int)
            eye_j = np.empty(m, dtype=int)
            cc = np.empty(m)
            mirrored = True
            for pos in range(len(self.vars)):
                t = self.local[pos]
                if not seen[t]:
                    seen[t] = True
                    eye_i[t] = self.rows[pos]
                    eye_j[t] = self.cols[pos]
                    cc[t] = self.coefs[pos]
                elif (self.rows[pos] != eye_j[t] or self.cols[pos] != eye_i[t]
                      or self.coefs[pos] != cc[t]):
                    mirrored = False
                    break
            if not mirrored:
                self.pair_mode = False
            else:
                # single-cell vars are diagonal cells: halve for the pair form
                self.pi = eye_i
                self.pj = eye_j
                self.pc = np.where(counts == 1, cc / 2.0, cc)
        if not self.pair_mode:
            self.chunks = []
            for lo in range(0, self.uniq.size, chunk):
                hi = min(lo + chunk, self.uniq.size)
                sel = (self.local >= lo) & (self.local < hi)
                flat = ((self.local[sel] - lo) * nb * nb
                        + self.rows[sel] * nb + self.cols[sel])
                self.chunks.append((lo, hi, flat, self.coefs[sel]))
            self.a_t = scipy.sparse.csr_matrix(
                (self.coefs, (self.local, self.rows * nb + self.cols)),
                shape=(self.uniq.size, nb * nb))


class _Barrier:
    """Gradient/Hessian oracle for -sum log det F_b(y) - sum log f_s(y).

    Box bounds |y_i| <= box are handled analytically (diagonal gradient and
    Hessian terms) instead of as scalar rows; box = None disables them.
    """

    def __init__(self, blocks: list[MatrixBlock], scalars: ScalarRows | None,
                 sigma: float, box: float | None = None, chunk: int = 256):
        self.blocks = blocks
        self.scalars = scalars
        self.sigma = sigma
        self.box = box
        self.chunk = chunk
        self.plans = [_BlockPlan(blk, chunk) for blk in blocks]

    @property
    def nu(self) -> int:
        total = sum(b.size for b in self.blocks)
        if self.scalars is not None:
            total += self.scalars.count
        return total

    def factorize(self, y: np.ndarray):
        """Cholesky factors of all inflated blocks, or None if not PD."""
        if self.box is not None and np.abs(y).max() >= self.box:
            return None
        chols = []
        for blk in self.blocks:
            f = blk.materialize(y)
            f[np.diag_indices_from(f)] += self.sigma
            try:
                chols.append(np.linalg.cholesky(f))
            except np.linalg.LinAlgError:
                return None
        svals = None
        if self.scalars is not None and self.scalars.count:
            svals = self.scalars.materialize(y) + self.sigma
            if svals.min() <= 0:
                return None
        return chols, svals

    def value(self, fact, y: np.ndarray) -> float:
        chols, svals = fact
        v = -2.0 * sum(float(np.log(np.diag(c)).sum()) for c in chols)
        if svals is not None:
            v -= float(np.log(svals).sum())
        if self.box is not None:
            v -= float(np.log(self.box - y).sum() + np.log(self.box + y).sum())
        return v

    def grad_hess(self, y: np.ndarray, fact, n: int):
        chols, svals = fact
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        for blk, plan, chol in zip(self.blocks, self.plans, chols):
            finv = scipy.linalg.cho_solve((chol, True), np.eye(blk.size))
            gathered = finv[plan.rows, plan.cols] * plan.coefs
            np.subtract.at(grad, plan.vars, gathered)
            self._accumulate_matrix_hessian(blk, plan, finv, hess)
        if svals is not None:
            s = self.scalars
            inv = 1.0 / svals
            grad -= s.matrix.T @ inv
            sw = s.matrix.multiply(inv[:, None]).tocsr()
            hess += (sw.T @ sw).toarray()
        if self.box is not None:
            lo = 1.0 / (self.box + y)
            hi = 1.0 / (self.box - y)
            grad += hi - lo
            hess[np.diag_indices(n)] += hi * hi + lo * lo
        return grad, hess

    def _accumulate_matrix_hessian(self, blk: MatrixBlock, plan: _BlockPlan,
                                   finv: np.ndarray, hess: np.ndarray):
        """hess[i, j] += tr(Finv A_i Finv A_j)."""
        if plan.pair_mode:
            xi = finv[plan.pi[:, None], plan.pi[None, :]]
            xj = finv[plan.pj[:, None], plan.pj[None, :]]
            xi *= xj
            xj = finv[plan.pi[:, None], plan.pj[None, :]]
            xi += xj * xj.T
            xi *= 2.0 * plan.pc[:, None] * plan.pc[None, :]
            hess[np.ix_(plan.uniq, plan.uniq)] += xi
            return
        nb = blk.size
        for lo_i, hi_i, flat, cfs in plan.chunks:
            m = hi_i - lo_i
            stack = np.zeros(m * nb * nb)
            np.add.at(stack, flat, cfs)
            stack = stack.reshape(m, nb, nb)
            left = finv @ stack.reshape(m * nb, nb).T          # nb x (m nb)
            left = left.T.reshape(m, nb, nb).transpose(0, 2, 1)
            u = (finv @ left.reshape(m * nb, nb).T).T.reshape(m, nb, nb)
            u = u.reshape(m, nb * nb)
            part = (plan.a_t @ u.T).T                           # m x uniq
            hess[np.ix_(plan.uniq[lo_i:hi_i], plan.uniq)] += part


def _reduce_equalities(e_mat: np.ndarray, f_vec: np.ndarray):
    """Drop linearly dependent rows via pivoted QR; returns (E, f)."""
    if e_mat.shape[0] == 0:
        return e_mat, f_vec
    q, r, piv = scipy.linalg.qr(e_mat.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int((diag > max(e_mat.shape) * 1e-12 * (diag[0] if diag.size else 1)).sum())
    keep = piv[:rank]
    return e_mat[keep], f_vec[keep]


def solve_lmi(blocks: list[MatrixBlock], n_vars: int,
              objective: np.ndarray | None = None,
              scalars: ScalarRows | None = None,
              equalities: tuple[np.ndarray, np.ndarray] | None = None,
              warm_start: np.ndarray | None = None,
              options: SDPOptions | None = None) -> SDPResult:
    """Feasibility / optimization over the inflated LMI; see module docstring."""
    opt = options or SDPOptions()
    e_mat = np.zeros((0, n_vars))
    f_vec = np.zeros(0)
    if equalities is not None:
        e_mat, f_vec = _reduce_equalities(np.asarray(equalities[0], float),
                                          np.asarray(equalities[1], float))

    y0 = _initial_point(e_mat, f_vec, n_vars, warm_start)

    # ---------------------------------------------------------------- phase I
    slack0 = _needed_slack(blocks, scalars, y0)
    steps = 0
    sigma2 = opt.sigma
    if slack0 > -opt.feas_margin:
        y1, s1, used = _phase1(blocks, scalars, e_mat, f_vec, y0, slack0, opt)
        steps += used
        # Feasibility is judged at the solver's tolerance: a slack that
        # cannot be pushed below +2*margin certifies infeasibility, anything
        # smaller is accepted with the phase-II inflation widened to cover it
        # (measure-zero feasible sets, e.g. isolated Dirac solutions, bottom
        # out near -sigma and are legitimate).
        if s1 > 2 * opt.feas_margin:
            return SDPResult("infeasible", None, None, math.inf, s1, steps,
                             "phase-I slack stayed positive")
        y0 = y1
        slack0 = s1
        sigma2 = opt.sigma + 2.0 * max(0.0, s1) + 1e-12

    # --------------------------------------------------------------- phase II
    b = np.zeros(n_vars) if objective is None else np.asarray(objective, float)
    scale = np.linalg.norm(b)
    pure_feasibility = scale == 0
    box = opt.y_box
    if not pure_feasibility:
        b = b / scale
        if not opt.boxes_with_objective:
            box = None
    barrier = _Barrier(blocks, scalars, sigma2, box=box)
    nu = barrier.nu + (2 * n_vars if box is not None else 0)
    t = 1.0 if pure_feasibility else max(1.0, nu / (50.0 + abs(float(b @ y0))))
    y = y0
    while True:
        y, used, ok = _center(barrier, e_mat, y, t * b, opt)
        steps += used
        if steps > opt.max_newton:
            return SDPResult("stalled", y, _obj(b, y, scale, pure_feasibility),
                             nu / t, slack0, steps, "newton budget exhausted")
        if not ok:
            return SDPResult("stalled", y, _obj(b, y, scale, pure_feasibility),
                             nu / t, slack0, steps, "centering failed")
        if pure_feasibility:
            # a widened inflation can let the center drift outside the tight
            # cone; warm recenterings with shrinking inflation restore the
            # PSD budget
            for _ in range(4):
                s_end = _needed_slack(blocks, scalars, y)
                if s_end <= opt.sigma or sigma2 <= opt.sigma:
                    break
                sigma2 = max(opt.sigma, 1.2 * s_end)
                tight = _Barrier(blocks, scalars, sigma2 + opt.sigma, box=box)
                y, used, _ = _center(tight, e_mat, y, t * b, opt)
                steps += used
            return SDPResult("optimal", y, None, 0.0, slack0, steps,
                             "analytic center")
        if nu / t <= opt.gap_tol * scale:
            return SDPResult("optimal", y, _obj(b, y, scale, pure_feasibility),
                             nu / t / scale, slack0, steps, "",
                             final_t=t, objective_scale=scale)
        t *= opt.mu_factor


def _obj(b, y, scale, pure):
    return None if pure else float(b @ y) * scale


@dataclass
class ConicResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    iterations: int
    residual: float


def solve_primal_moment_admm(nb: int, eq_mats: list[np.ndarray],
                             eq_rhs: np.ndarray,
                             ineq_mats: list[np.ndarray],
                             ineq_rhs: np.ndarray,
                             c_mat: np.ndarray,
                             nonneg: bool = True,
                             rho_objective: float = 0.05,
                             tol: float = 2e-3,
                             max_iterations: int = 6000) -> ConicResult:
    """max <C, X> s.t. <A_i,X> = b_i, <G_j,X> >= h_j, X PSD (and X >= 0).

    Three-set consensus ADMM over the affine set (carrying the linear
    objective), the PSD cone, and the nonnegative orthant (entrywise X plus
    inequality slacks).  Projection-based, so degenerate optimal faces that
    stall interior-point centering are harmless; accuracy is first-order
    (suits sampling probabilities, not certificates).
    """
    m_eq, m_in = len(eq_mats), len(ineq_mats)
    dim = nb * nb + m_in
    rows = []
    rhs = np.concatenate([np.asarray(eq_rhs, float), np.asarray(ineq_rhs, float)])
    for mat in eq_mats:
        rows.append(np.concatenate([np.asarray(mat, float).ravel(),
                                    np.zeros(m_in)]))
    for j, mat in enumerate(ineq_mats):
        slack = np.zeros(m_in)
        slack[j] = -1.0
        rows.append(np.concatenate([np.asarray(mat, float).ravel(), slack]))
    a_full = np.array(rows)
    gram = a_full @ a_full.T
    gram[np.diag_indices_from(gram)] += 1e-12
    chol = scipy.linalg.cho_factor(gram)
    c_full = np.concatenate([np.asarray(c_mat, float).ravel(), np.zeros(m_in)])
    c_norm = np.linalg.norm(c_full)
    c_step = (rho_objective / c_norm) * c_full if c_norm > 0 else 0.0

    def proj_affine(p):
        resid = a_full @ p - rhs
        return p - a_full.T @ scipy.linalg.cho_solve(chol, resid)

    def proj_psd(p):
        out = p.copy()
        xm = p[: nb * nb].reshape(nb, nb)
        xm = (xm + xm.T) / 2.0
        vals, vecs = np.linalg.eigh(xm)
        np.maximum(vals, 0.0, out=vals)
        out[: nb * nb] = (vecs * vals) @ vecs.T
        return out

    def proj_nonneg(p):
        return np.maximum(p, 0.0) if nonneg else \
            np.concatenate([p[: nb * nb],
                            np.maximum(p[nb * nb:], 0.0)])

    projs = [lambda p: proj_affine(p + c_step), proj_psd, proj_nonneg]
    z = proj_affine(np.zeros(dim))
    lam = [np.zeros(dim) for _ in projs]
    res = math.inf
    it = 0
    for it in range(max_iterations):
        us = [proj(z - l) for proj, l in zip(projs, lam)]
        z = sum(u + l for u, l in zip(us, lam)) / len(projs)
        for u, l in zip(us, lam):
            l += u - z
        if it % 25 == 24:
            res = max(float(np.linalg.norm(u - z)) for u in us) / math.sqrt(dim)
            if res < tol:
                break
    x = proj_psd(z)[: nb * nb].reshape(nb, nb)
    x = (x + x.T) / 2.0
    status = "optimal" if res < tol else "stalled"
    return ConicResult(status, x, float(np.sum(c_mat * x)), it + 1, res)


def solve_primal_moment(nb: int, eq_mats: list[np.ndarray], eq_rhs: np.ndarray,
                        ineq_mats: list[np.ndarray], ineq_rhs: np.ndarray,
                        c_mat: np.ndarray,
                        options: SDPOptions | None = None):
    """max <C, X> s.t. <A_i, X> = b_i, <G_j, X> >= h_j, X >= 0, via the dual.

    The dual LMI Z = -C + sum lam_i A_i - sum mu_j G_j >= 0, mu >= 0,
    maximize -(b.lam - h.mu), has one variable per constraint, so the Newton
    systems are tiny; the primal moment matrix is recovered from the central
    path as X = Z^{-1} * scale / t, which satisfies the equalities exactly
    at the center and the inequalities with positive slack.

    Returns (X, info) with X = None when the dual is unbounded (primal
    infeasible) or the solve stalls.
    """
    opt = options or SDPOptions()
    m_eq, m_in = len(eq_mats), len(ineq_mats)
    nv = m_eq + m_in
    rows, cols, vars_, coefs = [], [], [], []
    for idx, mat in enumerate(list(eq_mats) + [-g for g in ineq_mats]):
        r, c = np.nonzero(mat)
        rows.append(r)
        cols.append(c)
        vars_.append(np.full(r.size, idx, dtype=int))
        coefs.append(mat[r, c])
    block = MatrixBlock(nb, -np.asarray(c_mat, float),
                        np.concatenate(rows), np.concatenate(cols),
                        np.concatenate(vars_), np.concatenate(coefs), "dualZ")
    scal = None
    if m_in:
        mat = scipy.sparse.csr_matrix(
            (np.ones(m_in), (np.arange(m_in), m_eq + np.arange(m_in))),
            shape=(m_in, nv))
        scal = ScalarRows(np.zeros(m_in), mat)
    obj = np.concatenate([-np.asarray(eq_rhs, float),
                          np.asarray(ineq_rhs, float)])
    res = solve_lmi([block], nv, objective=obj, scalars=scal, options=opt)
    if res.status != "optimal" or res.final_t <= 0:
        return None, res
    z = block.materialize(res.y)
    z[np.diag_indices_from(z)] += opt.sigma
    x = np.linalg.inv(z) * (res.objective_scale / res.final_t)
    return (x + x.T) / 2.0, res


def _initial_point(e_mat, f_vec, n_vars, warm):
    if warm is not None:
        y = np.asarray(warm, float).copy()
        if e_mat.shape[0]:
            # project onto the equality manifold
            resid = e_mat @ y - f_vec
            y -= e_mat.T @ np.linalg.solve(e_mat @ e_mat.T, resid)
        return y
    if e_mat.shape[0]:
        return np.linalg.lstsq(e_mat, f_vec, rcond=None)[0]
    return np.zeros(n_vars)


def _needed_slack(blocks, scalars, y) -> float:
    worst = -math.inf
    for blk in blocks:
        f = blk.materialize(y)
        worst = max(worst, -float(np.linalg.eigvalsh(f)[0]))
    if scalars is not None and scalars.count:
        worst = max(worst, -float(scalars.materialize(y).min()))
    return worst if worst > -math.inf else 0.0


def _phase1(blocks, scalars, e_mat, f_vec, y0, slack0, opt: SDPOptions):
    """Minimize the common slack s with F_b(y) + s I >= 0."""
    n = y0.size
    aug_blocks = []
    for blk in blocks:
        diag = np.arange(blk.size)
        aug_blocks.append(MatrixBlock(
            blk.size, blk.const,
            np.concatenate([blk.rows, diag]),
            np.concatenate([blk.cols, diag]),
            np.concatenate([blk.vars, np.full(blk.size, n, dtype=int)]),
            np.concatenate([blk.coefs, np.ones(blk.size)]),
            blk.label))
    s_rows = None
    if scalars is not None and scalars.count:
        ext = scipy.sparse.hstack(
            [scalars.matrix,
             scipy.sparse.csr_matrix(np.ones((scalars.count, 1)))], format="csr")
        s_rows = ScalarRows(scalars.const, ext)
    e_aug = np.hstack([e_mat, np.zeros((e_mat.shape[0], 1))]) if e_mat.shape[0] \
        else np.zeros((0, n + 1))
    box = max(opt.y_box, abs(slack0) * 10 + 10.0)
    barrier = _Barrier(aug_blocks, s_rows, opt.sigma, box=box)
    nu = barrier.nu + 2 * (n + 1)
    obj = np.zeros(n + 1)
    obj[n] = -1.0  # maximize -s
    y = np.append(y0, slack0 + 1.0)
    t = 1.0
    steps = 0
    for _ in range(60):
        y, used, ok = _center(barrier, e_aug, y, t * obj, opt,
                              early_exit=lambda z: z[n] < -3 * opt.feas_margin)
        steps += used
        if not ok or steps > opt.max_newton:
            break
        if y[n] < -3 * opt.feas_margin:
            break  # strictly feasible point found
        if y[n] - nu / t > 2 * opt.feas_margin:
            break  # barrier lower bound certifies infeasibility
        if nu / t < 0.25 * opt.feas_margin:
            break
        t *= opt.mu_factor
    return y[:n], float(y[n]), steps


def _kkt_step(hess: np.ndarray, grad: np.ndarray, e_mat: np.ndarray) -> np.ndarray:
    """Newton step for min g.dy + dy^T H dy / 2 s.t. E dy = 0.

    Cholesky of H plus a Schur complement on the multipliers; LU fallback on
    the full KKT when H is numerically indefinite.
    """
    n = grad.size
    m = e_mat.shape[0]
    try:
        cho = scipy.linalg.cho_factor(hess, check_finite=False)
        hg = scipy.linalg.cho_solve(cho, -grad, check_finite=False)
        if m == 0:
            return hg
        he = scipy.linalg.cho_solve(cho, e_mat.T, check_finite=False)
        schur = e_mat @ he
        lam = np.linalg.solve(schur, e_mat @ hg)
        return hg - he @ lam
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        kkt = np.zeros((n + m, n + m))
        kkt[:n, :n] = hess
        kkt[:n, n:] = e_mat.T
        kkt[n:, :n] = e_mat
        rhs = np.concatenate([-grad, np.zeros(m)])
        try:
            return np.linalg.solve(kkt, rhs)[:n]
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(kkt, rhs, rcond=None)[0][:n]


def _center(barrier: _Barrier, e_mat: np.ndarray, y: np.ndarray,
            tb: np.ndarray, opt: SDPOptions, early_exit=None):
    """Damped Newton for min -tb.y + barrier(y) s.t. E y = f (y feasible)."""
    n = y.size
    m = e_mat.shape[0]
    fact = barrier.factorize(y)
    if fact is None:
        # pull strictly inside via a tiny step toward the analytic center
        return y, 0, False
    for it in range(40):
        grad, hess = barrier.grad_hess(y, fact, n)
        grad = grad - tb
        hess[np.diag_indices_from(hess)] += 1e-9 * (1.0 + np.abs(np.diag(hess)))
        step = _kkt_step(hess, grad, e_mat)
        decrement = float(-grad @ step)
        if decrement < 0:
            step = -step
            decrement = -decrement
        if decrement / 2.0 <= opt.center_tol:
            return y, it, True
        alpha = 1.0
        base = barrier.value(fact, y) - float(tb @ y)
        accepted = False
        for _ in range(50):
            cand = y + alpha * step
            f2 = barrier.factorize(cand)
            if f2 is not None:
                val = barrier.value(f2, cand) - float(tb @ cand)
                if val <= base - 0.25 * alpha * decrement or alpha < 1e-8:
                    y, fact = cand, f2
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            return y, it + 1, True  # stalled at numerical precision
        if early_exit is not None and early_exit(y):
            return y, it + 1, True
    return y, 40, True
