"""Close-case learning: guess nets, pseudoexpectation solves, recovery, polish.

Flow per guess (weights, coordinate matrices A, B): solve the Hermite
parameter program; if feasible, read the first moments of the component
forms and the subspace data M_i = E~[sigma~_i sigma~_i^T]; recover candidate
covariance tuples from a local grid around the readout inside the union of
the top-k singular subspaces; fix covariances and run the means-only
program; finally refine each candidate by local least-squares on the
Hermite-matching residuals.  k = 1 short-circuits to reading the first two
Hermite polynomials.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import pseudoexp
from .gaussians import flatten, flatten_dim, unflatten
from .hermite import IsotropicParams
from .polycore import _WEIGHTS
from .pseudoexp import (
    GuessValidityError,
    HermiteTarget,
    Infeasible,
    hermite_targets_from_params,
)


@dataclass(frozen=True)
class SymbolicMixture:
    """A guess: weights plus coordinates of the component forms in
    hypothetical orthonormal bases (A for means, B for covariances)."""

    weights: tuple
    mean_coeffs: tuple   # k x k rows
    cov_coeffs: tuple    # k x k rows

    @property
    def k(self) -> int:
        return len(self.weights)

    def arrays(self):
        return (np.array(self.weights), np.array(self.mean_coeffs),
                np.array(self.cov_coeffs))

    @classmethod
    def from_params(cls, weights, means, cov_devs) -> "SymbolicMixture":
        """Coordinates of known parameters in their own orthonormal bases
        (Gram square roots); the anchor construction for synthetic runs."""
        means = np.atleast_2d(np.asarray(means, float))
        flats = np.array([flatten(np.asarray(s, float)) for s in cov_devs])
        return cls(tuple(float(w) for w in weights),
                   _gram_coords(means), _gram_coords(flats))


def _gram_coords(rows: np.ndarray) -> tuple:
    gram = rows @ rows.T
    vals, vecs = np.linalg.eigh(gram)
    vals = np.maximum(vals, 0.0)
    root = vecs @ np.diag(np.sqrt(vals)) @ vecs.T
    return tuple(tuple(float(x) for x in r) for r in root)


@dataclass
class GuessNet:
    """Finite guess collection: explicit anchors plus an optional local grid.

    Anchors are jittered by grid multiples of grid_step along each coordinate
    (grid_radius steps in each direction); every candidate is filtered by the
    validity predicates (norm bound 2*Delta, pairwise equal-or-c/2-separated,
    weights at least w_min/2).
    """

    anchors: list[SymbolicMixture]
    grid_step: float = 0.1
    grid_radius: int = 0
    delta_bound: float = 2.0
    c_sep: float = 1.0
    w_min: float = 0.2
    weight_grid: list[tuple] | None = None
    max_guesses: int = 512


def enumerate_guesses(net: GuessNet):
    """Stream of valid guesses, anchors first, then grid perturbations."""
    if not net.anchors:
        raise ValueError("empty guess net")
    count = 0
    seen = set()

    def emit(g: SymbolicMixture):
        nonlocal count
        key = (g.weights, g.mean_coeffs, g.cov_coeffs)
        if key in seen:
            return None
        seen.add(key)
        try:
            pseudoexp.validate_guess(*g.arrays(), net.c_sep, net.delta_bound,
                                     net.w_min)
        except GuessValidityError:
            return None
        count += 1
        return g

    for anchor in net.anchors:
        g = emit(anchor)
        if g is not None:
            yield g
        weight_options = net.weight_grid or [anchor.weights]
        if net.grid_radius <= 0:
            for wts in weight_options:
                g = emit(SymbolicMixture(tuple(wts), anchor.mean_coeffs,
                                         anchor.cov_coeffs))
                if g is not None:
                    yield g
                if count >= net.max_guesses:
                    return
            continue
        k = anchor.k
        offsets = [o * net.grid_step
                   for o in range(-net.grid_radius, net.grid_radius + 1)]
        a0 = np.array(anchor.mean_coeffs)
        b0 = np.array(anchor.cov_coeffs)
        entries = [(i, j) for i in range(k) for j in range(k)]
        for wts in weight_options:
            for da in itertools.product(offsets, repeat=len(entries)):
                a = a0.copy()
                for (i, j), off in zip(entries, da):
                    a[i, j] += off
                g = emit(SymbolicMixture(
                    tuple(wts),
                    tuple(tuple(float(x) for x in r) for r in a),
                    tuple(tuple(float(x) for x in r) for r in b0)))
                if g is not None:
                    yield g
                if count >= net.max_guesses:
                    return


# ---------------------------------------------------------------- reduction

@dataclass
class SeparationCertificate:
    exponent: float
    lower: float
    upper: float
    max_shift: float
    collapsed_means: list[list[int]]
    collapsed_covs: list[list[int]]


def reduce_to_separated(means: np.ndarray, cov_devs: list[np.ndarray],
                        eps_prime: float, f_k: float = 0.5
                        ) -> tuple[np.ndarray, list[np.ndarray], SeparationCertificate]:
    """Round parameters so every pair is exactly equal or well separated.

    Finds an exponent C with no pairwise distance inside [eps'^C, eps'^(f C)]
    (pigeonhole over the at most k^2 distance scales), then collapses the
    connected components of the closeness graph at threshold eps'^(f C) to
    representatives.  Applying the rounding twice equals applying it once.
    """
    means = np.atleast_2d(np.asarray(means, float))
    k = means.shape[0]
    flats = np.array([flatten(np.asarray(s, float)) for s in cov_devs])
    dists = []
    for i in range(k):
        for j in range(i + 1, k):
            dists.append(float(np.linalg.norm(means[i] - means[j])))
            dists.append(float(np.linalg.norm(flats[i] - flats[j])))
    c_exp = 1.0
    for _ in range(len(dists) + 2):
        lo, hi = eps_prime ** c_exp, eps_prime ** (f_k * c_exp)
        if not any(lo <= d_val <= hi for d_val in dists if d_val > 0):
            break
        c_exp /= f_k
    threshold = eps_prime ** (f_k * c_exp)

    def collapse(rows: np.ndarray):
        groups = _components_under(rows, threshold)
        out = rows.copy()
        shift = 0.0
        for grp in groups:
            rep = rows[grp[0]]
            for idx in grp:
                shift = max(shift, float(np.linalg.norm(rows[idx] - rep)))
                out[idx] = rep
        return out, groups, shift

    new_means, mean_groups, s1 = collapse(means)
    new_flats, cov_groups, s2 = collapse(flats)
    cert = SeparationCertificate(c_exp, eps_prime ** c_exp, threshold,
                                 max(s1, s2), mean_groups, cov_groups)
    return new_means, [unflatten(f) for f in new_flats], cert


def _components_under(rows: np.ndarray, threshold: float) -> list[list[int]]:
    k = rows.shape[0]
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(k):
        for j in range(i + 1, k):
            if np.linalg.norm(rows[i] - rows[j]) <= threshold:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    return [sorted(g) for g in groups.values()]


# ------------------------------------------------------------ solve + recover

@dataclass
class SubspaceBundle:
    guess: SymbolicMixture
    matrices: list[np.ndarray]        # M_i = E~[s_i s_i^T], D x D
    bases: list[np.ndarray]           # top-k singular vectors per M_i
    union_span: np.ndarray            # D x r orthonormal
    mean_matrices: list[np.ndarray]   # E~[m_i m_i^T]
    mean_span: np.ndarray
    readout_s: np.ndarray             # k x D first moments
    readout_m: np.ndarray             # k x d
    pe: pseudoexp.PseudoExpectation


def solve_covariances(guess: SymbolicMixture, targets: dict[int, HermiteTarget],
                      eps_prime: float, d: int, *, c_sep: float = 1.0,
                      delta_bound: float = 2.0, w_min: float = 0.2,
                      c_count: int | None = None, degree: int | None = None,
                      warm_points: int = 120, seed: int = 0,
                      monomial_cap: int = 10000,
                      options=None) -> SubspaceBundle | Infeasible:
    w, a_mat, b_mat = guess.arrays()
    k = guess.k
    system = pseudoexp.build_parameter_program(
        w, a_mat, b_mat, targets, eps_prime, k, d, c_sep=c_sep,
        delta_bound=delta_bound, w_min=w_min, c_count=c_count, degree=degree)
    pe = pseudoexp.solve(system, warm_points=warm_points, seed=seed,
                         monomial_cap=monomial_cap, options=options)
    if isinstance(pe, Infeasible):
        return pe
    dd = flatten_dim(d)
    mats, bases = [], []
    readout_s = np.zeros((k, dd))
    readout_m = np.zeros((k, d))
    mean_mats = []
    for i in range(k):
        m_block = np.zeros((dd, dd))
        for a in range(dd):
            readout_s[i, a] = pe.linear_moment(k * d + i * dd + a)
            for b in range(a, dd):
                v = pe.pair_moment(k * d + i * dd + a, k * d + i * dd + b)
                m_block[a, b] = m_block[b, a] = v
        mats.append(m_block)
        vals, vecs = np.linalg.eigh(m_block)
        bases.append(vecs[:, -min(k, dd):])
        u_block = np.zeros((d, d))
        for a in range(d):
            readout_m[i, a] = pe.linear_moment(i * d + a)
            for b in range(a, d):
                v = pe.pair_moment(i * d + a, i * d + b)
                u_block[a, b] = u_block[b, a] = v
        mean_mats.append(u_block)
    union = np.hstack(bases)
    union_span = _orth(union)
    mean_span = _orth(np.hstack([_top_vecs(m, k) for m in mean_mats]))
    return SubspaceBundle(guess, mats, bases, union_span, mean_mats, mean_span,
                          readout_s, readout_m, pe)


def _orth(mat: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(mat)
    keep = np.abs(np.diag(r)) > 1e-10
    return q[:, keep]


def _top_vecs(mat: np.ndarray, k: int) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    return vecs[:, -min(k, mat.shape[0]):]


def subspace_diagnostics(bundle: SubspaceBundle,
                         true_cov_devs: list[np.ndarray]) -> dict:
    """Trace mass of each M_i outside the true covariance span (synthetic runs)."""
    flats = np.array([flatten(np.asarray(s, float)) for s in true_cov_devs])
    v_basis = _orth(flats.T)
    proj_perp = np.eye(v_basis.shape[0]) - v_basis @ v_basis.T
    traces = [float(np.trace(proj_perp @ m @ proj_perp)) for m in bundle.matrices]
    containment = [float(np.linalg.norm(proj_perp @ f) / max(np.linalg.norm(f), 1e-12))
                   for f in flats]
    return {"trace_perp": traces,
            "union_span_leakage": containment,
            "union_dim": int(bundle.union_span.shape[1])}


def recover_covariances(bundle: SubspaceBundle, net_step: float,
                        cap: int = 100000, grid_radius: int = 1
                        ) -> list[np.ndarray]:
    """Candidate flattened-covariance k-tuples from the union subspace.

    The grid is centered on the first-moment readout projected into the
    span; grid_radius steps of net_step are taken along each span direction,
    so the readout itself is always candidate zero.
    """
    span = bundle.union_span
    k = bundle.guess.k
    centers = [span @ (span.T @ bundle.readout_s[i]) for i in range(k)]
    per_axis = range(-grid_radius, grid_radius + 1)
    r = span.shape[1]
    offsets = itertools.product(per_axis, repeat=r)
    out = []
    for off in offsets:
        shift = span @ (net_step * np.array(off, float))
        out.append(np.array([c + shift for c in centers]))
        if len(out) >= cap:
            break
    return out


def solve_means(cov_flats: np.ndarray, guess: SymbolicMixture,
                targets: dict[int, HermiteTarget], eps_prime: float, d: int, *,
                c_sep: float = 1.0, delta_bound: float = 2.0, w_min: float = 0.2,
                c_count: int | None = None, net_step: float = 0.05,
                warm_points: int = 80, seed: int = 0, grid_radius: int = 0,
                options=None) -> list[np.ndarray] | Infeasible:
    """Mean tuples recovered with covariances held at numeric values."""
    w, a_mat, _ = guess.arrays()
    k = guess.k
    system = pseudoexp.build_means_program(
        w, a_mat, np.asarray(cov_flats, float), targets, eps_prime, k, d,
        c_sep=c_sep, delta_bound=delta_bound, w_min=w_min, c_count=c_count)
    pe = pseudoexp.solve(system, warm_points=warm_points, seed=seed,
                         options=options)
    if isinstance(pe, Infeasible):
        return pe
    readout = np.zeros((k, d))
    mats = []
    for i in range(k):
        block = np.zeros((d, d))
        for a in range(d):
            readout[i, a] = pe.linear_moment(i * d + a)
            for b in range(a, d):
                v = pe.pair_moment(i * d + a, i * d + b)
                block[a, b] = block[b, a] = v
        mats.append(block)
    span = _orth(np.hstack([_top_vecs(m, k) for m in mats]))
    cands = [readout.copy()]
    if grid_radius > 0:
        for off in itertools.product(range(-grid_radius, grid_radius + 1),
                                     repeat=span.shape[1]):
            if not any(off):
                continue
            shift = span @ (net_step * np.array(off, float))
            cands.append(readout + shift)
    return cands


# -------------------------------------------------------------- candidates

@dataclass
class MixtureCandidate:
    weights: np.ndarray
    means: np.ndarray           # k x d
    cov_devs: list[np.ndarray]  # symmetric deviations from identity
    provenance: str = ""
    hermite_residual: float = math.inf

    def sort_key(self):
        return (round(self.hermite_residual, 12),
                tuple(np.round(self.means, 9).ravel()),
                tuple(np.round(np.array([flatten(s) for s in self.cov_devs]), 9).ravel()))

    def as_params(self) -> IsotropicParams:
        return IsotropicParams(
            tuple(float(x) for x in self.weights),
            tuple(tuple(float(v) for v in row) for row in self.means),
            tuple(tuple(tuple(float(v) for v in r) for r in s)
                  for s in self.cov_devs),
            mode="float")

    def valid(self) -> bool:
        d = self.means.shape[1]
        for s in self.cov_devs:
            if np.linalg.eigvalsh(np.eye(d) + s).min() <= 1e-8:
                return False
        return True


def hermite_residual(candidate: MixtureCandidate,
                     targets: dict[int, HermiteTarget]) -> float:
    vec = _target_residual_vector(candidate.weights, candidate.means,
                                  candidate.cov_devs, targets)
    return float(vec @ vec)


def _target_residual_vector(weights, means, cov_devs, targets) -> np.ndarray:
    params = IsotropicParams(
        tuple(float(x) for x in weights),
        tuple(tuple(float(v) for v in row) for row in np.atleast_2d(means)),
        tuple(tuple(tuple(float(v) for v in r) for r in s) for s in cov_devs),
        mode="float")
    from .hermite import mixture_hermite_all

    c_count = max(targets)
    hs = mixture_hermite_all(params, c_count)
    chunks = []
    for p in range(1, c_count + 1):
        t = targets[p]
        vals = np.array([float(hs[p].polynomial.terms.get(mono, 0.0))
                         * _WEIGHTS["series"](mono) for mono in t.monomials])
        chunks.append(vals - t.vector)
    return np.concatenate(chunks)


def polish_candidate(candidate: MixtureCandidate,
                     targets: dict[int, HermiteTarget],
                     max_nfev: int = 400) -> MixtureCandidate:
    """Local least-squares refinement of (means, cov_devs) against the
    Hermite targets; weights stay at the guessed values."""
    k, d = candidate.means.shape
    dd = flatten_dim(d)

    def pack(means, cov_devs):
        return np.concatenate([np.asarray(means).ravel(),
                               np.concatenate([flatten(s) for s in cov_devs])])

    def unpack(theta):
        means = theta[:k * d].reshape(k, d)
        covs = [unflatten(theta[k * d + i * dd: k * d + (i + 1) * dd])
                for i in range(k)]
        return means, covs

    def fun(theta):
        means, covs = unpack(theta)
        return _target_residual_vector(candidate.weights, means, covs, targets)

    x0 = pack(candidate.means, candidate.cov_devs)
    try:
        res = scipy.optimize.least_squares(fun, x0, max_nfev=max_nfev,
                                           xtol=1e-14, ftol=1e-14, gtol=1e-12)
    except Exception:
        return candidate
    means, covs = unpack(res.x)
    polished = MixtureCandidate(candidate.weights.copy(), means, covs,
                                candidate.provenance + "+polish")
    if not polished.valid():
        return candidate
    polished.hermite_residual = float(res.cost * 2)
    return polished


# --------------------------------------------------------------- top level

@dataclass
class CloseCaseConfig:
    eps_prime: float = 1e-4
    net_step: float = 0.1
    c_sep: float = 1.0
    delta_bound: float = 2.0
    w_min: float = 0.2
    c_count: int | None = None
    candidate_cap: int = 100000
    max_guesses: int = 64
    cov_grid_radius: int = 0
    mean_grid_radius: int = 0
    polish: bool = True
    warm_points: int = 120
    seed: int = 0
    monomial_cap: int = 10000


@dataclass
class CloseCaseReport:
    candidates: list[MixtureCandidate]
    guesses_tried: int
    guesses_feasible: int
    diagnostics: list[dict] = field(default_factory=list)


def close_case_learn(targets: dict[int, HermiteTarget], net: GuessNet, d: int,
                     config: CloseCaseConfig | None = None) -> CloseCaseReport:
    """Compose guesses -> covariance solve -> recovery -> means -> polish."""
    cfg = config or CloseCaseConfig()
    candidates: list[MixtureCandidate] = []
    diagnostics = []
    tried = feasible = 0
    for guess in enumerate_guesses(net):
        if tried >= cfg.max_guesses:
            break
        tried += 1
        k = guess.k
        if k == 1:
            cand = _read_off_k1(guess, targets, d)
            if cand is not None:
                candidates.append(cand)
                feasible += 1
            continue
        bundle = solve_covariances(
            guess, targets, cfg.eps_prime, d, c_sep=cfg.c_sep,
            delta_bound=cfg.delta_bound, w_min=cfg.w_min, c_count=cfg.c_count,
            warm_points=cfg.warm_points, seed=cfg.seed,
            monomial_cap=cfg.monomial_cap)
        if isinstance(bundle, Infeasible):
            diagnostics.append({"guess": guess, "status": bundle.status})
            continue
        feasible += 1
        cov_tuples = recover_covariances(bundle, cfg.net_step,
                                         cap=cfg.candidate_cap,
                                         grid_radius=cfg.cov_grid_radius)
        for cov_flats in cov_tuples:
            means_out = solve_means(
                cov_flats, guess, targets, cfg.eps_prime, d,
                c_sep=cfg.c_sep, delta_bound=cfg.delta_bound, w_min=cfg.w_min,
                c_count=cfg.c_count, net_step=cfg.net_step,
                warm_points=max(40, cfg.warm_points // 2), seed=cfg.seed,
                grid_radius=cfg.mean_grid_radius)
            if isinstance(means_out, Infeasible):
                continue
            for mean_tuple in means_out:
                cand = MixtureCandidate(
                    np.array(guess.weights), mean_tuple,
                    [unflatten(f) for f in cov_flats],
                    provenance=f"guess{tried}")
                if not cand.valid():
                    continue
                if cfg.polish:
                    cand = polish_candidate(cand, targets)
                cand.hermite_residual = hermite_residual(cand, targets)
                candidates.append(cand)
                if len(candidates) >= cfg.candidate_cap:
                    break
    candidates = _dedupe(candidates)
    candidates.sort(key=MixtureCandidate.sort_key)
    return CloseCaseReport(candidates, tried, feasible, diagnostics)


def _read_off_k1(guess: SymbolicMixture, targets: dict[int, HermiteTarget],
                 d: int) -> MixtureCandidate | None:
    """k = 1: h_1 is the mean form, h_2 minus its square is the covariance."""
    t1, t2 = targets[1], targets[2]
    mean = np.zeros(d)
    for mono, val in zip(t1.monomials, t1.vector):
        idx = mono.index(1)
        mean[idx] = val / _WEIGHTS["series"](mono)
    quad = np.zeros((d, d))
    for mono, val in zip(t2.monomials, t2.vector):
        raw = val / _WEIGHTS["series"](mono)
        ij = [i for i, e in enumerate(mono) for _ in range(e)]
        i, j = ij[0], ij[1]
        if i == j:
            quad[i, i] = raw
        else:
            quad[i, j] = quad[j, i] = raw / 2.0
    s_dev = quad - np.outer(mean, mean)
    s_dev = (s_dev + s_dev.T) / 2.0
    cand = MixtureCandidate(np.array(guess.weights), mean.reshape(1, d),
                            [s_dev], provenance="k1-closed-form")
    if max(targets) >= 2:
        cand = polish_candidate(cand, targets)
    cand.hermite_residual = hermite_residual(cand, targets)
    return cand if cand.valid() else None


def _dedupe(cands: list[MixtureCandidate], tol: float = 1e-7
            ) -> list[MixtureCandidate]:
    out = []
    for c in cands:
        dup = False
        for o in out:
            if (np.allclose(c.weights, o.weights, atol=tol)
                    and np.allclose(c.means, o.means, atol=tol)
                    and all(np.allclose(a, b, atol=tol)
                            for a, b in zip(c.cov_devs, o.cov_devs))):
                dup = True
                break
        if not dup:
            out.append(c)
    return out
