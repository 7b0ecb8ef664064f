"""Rough clustering: pseudoexpectation sampling loop, conditions, partitions.

The loop solves the reduced clustering program maximizing the pseudo-mass
outside the already-covered points, anchors a random index i with
probability proportional to E~[w_i], and admits each j with probability
E~[w_i w_j] / E~[w_i] (clamped to [0, 1]; clamp events are counted).  The
returned candidates are the whole sample plus every union of collected
subsets, plus recursion outputs on those unions with fewer components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import pseudoexp, sdp
from .gaussians import Gaussian, GaussianMixture, c_closeness, tv_distance
from .polycore import MultivariatePolynomial


@dataclass
class ClusteringCandidate:
    subsets: list[frozenset]
    provenance: str = ""


@dataclass
class DeterministicConditionsReport:
    partition: list[list[int]]
    moment_residuals: list[list[float]]   # per part, per order s=1..t
    moment_bound: float
    direction_checks: dict
    passed: bool


@dataclass
class ConditionConstants:
    """O(1) constants in the direction conditions, calibrated empirically."""

    c_mean: float = 9.0       # E_a(v) width multiplier on log(1/psi)
    c_pair_low: float = 0.01  # F_a(v) lower multiplier on psi
    c_quad: float = 8.0       # G_a(A) width multiplier on log(1/psi)


def check_deterministic_conditions(samples: np.ndarray,
                                   partition: list[list[int]], delta: float,
                                   psi: float, t: int, n_directions: int = 256,
                                   seed: int = 0,
                                   constants: ConditionConstants | None = None
                                   ) -> DeterministicConditionsReport:
    """Moment closeness per part (exact) plus sampled direction conditions.

    The sup over all directions is unverifiable; condition 2 is checked over
    n_directions random unit vectors and random symmetric matrices and
    reported as such.
    """
    x = np.atleast_2d(np.asarray(samples, float))
    n, d = x.shape
    cst = constants or ConditionConstants()
    sizes = {len(p) for p in partition}
    if len(sizes) != 1:
        trim = min(sizes)
        partition = [sorted(p)[:trim] for p in partition]
    for part in partition:
        if not part:
            raise ValueError("empty partition part")
    k = len(partition)
    bound = delta * d ** (-2 * t)
    rng = np.random.default_rng(seed)
    residuals = []
    dir_stats = {"mean_counts": [], "pair_counts": [], "quad_counts": [],
                 "n_directions": n_directions}
    passed = True
    for part in partition:
        pts = x[part]
        m = len(part)
        mu = pts.mean(axis=0)
        centered = pts - mu
        cov = centered.T @ centered / m
        w = _inv_sqrt_psd(cov)
        white = centered @ w.T
        per_order = []
        for s in range(1, t + 1):
            emp = _tensor_mean(white, s)
            gauss = pseudoexp._gaussian_moment_tensor(d, s)
            r = float(np.sum((emp - gauss) ** 2))
            per_order.append(r)
            if r > bound:
                passed = False
        residuals.append(per_order)
        # direction conditions on the sampled sup
        mean_ok = pair_ok = quad_ok = True
        mean_worst = pair_worst = quad_worst = 1.0
        for _ in range(n_directions):
            v = rng.standard_normal(d)
            v /= np.linalg.norm(v)
            sig_v = float(v @ cov @ v)
            proj = (pts - mu) @ v
            frac = float(np.mean(proj**2 <= cst.c_mean * math.log(1 / psi) * sig_v))
            mean_worst = min(mean_worst, frac)
            sub = pts[rng.choice(m, size=min(m, 40), replace=False)] @ v
            diffs2 = (sub[:, None] - sub[None, :]) ** 2
            mask = ~np.eye(len(sub), dtype=bool)
            frac = float(np.mean(diffs2[mask] >= cst.c_pair_low * psi * sig_v))
            pair_worst = min(pair_worst, frac)
            a = rng.standard_normal((d, d))
            a = (a + a.T) / 2
            subp = pts[rng.choice(m, size=min(m, 40), replace=False)]
            dd = subp[:, None, :] - subp[None, :, :]
            quad = np.einsum("ijk,kl,ijl->ij", dd, a, dd)
            center = 2 * float(np.sum(cov * a))
            width = cst.c_quad * math.log(1 / psi) * np.linalg.norm(cov @ a, "fro")
            frac = float(np.mean(np.abs(quad[mask] - center) <= width))
            quad_worst = min(quad_worst, frac)
        mean_ok = mean_worst >= 1 - psi
        pair_ok = pair_worst >= 1 - psi
        quad_ok = quad_worst >= 1 - psi
        dir_stats["mean_counts"].append(mean_worst)
        dir_stats["pair_counts"].append(pair_worst)
        dir_stats["quad_counts"].append(quad_worst)
        passed = passed and mean_ok and pair_ok and quad_ok
    return DeterministicConditionsReport(partition, residuals, bound,
                                         dir_stats, passed)


def _inv_sqrt_psd(cov: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    return vecs @ np.diag(np.maximum(vals, floor) ** -0.5) @ vecs.T


def _tensor_mean(points: np.ndarray, s: int) -> np.ndarray:
    n, d = points.shape
    t = points
    for _ in range(s - 1):
        t = t[..., None] * points.reshape((n,) + (1,) * (t.ndim - 1) + (d,))
    return t.mean(axis=0)


# ------------------------------------------------------------- rough cluster

@dataclass
class RoughClusterDiagnostics:
    solves: int = 0
    skipped: int = 0
    clamp_events: int = 0
    clamp_total: int = 0
    covered_history: list[int] = field(default_factory=list)
    expected_sizes: list[float] = field(default_factory=list)


def rough_cluster(samples: np.ndarray, k: int, t: int = 4, delta: float = 0.1,
                  eps: float = 0.02, eta: float = 0.9, mode: str = "reduced",
                  seed: int = 0, max_subsets: int = 12,
                  residual_exit: float = 0.2, gap_tol: float = 2e-3,
                  _depth: int = 0) -> tuple[list[ClusteringCandidate],
                                            RoughClusterDiagnostics]:
    """Algorithm: iterative pseudoexpectation sampling plus recursion.

    The loop ends early once the maximal pseudo-mass outside the covered set
    drops below residual_exit * n / k; the iteration cap 100 k log(1/eta)
    still applies.  Subsets of the collected list L are unioned (all subsets
    up to max_subsets, contiguous prefixes beyond, logged); each union is
    recursed on with k' = 1 .. k-1.
    """
    x = np.atleast_2d(np.asarray(samples, float))
    n = x.shape[0]
    diag = RoughClusterDiagnostics()
    whole = ClusteringCandidate([frozenset(range(n))], f"whole-depth{_depth}")
    if k <= 1 or n < 4 * k:
        return [whole], diag
    if mode != "reduced":
        raise ValueError("rough_cluster solves in reduced mode only")
    prog = pseudoexp.build_clustering_program(x, k, t, delta, eps,
                                              mode="reduced", seed=seed)
    rng = np.random.default_rng(seed + 1)
    iter_cap = max(1, int(math.ceil(100 * k * math.log(1 / eta))))
    collected: list[frozenset] = []
    covered: set[int] = set()
    options = sdp.SDPOptions(gap_tol=gap_tol)
    for _ in range(iter_cap):
        obj_weights = np.array([0.0 if i in covered else 1.0
                                for i in range(n)])
        if obj_weights.sum() == 0:
            break
        pe = pseudoexp.solve_clustering_moments(prog, obj_weights,
                                                options=options)
        diag.solves += 1
        if isinstance(pe, pseudoexp.Infeasible):
            diag.skipped += 1
            break
        w_lin = np.array([pe.linear_moment(i) for i in range(n)])
        w_lin = np.clip(w_lin, 0.0, 1.0)
        outside = float(sum(w_lin[i] for i in range(n) if i not in covered))
        if outside < residual_exit * n / k:
            break
        total = w_lin.sum()
        if total <= 0:
            break
        anchor = int(rng.choice(n, p=w_lin / total))
        anchor_mass = max(w_lin[anchor], 1e-12)
        probs = np.empty(n)
        for j in range(n):
            probs[j] = pe.pair_moment(anchor, j) / anchor_mass
        raw = probs.copy()
        probs = np.clip(probs, 0.0, 1.0)
        diag.clamp_events += int(np.sum((raw < -1e-9) | (raw > 1 + 1e-9)))
        diag.clamp_total += n
        diag.expected_sizes.append(float(probs.sum()))
        members = frozenset(int(j) for j in np.where(rng.random(n) < probs)[0])
        if members:
            collected.append(members)
            covered |= members
        diag.covered_history.append(len(covered))
    # recombination
    unions = _subset_unions(collected, max_subsets)
    out = [whole]
    seen = {frozenset(range(n))}
    for union, path in unions:
        if union in seen or not union:
            continue
        seen.add(union)
        out.append(ClusteringCandidate([union], f"union{path}-depth{_depth}"))
        if _depth < 1 and k > 2 and len(union) >= 4 * (k - 1):
            idx = sorted(union)
            for k_prime in range(1, k):
                subs, sub_diag = rough_cluster(
                    x[idx], k_prime, t, delta, eps, eta, mode,
                    seed=seed + 101, max_subsets=max_subsets,
                    residual_exit=residual_exit, gap_tol=gap_tol,
                    _depth=_depth + 1)
                diag.solves += sub_diag.solves
                for cand in subs:
                    remapped = [frozenset(idx[j] for j in s)
                                for s in cand.subsets]
                    for s in remapped:
                        if s not in seen and s:
                            seen.add(s)
                            out.append(ClusteringCandidate(
                                [s], cand.provenance + f"<-union{path}"))
    return out, diag


def _neighborhood_warm_start(relax, x: np.ndarray, k: int, eps: float,
                             rng: np.random.Generator) -> np.ndarray:
    """Average moment vector of nearest-neighbor ball indicators.

    Balls around random anchors are usually single-cluster subsets, so the
    warm start sits close to the feasible region; a pinch of uniform random
    subsets keeps the warmed moment matrix well conditioned.
    """
    n = x.shape[0]
    take = max(2, int(round(n / k - eps * n / 2)))
    subsets = []
    for _ in range(min(8, n)):
        anchor = rng.integers(n)
        order = np.argsort(np.linalg.norm(x - x[anchor], axis=1))
        w = np.zeros(n)
        w[order[:take]] = 1.0
        subsets.append(w)
    for _ in range(8):
        w = np.zeros(n)
        w[rng.choice(n, size=take, replace=False)] = 1.0
        subsets.append(w)
    return pseudoexp.moment_vector_of_samples(relax, subsets)


def _subset_unions(collected: list[frozenset], max_subsets: int):
    import itertools

    m = len(collected)
    unions = []
    if m <= max_subsets:
        for r in range(1, m + 1):
            for combo in itertools.combinations(range(m), r):
                u = frozenset().union(*[collected[i] for i in combo])
                unions.append((u, "".join(str(c) for c in combo)))
    else:
        # beyond the cap only contiguous prefixes are tried (logged deviation)
        acc = frozenset()
        for i in range(m):
            acc = acc | collected[i]
            unions.append((acc, f"prefix{i}"))
    return unions


# --------------------------------------------------------- known-mixture tools

@dataclass
class ClosenessPartition:
    parts: list[list[int]]
    kappa: float
    thresholds: dict


def find_closeness_partition(mix: GaussianMixture, eps: float, c: float,
                             n_mc: int = 20000, seed: int = 0
                             ) -> ClosenessPartition:
    """Scale-scan partition: connected at TV <= 1 - eps^(c*kappa), separated
    at TV >= 1 - eps^kappa, kappa found by pigeonhole over the c^j ladder."""
    k = mix.k
    tv = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            tv[i, j] = tv[j, i] = tv_distance(
                mix.components[i], mix.components[j],
                n_mc=n_mc, seed=seed + 31 * i + j).value
    for j_exp in range(k, 0, -1):
        kappa = c ** (j_exp - 1)
        connect_thr = 1 - eps ** (c * kappa)
        parts = _tv_components(tv, connect_thr)
        ok = True
        for a in range(k):
            for b in range(k):
                if a < b and _part_of(parts, a) != _part_of(parts, b):
                    if tv[a, b] < 1 - eps ** kappa:
                        ok = False
        if ok:
            return ClosenessPartition(parts, kappa,
                                      {"connect": connect_thr,
                                       "separate": 1 - eps ** kappa})
    return ClosenessPartition([list(range(k))], 1.0,
                              {"connect": 0.0, "separate": 1.0})


def _tv_components(tv: np.ndarray, threshold: float) -> list[list[int]]:
    k = tv.shape[0]
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(k):
        for j in range(i + 1, k):
            if tv[i, j] <= threshold:
                parent[find(i)] = find(j)
    comps: dict[int, list[int]] = {}
    for i in range(k):
        comps.setdefault(find(i), []).append(i)
    return [sorted(v) for v in comps.values()]


def _part_of(parts: list[list[int]], idx: int) -> int:
    for pi, p in enumerate(parts):
        if idx in p:
            return pi
    raise ValueError


@dataclass
class PartitionSplit:
    s_side: list[int]
    t_side: list[int]
    case: str            # "mean" | "variance" | "covariance"
    witness: np.ndarray | None
    values: dict


def exists_partition_diagnostic(mix: GaussianMixture, C: float
                                ) -> PartitionSplit | None:
    """Certified two-sided split when some pair is far from C_k-close.

    Searches the three separation mechanisms in order: a direction splitting
    the means, a direction with a large variance ratio, then the covariance
    Frobenius graph.  Returns None when all pairs are close.
    """
    k = mix.k
    comps = mix.components
    c_big = (k * C) ** (10 * min(k, 3))
    if all(c_closeness(comps[i], comps[j], c_big).close
           for i in range(k) for j in range(i + 1, k)):
        return None
    _, sigma_mix = mix.mean_cov()
    dirs = []
    for i in range(k):
        for j in range(i + 1, k):
            dm = comps[i].mean - comps[j].mean
            if np.linalg.norm(dm) > 1e-12:
                dirs.append(dm / np.linalg.norm(dm))
    rng = np.random.default_rng(0)
    for _ in range(16):
        v = rng.standard_normal(mix.d)
        dirs.append(v / np.linalg.norm(v))
    for i in range(k):
        for j in range(i + 1, k):
            from scipy.linalg import eigh as geigh

            _, vecs = geigh(comps[i].cov, comps[j].cov)
            dirs.extend([vecs[:, 0] / np.linalg.norm(vecs[:, 0]),
                         vecs[:, -1] / np.linalg.norm(vecs[:, -1])])
    threshold = k ** C
    for v in dirs:
        split = _try_mean_split(comps, v, threshold, sigma_mix, k)
        if split is not None:
            return split
    for v in dirs:
        split = _try_variance_split(comps, v, threshold, sigma_mix, k, C)
        if split is not None:
            return split
    return _try_covariance_split(comps, c_big, threshold, sigma_mix, k)


def _try_mean_split(comps, v, threshold, sigma_mix, k):
    proj = np.array([g.mean @ v for g in comps])
    order = np.argsort(proj)
    gaps = np.diff(proj[order])
    if gaps.size == 0:
        return None
    cut = int(np.argmax(gaps))
    s_side = sorted(order[: cut + 1].tolist())
    t_side = sorted(order[cut + 1:].tolist())
    if not s_side or not t_side:
        return None
    mix_var = float(v @ sigma_mix @ v)
    worst = math.inf
    for a in s_side:
        for b in t_side:
            lhs = (proj[a] - proj[b]) ** 2
            rhs = max(threshold * float(v @ (comps[a].cov + comps[b].cov) @ v),
                      mix_var / k**2)
            worst = min(worst, lhs / max(rhs, 1e-300))
    if worst >= 1.0:
        return PartitionSplit(s_side, t_side, "mean", v, {"margin": worst})
    return None


def _try_variance_split(comps, v, threshold, sigma_mix, k, C):
    var = np.array([float(v @ g.cov @ v) for g in comps])
    order = np.argsort(-var)
    mix_var = float(v @ sigma_mix @ v)
    for cut in range(len(order) - 1):
        hi, lo = var[order[cut]], var[order[cut + 1]]
        if lo <= 0:
            continue
        if var[order[cut]] / var[order[cut + 1]] >= threshold and \
                var[order[cut]] / mix_var >= k ** (-2.0 * C * k):
            s_side = sorted(order[: cut + 1].tolist())
            t_side = sorted(order[cut + 1:].tolist())
            return PartitionSplit(s_side, t_side, "variance", v,
                                  {"ratio": hi / lo})
    return None


def _try_covariance_split(comps, c_big, threshold, sigma_mix, k):
    from .gaussians import _inv_sqrt

    base = None
    for i in range(k):
        for j in range(i + 1, k):
            if not c_closeness(comps[i], comps[j], c_big).close:
                base = (i, j)
                break
        if base:
            break
    if base is None:
        return None
    a0 = base[0]
    w0 = _inv_sqrt(comps[a0].cov)
    normalized = [w0 @ g.cov @ w0 for g in comps]
    parent = list(range(k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(k):
        for j in range(i + 1, k):
            gap = float(np.linalg.norm(normalized[i] - normalized[j], "fro") ** 2)
            if gap <= c_big / k**2:
                parent[find(i)] = find(j)
    comp_of = [find(i) for i in range(k)]
    root = comp_of[base[0]]
    s_side = sorted(i for i in range(k) if comp_of[i] == root)
    t_side = sorted(i for i in range(k) if comp_of[i] != root)
    if not t_side:
        return None
    vals = {}
    for a in s_side:
        for b in t_side:
            wa = _inv_sqrt(comps[a].cov)
            m = np.eye(comps[a].d) - wa @ comps[b].cov @ wa
            vals[(a, b)] = float(np.linalg.norm(m, "fro") ** 2)
    return PartitionSplit(s_side, t_side, "covariance", None,
                          {"frobenius_sq": vals})
