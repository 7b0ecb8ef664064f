"""Gaussians, mixtures, sampling, distances, closeness predicates, conditioning.

Total variation between Gaussians is estimated either by 1-d numeric
integration (exact up to quadrature error) or by Monte Carlo importance
sampling from the equal-weight average of the two densities; every Monte
Carlo estimate carries an error bar and threshold comparisons are made
against the bar, never the point estimate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate


class CovarianceError(ValueError):
    """Covariance fails symmetry / positive-definiteness / conditioning bounds."""


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if cov.shape != (mean.size, mean.size):
            raise CovarianceError(f"shape mismatch: mean {mean.shape}, cov {cov.shape}")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise CovarianceError("covariance not symmetric")
        eigs = np.linalg.eigvalsh(cov)
        if eigs.min() <= 0:
            raise CovarianceError(f"covariance not PD (min eigenvalue {eigs.min():.3g})")

    @property
    def d(self) -> int:
        return self.mean.size

    def check_conditioning(self, eig_lo: float, eig_hi: float) -> bool:
        eigs = np.linalg.eigvalsh(self.cov)
        return eig_lo <= eigs.min() and eigs.max() <= eig_hi

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        chol = np.linalg.cholesky(self.cov)
        diff = x - self.mean
        sol = np.linalg.solve(chol, diff.T)
        quad = np.sum(sol**2, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        return -0.5 * (quad + logdet + self.d * math.log(2 * math.pi))

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        chol = np.linalg.cholesky(self.cov)
        return self.mean + rng.standard_normal((n, self.d)) @ chol.T


@dataclass
class GaussianMixture:
    weights: np.ndarray
    components: list[Gaussian]
    weight_denominator_bound: int | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.components):
            raise ValueError("weights / components length mismatch")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {self.weights.sum()}, not 1")
        if self.weight_denominator_bound is not None:
            a = self.weight_denominator_bound
            for w in self.weights:
                if min(abs(w - round(w * q) / q) for q in range(1, a + 1)) > 1e-9:
                    raise ValueError(
                        f"weight {w} is not rational with denominator <= {a}")

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.components[0].d

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        logs = np.stack([g.logpdf(x) for g in self.components], axis=0)
        logs += np.log(self.weights)[:, None]
        m = logs.max(axis=0)
        return m + np.log(np.exp(logs - m).sum(axis=0))

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def mean_cov(self) -> tuple[np.ndarray, np.ndarray]:
        mu = sum(w * g.mean for w, g in zip(self.weights, self.components))
        cov = sum(
            w * (g.cov + np.outer(g.mean - mu, g.mean - mu))
            for w, g in zip(self.weights, self.components))
        return mu, cov


def sample(mix: GaussianMixture, n: int, seed) -> np.ndarray:
    """n i.i.d. draws; estimators never see the component labels."""
    return sample_with_labels(mix, n, seed)[0]


def sample_with_labels(mix: GaussianMixture, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draws plus the latent label stream, for diagnostics only."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.choice(mix.k, size=n, p=mix.weights)
    out = np.empty((n, mix.d))
    for i in range(mix.k):
        idx = np.where(labels == i)[0]
        if idx.size:
            out[idx] = mix.components[i].sample(idx.size, rng)
    return out, labels


# ----------------------------------------------------------------- distances

@dataclass(frozen=True)
class TVEstimate:
    value: float
    error: float
    method: str

    def definitely_below(self, threshold: float) -> bool:
        return self.value + self.error < threshold

    def definitely_above(self, threshold: float) -> bool:
        return self.value - self.error > threshold


def tv_distance(g1: Gaussian, g2: Gaussian, method: str = "auto",
                n_mc: int = 20000, seed: int = 0) -> TVEstimate:
    if g1.d != g2.d:
        raise ValueError("dimension mismatch")
    if method == "auto":
        method = "closed_1d" if g1.d == 1 else "monte_carlo"
    if method == "closed_1d":
        if g1.d != 1:
            raise ValueError("closed_1d needs d=1")
        s = 4 * math.sqrt(max(g1.cov[0, 0], g2.cov[0, 0]))
        lo = min(g1.mean[0], g2.mean[0]) - 3 * s
        hi = max(g1.mean[0], g2.mean[0]) + 3 * s

        def diff(x):
            p = math.exp(g1.logpdf(np.array([[x]]))[0])
            q = math.exp(g2.logpdf(np.array([[x]]))[0])
            return abs(p - q)

        val, abserr = integrate.quad(diff, lo, hi, limit=400)
        return TVEstimate(0.5 * val, 0.5 * abserr + 1e-9, "closed_1d")
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method}")
    rng = np.random.default_rng(seed)
    half = n_mc // 2
    xs = np.vstack([g1.sample(half, rng), g2.sample(n_mc - half, rng)])
    l1 = g1.logpdf(xs)
    l2 = g2.logpdf(xs)
    # TV = E_q[|p1-p2|/(p1+p2)] under q = (p1+p2)/2; the integrand is in [0,1].
    m = np.maximum(l1, l2)
    r = np.abs(np.exp(l1 - m) - np.exp(l2 - m)) / (np.exp(l1 - m) + np.exp(l2 - m))
    err = 1.96 * float(r.std(ddof=1)) / math.sqrt(n_mc)
    return TVEstimate(float(r.mean()), err, "monte_carlo")


def parameter_distance_bound(g1: Gaussian, g2: Gaussian) -> float:
    """Mahalanobis-plus-Frobenius upper bound on TV (constant-1 convention)."""
    inv = np.linalg.inv(g1.cov)
    diff = g2.mean - g1.mean
    mean_term = math.sqrt(float(diff @ inv @ diff))
    w = _inv_sqrt(g1.cov)
    cov_term = float(np.linalg.norm(w @ g2.cov @ w - np.eye(g1.d), "fro"))
    return mean_term + cov_term


def _inv_sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() <= 0:
        raise CovarianceError("singular covariance")
    return vecs @ np.diag(vals**-0.5) @ vecs.T


def _sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    return vecs @ np.diag(np.sqrt(np.maximum(vals, 0))) @ vecs.T


# ------------------------------------------------------------------ closeness

@dataclass(frozen=True)
class ClosenessResult:
    close: bool
    failing_condition: str | None = None
    witness: np.ndarray | None = None
    values: dict = field(default_factory=dict)

    def __bool__(self):
        return self.close


def c_closeness(g1: Gaussian, g2: Gaussian, C: float) -> ClosenessResult:
    """Three-condition closeness check; sup over directions is taken exactly.

    The mean and variance conditions are Rayleigh-quotient problems solved by
    (generalized) eigendecomposition; the covariance condition uses the
    squared Frobenius norm of I - S'^{-1/2} S S'^{-1/2}.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    s_sum = g1.cov + g2.cov
    diff = g1.mean - g2.mean
    # mean condition: sup_v ((v.mu - v.mu')^2 / v^T(S+S')v) = diff^T (S+S')^-1 diff
    inv_sum = np.linalg.inv(s_sum)
    mean_stat = float(diff @ inv_sum @ diff)
    if mean_stat > C:
        w = inv_sum @ diff
        return ClosenessResult(False, "mean", w / np.linalg.norm(w),
                               {"mean_stat": mean_stat})
    # variance condition: generalized eigenvalues of (S, S') in both orders
    from scipy.linalg import eigh as geigh

    vals12, vecs12 = geigh(g1.cov, g2.cov)
    vals21 = 1.0 / vals12
    var_stat = max(vals12.max(), vals21.max())
    if var_stat > C:
        idx = int(np.argmax(vals12)) if vals12.max() >= vals21.max() \
            else int(np.argmin(vals12))
        w = vecs12[:, idx]
        return ClosenessResult(False, "variance", w / np.linalg.norm(w),
                               {"mean_stat": mean_stat, "var_stat": var_stat})
    w2 = _inv_sqrt(g2.cov)
    m = np.eye(g1.d) - w2 @ g1.cov @ w2
    cov_stat = float(np.linalg.norm(m, "fro") ** 2)
    if cov_stat > C:
        vals, vecs = np.linalg.eigh(m)
        idx = int(np.argmax(np.abs(vals)))
        return ClosenessResult(False, "covariance", vecs[:, idx],
                               {"mean_stat": mean_stat, "var_stat": var_stat,
                                "cov_stat": cov_stat})
    return ClosenessResult(True, None, None,
                           {"mean_stat": mean_stat, "var_stat": var_stat,
                            "cov_stat": cov_stat})


# ------------------------------------------------------------ well-conditioned

@dataclass
class WellConditionedReport:
    status: str  # "true" | "false" | "indeterminate"
    edges: list[tuple[int, int]]
    failing_pair: tuple[int, int] | None = None
    reason: str | None = None
    tv_table: dict = field(default_factory=dict)

    def __bool__(self):
        return self.status == "true"


def well_conditioned(mix: GaussianMixture, delta: float, n_mc: int = 20000,
                     seed: int = 0) -> WellConditionedReport:
    """Connectivity at TV <= 1-delta, pairwise TV >= delta, weights >= delta.

    Monte Carlo TV estimates carry error bars; an edge whose bar straddles a
    threshold makes the whole verdict indeterminate instead of a guess.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0,1)")
    k = mix.k
    if mix.weights.min() < delta:
        return WellConditionedReport("false", [], None, "weight below delta")
    edges = []
    tv_table = {}
    for i in range(k):
        for j in range(i + 1, k):
            est = tv_distance(mix.components[i], mix.components[j],
                              n_mc=n_mc, seed=seed + 97 * i + j)
            tv_table[(i, j)] = (est.value, est.error)
            if not est.definitely_above(delta):
                if est.definitely_below(delta):
                    return WellConditionedReport(
                        "false", edges, (i, j), "pair below delta TV", tv_table)
                return WellConditionedReport(
                    "indeterminate", edges, (i, j), "TV bar straddles delta", tv_table)
            if est.definitely_below(1 - delta):
                edges.append((i, j))
            elif not est.definitely_above(1 - delta):
                return WellConditionedReport(
                    "indeterminate", edges, (i, j), "TV bar straddles 1-delta", tv_table)
    if not _connected(k, edges):
        return WellConditionedReport("false", edges, None, "graph disconnected", tv_table)
    return WellConditionedReport("true", edges, None, None, tv_table)


def _connected(k: int, edges: list[tuple[int, int]]) -> bool:
    if k <= 1:
        return True
    adj = {i: set() for i in range(k)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == k


# ------------------------------------------------------------------ flattening

def flatten_dim(d: int) -> int:
    return d * (d + 1) // 2


def flatten(sigma: np.ndarray) -> np.ndarray:
    """Symmetric matrix -> (a11, 2*a12, ..., a_dd), row-major upper triangle.

    The doubled off-diagonals make the flattened vector the coefficient
    vector of the quadratic form X^T A X in the monomial basis {X_i X_j}.
    """
    sigma = np.asarray(sigma, dtype=float)
    if not np.allclose(sigma, sigma.T, atol=1e-12):
        raise ValueError("input not symmetric")
    d = sigma.shape[0]
    out = np.empty(flatten_dim(d))
    idx = 0
    for i in range(d):
        for j in range(i, d):
            out[idx] = sigma[i, j] if i == j else 2.0 * sigma[i, j]
            idx += 1
    return out


def unflatten(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    d = int((math.isqrt(8 * vec.size + 1) - 1) // 2)
    if flatten_dim(d) != vec.size:
        raise ValueError(f"length {vec.size} is not a triangular number layout")
    out = np.zeros((d, d))
    idx = 0
    for i in range(d):
        for j in range(i, d):
            if i == j:
                out[i, j] = vec[idx]
            else:
                out[i, j] = out[j, i] = vec[idx] / 2.0
            idx += 1
    return out


def flatten_pairs(d: int) -> list[tuple[int, int]]:
    """The (i, j) pair carried by each flattened coordinate."""
    return [(i, j) for i in range(d) for j in range(i, d)]


# ------------------------------------------------------- restated-lemma checks

def h_affinity(tv: float) -> float:
    """h(P,Q) = -log(1 - d_TV(P,Q)); convenience only."""
    return -math.log(max(1e-300, 1.0 - tv))


@dataclass
class RatioLemmaReport:
    ok: bool
    tv_ab: float
    tv_ac: float
    tv_bc: float
    exponent: float | None
    ratio_frequency: float


def ratio_lemma_check(a: Gaussian, b: Gaussian, c: Gaussian, lam: float,
                      eps: float = 1e-3, n_mc: int = 20000,
                      seed: int = 0) -> RatioLemmaReport:
    """Empirical check of the far-Gaussian transfer bound and probability ratios.

    When d_TV(A,B) <= 1-lam and d_TV(A,C) >= 1-eps, the distance d_TV(B,C)
    must be >= 1 - eps^c for some exponent c(lam); the realized exponent is
    recorded.  Also measures how often eps <= A(x)/B(x) <= 1/eps for x ~ A.
    """
    tv_ab = tv_distance(a, b, n_mc=n_mc, seed=seed).value
    tv_ac = tv_distance(a, c, n_mc=n_mc, seed=seed + 1).value
    tv_bc = tv_distance(b, c, n_mc=n_mc, seed=seed + 2).value
    rng = np.random.default_rng(seed + 3)
    xs = a.sample(n_mc, rng)
    ratio = a.logpdf(xs) - b.logpdf(xs)
    freq = float(np.mean((ratio >= math.log(eps)) & (ratio <= -math.log(eps))))
    exponent = None
    ok = True
    if tv_ab <= 1 - lam and tv_ac >= 1 - eps:
        gap = max(1.0 - tv_bc, 1e-12)
        exponent = math.log(gap) / math.log(eps)
        ok = exponent > 0.05  # bc must also be nearly maximally far
    return RatioLemmaReport(ok, tv_ab, tv_ac, tv_bc, exponent, freq)


# ------------------------------------------------------------------ I/O schema

def mixture_to_json(mix: GaussianMixture) -> str:
    doc = {
        "d": mix.d,
        "components": [
            {"weight": float(w), "mean": g.mean.tolist(), "cov": g.cov.tolist()}
            for w, g in zip(mix.weights, mix.components)
        ],
    }
    return json.dumps(doc, sort_keys=True)


def mixture_from_json(text: str) -> GaussianMixture:
    doc = json.loads(text)
    weights = [c["weight"] for c in doc["components"]]
    comps = [Gaussian(np.array(c["mean"]), np.array(c["cov"]))
             for c in doc["components"]]
    return GaussianMixture(np.array(weights), comps)


def save_samples(path, samples: np.ndarray):
    np.savetxt(path, samples, delimiter=",")


def load_samples(path) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",")
    return np.atleast_2d(arr)
