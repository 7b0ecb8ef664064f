"""Strong-contamination adversaries: replace up to floor(eps*n) rows, reorder.

Every adversary is a deterministic function of (samples, plan); the output
row order is a permutation chosen by the adversary, so original indices are
not recoverable downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ADVERSARIES = ("point_mass", "shifted_cluster", "density_decoy", "worst_moment")


@dataclass(frozen=True)
class CorruptionPlan:
    epsilon: float
    adversary: str = "point_mass"
    seed: int = 0
    magnitude: float = 100.0
    direction: tuple | None = None  # unit direction; defaults to e_1

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 0.5:
            raise ValueError("epsilon must lie in [0, 1/2)")
        if self.adversary not in ADVERSARIES:
            raise ValueError(f"unknown adversary {self.adversary!r}")


def corrupt(samples: np.ndarray, plan: CorruptionPlan) -> np.ndarray:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n, d = samples.shape
    rng = np.random.default_rng(plan.seed)
    budget = int(np.floor(plan.epsilon * n))
    out = samples.copy()
    if budget > 0:
        direction = np.zeros(d)
        if plan.direction is None:
            direction[0] = 1.0
        else:
            direction[:] = np.asarray(plan.direction, dtype=float)
            direction /= np.linalg.norm(direction)
        out = _ADVERSARY_FNS[plan.adversary](out, budget, plan, direction, rng)
    return out[rng.permutation(n)]


def _point_mass(x, budget, plan, direction, rng):
    idx = rng.choice(x.shape[0], size=budget, replace=False)
    spike = x.mean(axis=0) + plan.magnitude * direction
    x[idx] = spike
    return x


def _shifted_cluster(x, budget, plan, direction, rng):
    # moves the points with largest norm; deterministic given the sample
    idx = np.argsort(-np.linalg.norm(x, axis=1), kind="stable")[:budget]
    x[idx] = x[idx] + plan.magnitude * direction
    return x


def _density_decoy(x, budget, plan, direction, rng):
    # a fake component: unit-covariance cluster centered off the data mean
    center = x.mean(axis=0) + plan.magnitude * direction
    idx = rng.choice(x.shape[0], size=budget, replace=False)
    x[idx] = center + rng.standard_normal((budget, x.shape[1]))
    return x


def _worst_moment(x, budget, plan, direction, rng):
    """Greedy spike placement maximizing the empirical Hermite shift.

    Scores candidate locations by the norm of the degree-3 Hermite kernel
    vector they would contribute, which is the statistic the downstream
    estimators consume.
    """
    from .hermite import hermite_sample_vectors

    d = x.shape[1]
    dirs = rng.standard_normal((24, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = plan.magnitude * np.array([0.25, 0.5, 1.0])
    cands = (dirs[:, None, :] * radii[None, :, None]).reshape(-1, d)
    vecs, _ = hermite_sample_vectors(cands, 3, weighting="series")
    best = cands[int(np.argmax(np.linalg.norm(vecs, axis=1)))]
    idx = rng.choice(x.shape[0], size=budget, replace=False)
    x[idx] = x.mean(axis=0) + best
    return x


_ADVERSARY_FNS = {
    "point_mass": _point_mass,
    "shifted_cluster": _shifted_cluster,
    "density_decoy": _density_decoy,
    "worst_moment": _worst_moment,
}
