"""Maximin Latin hypercube designs on the unit hypercube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

DEFAULT_CANDIDATES = 1000


@dataclass
class Design:
    """An n x d point set in [0,1]^d with one point per axis stratum."""

    points: np.ndarray
    seed: int
    n_candidates: int

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _random_lhs(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    # one jittered point per cell [(k-1)/n, k/n) along every axis
    jitter = rng.random((n, d))
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    return (strata + jitter) / n


def min_pairwise_distance(design) -> float:
    """Minimum Euclidean distance over all point pairs of a design."""
    pts = design.points if isinstance(design, Design) else np.asarray(design, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[0] < 2:
        raise ValueError("need at least 2 points for a pairwise distance")
    return float(pdist(pts).min())


def maximin_lhs(n: int, d: int, seed: int, n_candidates: int = DEFAULT_CANDIDATES) -> Design:
    """Best of `n_candidates` random Latin hypercubes under the maximin criterion.

    Candidate k is generated from a seed derived deterministically from
    (seed, k), so the candidate stream is reproducible and a larger
    candidate budget can only improve the minimum pairwise distance.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    if n_candidates < 1:
        raise ValueError("n_candidates must be at least 1")
    children = np.random.SeedSequence(seed).spawn(n_candidates)
    best_pts = None
    best_dist = -np.inf
    for child in children:
        pts = _random_lhs(n, d, np.random.default_rng(child))
        dist = np.inf if n < 2 else float(pdist(pts).min())
        if dist > best_dist:
            best_pts, best_dist = pts, dist
    return Design(points=best_pts, seed=int(seed), n_candidates=int(n_candidates))
