"""Seeded k-means (k-means++ initialisation, Lloyd iterations)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInput, TooFewRows


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list = field(default_factory=list)


def _sq_dist(P, C):
    return ((P[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _plus_plus(P, k, rng):
    n = P.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((P - P[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total > 0:
            cum = np.cumsum(d2)
            idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            taken = set(chosen)
            idx = next(i for i in range(n) if i not in taken)
        chosen.append(idx)
        d2 = np.minimum(d2, ((P - P[idx]) ** 2).sum(axis=1))
    return P[chosen].copy()


def _repair_empty(P, C, assign, k):
    counts = np.bincount(assign, minlength=k)
    for e in np.flatnonzero(counts == 0):
        big = int(np.argmax(counts))
        members = np.flatnonzero(assign == big)
        far = members[int(np.argmax(((P[members] - C[big]) ** 2).sum(axis=1)))]
        assign[far] = e
        C[e] = P[far]
        counts[big] -= 1
        counts[e] += 1


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """Cluster ``points`` (n x d) into ``k`` groups.

    Initial centers follow k-means++ with draws from a PCG64 generator
    seeded by ``seed``: one integer for the first center, then one uniform
    per further center.  Lloyd iterations run until assignments stop
    changing or ``max_iter`` is hit.  Ties in distance go to the lowest
    cluster index; a cluster that empties takes the farthest member of the
    largest cluster.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2:
        raise InvalidInput("points must be a 2-D array")
    n = P.shape[0]
    if k < 1:
        raise InvalidInput("k must be >= 1")
    if n < k:
        raise TooFewRows(f"{n} points cannot form {k} clusters")
    rng = np.random.default_rng(seed)
    C = _plus_plus(P, k, rng)
    assign = _assign(P, C, k)
    history = [_inertia(P, C, assign)]
    it = 0
    for it in range(1, max_iter + 1):
        for j in range(k):
            C[j] = P[assign == j].mean(axis=0)
        new = _assign(P, C, k)
        history.append(_inertia(P, C, new))
        if np.array_equal(new, assign):
            break
        assign = new
    return KMeansResult(C, assign, history[-1], it, history)


def _assign(P, C, k):
    """Nearest center (lowest index on ties), then fill any empty cluster."""
    assign = np.argmin(_sq_dist(P, C), axis=1)
    _repair_empty(P, C, assign, k)
    return assign


def _inertia(P, C, assign) -> float:
    return float(((P - C[assign]) ** 2).sum())
