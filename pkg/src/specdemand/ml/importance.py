"""Gain-based and permutation feature importance."""
from __future__ import annotations

import numpy as np

from .metrics import r2
from .tree import GbrModel, RandomForest, RegressionTree


def _trees(model):
    if isinstance(model, RegressionTree):
        return [model]
    if isinstance(model, (GbrModel, RandomForest)):
        return list(model.trees)
    return list(model)


def gain_importance(model) -> np.ndarray:
    """Each feature's share of the total split gain across all trees.

    Accepts a tree, a forest, a boosted model or a list of trees.  A model
    without splits yields uniform importances.
    """
    trees = _trees(model)
    p = trees[0].n_features if trees else model.n_features
    totals = np.zeros(p)
    for t in trees:
        internal = t.feature >= 0
        np.add.at(totals, t.feature[internal], t.gain[internal])
    s = totals.sum()
    if not s > 0:
        return np.full(p, 1.0 / p)
    return totals / s


def permutation_importance(model, X, y, n_repeats: int = 5, seed: int = 0) -> np.ndarray:
    """Mean drop in R^2 when each column is shuffled.

    For feature 0, 1, ... in turn and ``n_repeats`` times each, one
    permutation is drawn from a PCG64 generator seeded by ``seed``.
    Negative drops are kept.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    base = r2(y, model.predict(X))
    out = np.zeros(X.shape[1])
    Xp = X.copy()
    for j in range(X.shape[1]):
        drops = []
        for _ in range(n_repeats):
            Xp[:, j] = X[rng.permutation(X.shape[0]), j]
            drops.append(base - r2(y, model.predict(Xp)))
        Xp[:, j] = X[:, j]
        out[j] = float(np.mean(drops))
    return out
