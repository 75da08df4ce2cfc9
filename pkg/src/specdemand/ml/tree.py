"""Regression trees, random forests and gradient-boosted trees (squared error)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..errors import InvalidInput

LEAF = -1


@dataclass
class RegressionTree:
    """Flattened binary tree in pre-order; node 0 is the root.

    Internal nodes route ``x[feature] <= threshold`` to ``left``.  Leaves have
    ``feature == -1`` and carry ``value`` (mean of their training targets).
    """

    feature: np.ndarray
    threshold: np.ndarray
    gain: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_splits(self) -> int:
        return int((self.feature >= 0).sum())

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return _kernels.predict_tree(self.feature, self.threshold, self.left, self.right,
                                     self.value, X)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=float)
        ids = np.arange(self.n_nodes, dtype=float)
        return _kernels.predict_tree(self.feature, self.threshold, self.left, self.right,
                                     ids, X).astype(np.int64)

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            leaf = self.feature[i] < 0
            nodes.append({
                "feature": int(self.feature[i]),
                "threshold": None if leaf else float(self.threshold[i]),
                "gain": float(self.gain[i]),
                "left": int(self.left[i]),
                "right": int(self.right[i]),
                "leaf_value": float(self.value[i]) if leaf else None,
            })
        return {"kind": "tree", "n_features": self.n_features, "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        nodes = d["nodes"]
        return cls(
            np.array([n["feature"] for n in nodes], dtype=np.int64),
            np.array([0.0 if n["threshold"] is None else n["threshold"] for n in nodes]),
            np.array([n["gain"] for n in nodes], dtype=float),
            np.array([n["left"] for n in nodes], dtype=np.int64),
            np.array([n["right"] for n in nodes], dtype=np.int64),
            np.array([math.nan if n["leaf_value"] is None else n["leaf_value"] for n in nodes]),
            int(d["n_features"]),
        )


def _n_split_features(p, feature_frac):
    if feature_frac is None or feature_frac >= 1.0:
        return p
    if not feature_frac > 0:
        raise InvalidInput(f"feature_frac must be in (0, 1], got {feature_frac}")
    return min(p, math.ceil(feature_frac * p))


def _grow(ps, p, max_depth, min_leaf, m, rng) -> RegressionTree:
    feature, threshold, gain, left, right, value = [], [], [], [], [], []
    all_features = np.arange(p, dtype=np.int64)

    def build(start, end, depth):
        i = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        gain.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(math.nan)
        split = None
        if depth < max_depth and end - start >= max(2, 2 * min_leaf):
            if m < p:
                feats = np.sort(rng.choice(p, size=m, replace=False)).astype(np.int64)
            else:
                feats = all_features
            split = ps.best_split(start, end, feats, min_leaf)
        if split is None:
            value[i] = ps.node_mean(start, end)
            return i
        f, thr, g = split
        mid = ps.partition(start, end, f, thr)
        feature[i], threshold[i], gain[i] = f, thr, g
        left[i] = build(start, mid, depth + 1)
        right[i] = build(mid, end, depth + 1)
        return i

    build(0, ps.samples.shape[0], 0)
    return RegressionTree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
                          np.array(gain, dtype=float), np.array(left, dtype=np.int64),
                          np.array(right, dtype=np.int64), np.array(value, dtype=float), p)


def _check_xy(X, y):
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise InvalidInput(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise InvalidInput("non-finite values in training data")
    return X, y


def fit_tree(X, y, max_depth: int = 3, min_leaf: int = 1, feature_frac: float | None = None,
             rng: np.random.Generator | None = None) -> RegressionTree:
    """Greedy CART regression tree.

    Each split maximises ``SSE(parent) - SSE(left) - SSE(right)`` over all
    (or a random ``feature_frac`` subset of) features and midpoints between
    consecutive distinct values.  Ties go to the lower feature index, then
    the lower threshold.  Growth stops at ``max_depth``, when a child would
    hold fewer than ``min_leaf`` rows, or when no split has positive gain.
    """
    X, y = _check_xy(X, y)
    if max_depth < 0 or min_leaf < 1:
        raise InvalidInput("max_depth must be >= 0 and min_leaf >= 1")
    p = X.shape[1]
    m = _n_split_features(p, feature_frac)
    if m < p and rng is None:
        raise InvalidInput("a random generator is required when feature_frac < 1")
    return _grow(_kernels.Presort(X, y), p, max_depth, min_leaf, m, rng)


@dataclass
class RandomForest:
    trees: list
    n_features: int
    seed: int = 0

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[0])
        for t in self.trees:
            out += t.predict(X)
        return out / len(self.trees)

    def to_dict(self) -> dict:
        return {"kind": "forest", "n_features": self.n_features, "seed": self.seed,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        return cls([RegressionTree.from_dict(t) for t in d["trees"]], int(d["n_features"]),
                   int(d.get("seed", 0)))


def fit_forest(X, y, n_trees: int = 200, max_depth: int = 8, min_leaf: int = 2,
               feature_frac: float = 1 / 3, seed: int = 0, bootstrap: bool = True) -> RandomForest:
    """Bagged trees with per-split feature subsampling.

    One PCG64 generator seeded with ``seed`` drives everything: for each
    tree in turn, ``n`` bootstrap row indices are drawn first, then one
    feature subset per attempted split in pre-order.
    """
    X, y = _check_xy(X, y)
    if n_trees < 1:
        raise InvalidInput("n_trees must be >= 1")
    n, p = X.shape
    m = _n_split_features(p, feature_frac)
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_trees):
        if bootstrap:
            rows = rng.integers(0, n, size=n)
            ps = _kernels.Presort(X[rows], y[rows])
        else:
            ps = _kernels.Presort(X, y)
        trees.append(_grow(ps, p, max_depth, min_leaf, m, rng))
    return RandomForest(trees, p, seed)


@dataclass
class GbrModel:
    """``prediction = init + learning_rate * sum(tree outputs)``."""

    init: float
    learning_rate: float
    trees: list
    n_features: int
    train_mse: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], self.init)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def staged_predict(self, X):
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], self.init)
        yield out.copy()
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
            yield out.copy()

    def to_dict(self) -> dict:
        return {"kind": "gbr", "init": self.init, "learning_rate": self.learning_rate,
                "n_features": self.n_features, "train_mse": list(self.train_mse),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "GbrModel":
        return cls(float(d["init"]), float(d["learning_rate"]),
                   [RegressionTree.from_dict(t) for t in d["trees"]], int(d["n_features"]),
                   list(d.get("train_mse", [])))


def fit_gbr(X, y, n_estimators: int = 300, learning_rate: float = 0.05, max_depth: int = 3,
            min_leaf: int = 5, seed: int = 0, subsample: float = 1.0) -> GbrModel:
    """Stage-wise least-squares boosting.

    Starts from the target mean; each stage fits a tree to the current
    residuals and adds ``learning_rate`` times its output.  With
    ``subsample < 1`` each stage sees a row subset drawn (without
    replacement) from a PCG64 generator seeded with ``seed``.
    """
    X, y = _check_xy(X, y)
    if n_estimators < 1:
        raise InvalidInput("n_estimators must be >= 1")
    if not 0 < learning_rate <= 1:
        raise InvalidInput(f"learning_rate must be in (0, 1], got {learning_rate}")
    if not 0 < subsample <= 1:
        raise InvalidInput(f"subsample must be in (0, 1], got {subsample}")
    n, p = X.shape
    init = float(y.mean())
    pred = np.full(n, init)
    model = GbrModel(init, float(learning_rate), [], p)
    rng = np.random.default_rng(seed)
    ps = _kernels.Presort(X, y) if subsample >= 1.0 else None
    res = y - pred
    model.train_mse.append(float(res @ res) / n)
    for _ in range(n_estimators):
        res = y - pred
        if ps is not None:
            ps.reset(res)
            tree = _grow(ps, p, max_depth, min_leaf, p, None)
        else:
            rows = np.sort(rng.choice(n, size=max(1, int(round(subsample * n))), replace=False))
            tree = _grow(_kernels.Presort(X[rows], res[rows]), p, max_depth, min_leaf, p, None)
        pred = pred + learning_rate * tree.predict(X)
        model.trees.append(tree)
        res = y - pred
        model.train_mse.append(float(res @ res) / n)
    return model
