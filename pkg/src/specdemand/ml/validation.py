"""k-fold cross-validation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateVariance, InvalidInput, TooFewRows
from .metrics import r2, rmse


@dataclass
class CVResult:
    fold_sizes: list
    fold_r2: list
    fold_rmse: list

    @property
    def mean_r2(self) -> float:
        return float(np.nanmean(self.fold_r2))

    @property
    def std_r2(self) -> float:
        return float(np.nanstd(self.fold_r2))

    @property
    def mean_rmse(self) -> float:
        return float(np.mean(self.fold_rmse))

    @property
    def std_rmse(self) -> float:
        return float(np.std(self.fold_rmse))

    def to_dict(self) -> dict:
        return {"fold_sizes": list(self.fold_sizes),
                "fold_r2": [None if np.isnan(v) else v for v in self.fold_r2],
                "fold_rmse": list(self.fold_rmse),
                "mean_r2": self.mean_r2, "std_r2": self.std_r2,
                "mean_rmse": self.mean_rmse, "std_rmse": self.std_rmse}


def fold_sizes(n: int, k: int) -> list[int]:
    """Sizes of ``k`` contiguous folds; the remainder goes to the first folds."""
    base, extra = divmod(n, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def kfold_indices(n: int, k: int, seed: int = 0):
    """Yield ``(train_idx, test_idx)`` after one seeded permutation of ``range(n)``."""
    if k < 2:
        raise InvalidInput("k must be >= 2")
    if n < k:
        raise TooFewRows(f"{n} rows cannot fill {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    start = 0
    for size in fold_sizes(n, k):
        test = perm[start:start + size]
        train = np.concatenate([perm[:start], perm[start + size:]])
        start += size
        yield train, test


def kfold_cv(X, y, k: int, fit, seed: int = 0) -> CVResult:
    """Cross-validate ``fit(X, y) -> model`` (anything with ``predict``).

    A fold whose held-out targets are constant records R^2 as NaN.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    sizes, r2s, rmses = [], [], []
    for train, test in kfold_indices(len(y), k, seed):
        model = fit(X[train], y[train])
        pred = model.predict(X[test])
        sizes.append(int(test.size))
        if test.size >= 2:
            try:
                r2s.append(r2(y[test], pred))
            except DegenerateVariance:
                r2s.append(float("nan"))
            rmses.append(rmse(y[test], pred))
        else:
            r2s.append(float("nan"))
            rmses.append(float(abs(y[test][0] - pred[0])))
    return CVResult(sizes, r2s, rmses)
