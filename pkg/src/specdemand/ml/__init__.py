"""Learning primitives: linear models, trees, ensembles, clustering, metrics."""
from .importance import gain_importance, permutation_importance
from .kmeans import KMeansResult, kmeans
from .linear import LinearModel, fit_lasso, fit_ols, fit_ridge, soft_threshold
from .metrics import r2, rmse
from .tree import (GbrModel, RandomForest, RegressionTree, fit_forest, fit_gbr,
                   fit_tree)
from .validation import CVResult, fold_sizes, kfold_cv, kfold_indices

_KINDS = {
    "ols": LinearModel, "ridge": LinearModel, "lasso": LinearModel,
    "tree": RegressionTree, "forest": RandomForest, "gbr": GbrModel,
}


def model_to_dict(model) -> dict:
    return model.to_dict()


def model_from_dict(d: dict):
    """Rebuild any model serialised by its ``to_dict``."""
    return _KINDS[d["kind"]].from_dict(d)


__all__ = [
    "CVResult", "GbrModel", "KMeansResult", "LinearModel", "RandomForest", "RegressionTree",
    "fit_forest", "fit_gbr", "fit_lasso", "fit_ols", "fit_ridge", "fit_tree", "fold_sizes",
    "gain_importance", "kfold_cv", "kfold_indices", "kmeans", "model_from_dict",
    "model_to_dict", "permutation_importance", "r2", "rmse", "soft_threshold",
]
