"""Experimental protocol: spatial splits, baseline, model scenarios, reduced-feature reruns."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (SchemaMismatch, SpecDemandError, TooFewFeatures, TooFewRows,
                     UnknownFeature)
from .features import FeatureTable, ImportanceReport, sum_normalize
from .geo import CellId
from .ml import (fit_gbr, fit_ols, fit_ridge, gain_importance, kfold_cv, kmeans,
                 model_from_dict, r2, rmse)


@dataclass
class SplitPlan:
    """Per-cluster train/test partition of a feature table's rows."""

    k: int
    train_frac: float
    seed: int
    cluster_of: list
    train: list
    test: list
    train_cells: list = field(default_factory=list)
    test_cells: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k, "train_frac": self.train_frac, "seed": self.seed,
            "cluster_of": list(self.cluster_of), "train": list(self.train), "test": list(self.test),
            "train_cells": [list(c) for c in self.train_cells],
            "test_cells": [list(c) for c in self.test_cells],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        return cls(int(d["k"]), float(d["train_frac"]), int(d["seed"]), list(d["cluster_of"]),
                   list(d["train"]), list(d["test"]),
                   [CellId(*c) for c in d.get("train_cells", [])],
                   [CellId(*c) for c in d.get("test_cells", [])])


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5 + 1e-9)


def spatial_split(table: FeatureTable, k: int = 15, train_frac: float = 0.8, seed: int = 0) -> SplitPlan:
    """Cluster cell centroids with k-means, then split each cluster.

    Within each cluster (in index order) the members are shuffled and the
    first ``round_half_up(train_frac * m)`` (at least 1) go to training.
    The k-means and shuffle generators are derived from ``seed``.
    """
    n = table.n_rows
    if n < k:
        raise TooFewRows(f"{n} rows cannot form {k} clusters")
    if not 0 < train_frac <= 1:
        raise SpecDemandError(f"train_frac must be in (0, 1], got {train_frac}")
    km_seed, shuffle_seed = (int(s) for s in np.random.SeedSequence(seed).generate_state(2))
    result = kmeans(table.centroids_xy(), k, seed=km_seed)
    rng = np.random.default_rng(shuffle_seed)
    train, test = [], []
    for j in range(k):
        members = np.flatnonzero(result.assignment == j)
        m = members.size
        if m == 0:
            continue
        order = members[rng.permutation(m)]
        m_train = max(1, _round_half_up(train_frac * m))
        train.extend(order[:m_train].tolist())
        test.extend(order[m_train:].tolist())
    train.sort()
    test.sort()
    return SplitPlan(k, float(train_frac), int(seed), result.assignment.tolist(), train, test,
                     [table.cell_ids[i] for i in train], [table.cell_ids[i] for i in test])


@dataclass
class ModelConfig:
    kind: str = "gbr"
    ridge_alpha: float = 0.1
    gbr_estimators: int = 300
    gbr_learning_rate: float = 0.05
    gbr_max_depth: int = 3
    gbr_min_leaf: int = 5
    k_clusters: int = 15
    train_frac: float = 0.8
    cv_folds: int = 5

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})

    def fitter(self, seed: int = 0):
        """``fit(X, y) -> model`` for this configuration."""
        if self.kind == "ridge":
            return lambda X, y: fit_ridge(X, y, self.ridge_alpha)
        if self.kind == "ols":
            return lambda X, y: fit_ols(X, y, ridge_fallback=True)
        if self.kind == "gbr":
            return lambda X, y: fit_gbr(X, y, self.gbr_estimators, self.gbr_learning_rate,
                                        self.gbr_max_depth, self.gbr_min_leaf, seed=seed)
        raise SpecDemandError(f"unknown model kind {self.kind!r}")


@dataclass
class ModelArtifact:
    scenario: str
    model_kind: str
    model: object
    feature_names: list
    metrics: dict
    seed: int = 0
    cv: dict | None = None
    importance: dict | None = None
    split: dict | None = None
    config: dict = field(default_factory=dict)
    fingerprints: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "model_kind": self.model_kind,
            "feature_names": list(self.feature_names),
            "metrics": self.metrics,
            "seed": self.seed,
            "cv": self.cv,
            "importance": self.importance,
            "split": self.split,
            "config": self.config,
            "fingerprints": self.fingerprints,
            "extra": self.extra,
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelArtifact":
        return cls(d["scenario"], d["model_kind"], model_from_dict(d["model"]),
                   list(d["feature_names"]), dict(d["metrics"]), int(d.get("seed", 0)),
                   d.get("cv"), d.get("importance"), d.get("split"), d.get("config", {}),
                   d.get("fingerprints", {}), d.get("extra", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def content_hash(self) -> str:
        key = {"scenario": self.scenario, "model_kind": self.model_kind, "seed": self.seed,
               "features": list(self.feature_names), "config": self.config,
               "fingerprints": self.fingerprints}
        return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()

    def ranked_features(self) -> list[str]:
        if not self.importance:
            raise TooFewFeatures(f"artifact {self.scenario!r} has no importance report")
        scores = self.importance["aggregate"]
        order = sorted(range(len(self.feature_names)),
                       key=lambda i: (-scores[self.feature_names[i]], i))
        return [self.feature_names[i] for i in order]


def _importance(names, scores, method) -> dict:
    scores = sum_normalize(scores)
    return {"method": method, "aggregate": dict(zip(names, map(float, scores)))}


def best_single_feature(table: FeatureTable) -> str:
    """Feature with the highest absolute Pearson correlation with the target."""
    y = table.target - table.target.mean()
    best, best_name = -1.0, table.names[0]
    for j, name in enumerate(table.names):
        x = table.X[:, j] - table.X[:, j].mean()
        den = math.sqrt(float(x @ x) * float(y @ y))
        corr = abs(float(x @ y)) / den if den > 0 else 0.0
        if corr > best:
            best, best_name = corr, name
    return best_name


def run_baseline(table: FeatureTable, feature_name: str | None = None) -> ModelArtifact:
    """Single-feature OLS over all rows; defaults to the most correlated feature."""
    name = feature_name or best_single_feature(table)
    x = table.column(name).reshape(-1, 1)
    model = fit_ols(x, table.target, ridge_fallback=True)
    pred = model.predict(x)
    return ModelArtifact(
        "baseline", "ols", model, [name],
        {"r2": r2(table.target, pred), "rmse": rmse(table.target, pred), "n_test": table.n_rows},
        config={"feature": name}, fingerprints={"train": table.fingerprint()},
    )


def _check_schema(a: FeatureTable, b: FeatureTable):
    if tuple(a.names) != tuple(b.names):
        raise SchemaMismatch(f"feature columns differ: {list(a.names)} vs {list(b.names)}")


def run_scenario(train_table: FeatureTable, test_table: FeatureTable | None = None,
                 model_cfg: ModelConfig | None = None, seed: int = 0,
                 scenario: str | None = None) -> ModelArtifact:
    """Fit and evaluate one model.

    Without ``test_table`` (combined mode) the table is split by
    :func:`spatial_split`; otherwise the model trains on all of
    ``train_table`` and is tested on all of ``test_table`` (cross-region).
    Cross-validation runs on the training rows.
    """
    cfg = model_cfg or ModelConfig()
    fit = cfg.fitter(seed)
    fingerprints = {"train": train_table.fingerprint()}
    if test_table is None:
        plan = spatial_split(train_table, cfg.k_clusters, cfg.train_frac, seed)
        tr, te = train_table.rows(plan.train), train_table.rows(plan.test)
        split = {"mode": "combined", **plan.to_dict()}
        scenario = scenario or "combined"
    else:
        _check_schema(train_table, test_table)
        tr, te = train_table, test_table
        split = {"mode": "cross_region"}
        fingerprints["test"] = test_table.fingerprint()
        scenario = scenario or "cross_region"
    if te.n_rows < 2:
        raise TooFewRows("test set needs at least 2 rows")
    model = fit(tr.X, tr.target)
    pred = model.predict(te.X)
    metrics = {"r2": r2(te.target, pred), "rmse": rmse(te.target, pred), "n_test": te.n_rows,
               "n_train": tr.n_rows}
    cv = kfold_cv(tr.X, tr.target, cfg.cv_folds, fit, seed).to_dict()
    if cfg.kind == "gbr":
        importance = _importance(tr.names, gain_importance(model), "gain")
    else:
        importance = _importance(tr.names, np.abs(model.coefficients), "abs_coefficient")
    return ModelArtifact(scenario, cfg.kind, model, list(tr.names), metrics, seed, cv, importance,
                         split, cfg.to_dict(), fingerprints)


def run_reduced(artifact: ModelArtifact, top_n: int, train_table: FeatureTable,
                test_table: FeatureTable | None = None,
                report: ImportanceReport | None = None) -> ModelArtifact:
    """Re-run ``artifact``'s scenario on its ``top_n`` most important features.

    Features are ranked by ``report`` (an ensemble ranking) when given,
    otherwise by the artifact's own model importance.  The kept columns
    retain their original order, so ``top_n`` equal to the feature count
    reproduces the original metrics.
    """
    if report is not None:
        if sorted(report.features) != sorted(artifact.feature_names):
            raise SchemaMismatch("importance report covers different features than the artifact")
        names = report.ranked()
    else:
        names = artifact.ranked_features()
    if not 1 <= top_n <= len(names):
        raise TooFewFeatures(f"top_n must be in 1..{len(names)}, got {top_n}")
    if list(train_table.names) != list(artifact.feature_names):
        raise SchemaMismatch("training table does not match the artifact's features")
    keep = names[:top_n]
    tr = train_table.select(keep)
    te = test_table.select(keep) if test_table is not None else None
    cfg = ModelConfig.from_dict(artifact.config)
    out = run_scenario(tr, te, cfg, artifact.seed, scenario=f"{artifact.scenario}-top{top_n}")
    out.extra.update({"reduced_from": artifact.scenario, "top_n": top_n, "kept": list(tr.names),
                      "ranking": "ensemble" if report is not None else artifact.importance["method"],
                      "full_r2": artifact.metrics["r2"],
                      "delta_r2": out.metrics["r2"] - artifact.metrics["r2"]})
    return out


def evaluation_rows(artifact: ModelArtifact, train_table: FeatureTable,
                    test_table: FeatureTable | None = None) -> FeatureTable:
    """Rebuild the artifact's test rows from the stored split."""
    if artifact.split and artifact.split.get("mode") == "combined":
        wanted = [CellId(*c) for c in artifact.split["test_cells"]]
        index = {c: i for i, c in enumerate(train_table.cell_ids)}
        try:
            rows = [index[c] for c in wanted]
        except KeyError as e:
            raise UnknownFeature(f"split references cell {e.args[0]} absent from the table") from None
        return train_table.rows(rows).select(artifact.feature_names)
    if test_table is None:
        raise SpecDemandError("cross-region artifact needs the test table")
    return test_table.select(artifact.feature_names)


def recompute_metrics(artifact: ModelArtifact, train_table: FeatureTable,
                      test_table: FeatureTable | None = None) -> dict:
    te = evaluation_rows(artifact, train_table, test_table)
    pred = artifact.model.predict(te.X)
    return {"r2": r2(te.target, pred), "rmse": rmse(te.target, pred), "n_test": te.n_rows}


def save_artifact(artifact: ModelArtifact, run_dir) -> Path:
    """Write ``artifact.json`` and ``metrics.csv`` under a content-addressed directory.

    The directory name carries a hash of scenario, model, features, config
    and input fingerprints; an existing directory with different contents
    is never overwritten.
    """
    out = Path(run_dir) / f"{artifact.scenario}-{artifact.model_kind}-{artifact.content_hash()[:12]}"
    body = artifact.to_json()
    target = out / "artifact.json"
    if target.exists() and target.read_text(encoding="utf-8") != body:
        raise SpecDemandError(f"{target} exists with different contents; refusing to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    target.write_text(body, encoding="utf-8")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "model", "r2", "rmse", "n_test", "cv_mean_r2", "cv_std_r2"])
    cv = artifact.cv or {}
    w.writerow([artifact.scenario, artifact.model_kind, repr(artifact.metrics["r2"]),
                repr(artifact.metrics["rmse"]), artifact.metrics.get("n_test", ""),
                repr(cv["mean_r2"]) if "mean_r2" in cv else "",
                repr(cv["std_r2"]) if "std_r2" in cv else ""])
    (out / "metrics.csv").write_text(buf.getvalue(), encoding="utf-8")
    return out


def load_artifact(path) -> ModelArtifact:
    path = Path(path)
    if path.is_dir():
        path = path / "artifact.json"
    return ModelArtifact.from_dict(json.loads(path.read_text(encoding="utf-8")))
