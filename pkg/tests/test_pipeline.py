import json

import numpy as np
import pytest

from specdemand.errors import (SchemaMismatch, SpecDemandError, TooFewFeatures, TooFewRows,
                               UnknownFeature)
from specdemand.features import FeatureTable, ImportanceReport
from specdemand.geo import CellId
from specdemand.pipeline import (ModelArtifact, ModelConfig, best_single_feature, load_artifact,
                                 recompute_metrics, run_baseline, run_reduced, run_scenario,
                                 save_artifact, spatial_split)

from conftest import square_grid

RIDGE = ModelConfig(kind="ridge")
GBR = ModelConfig(kind="gbr", gbr_estimators=80, gbr_learning_rate=0.1)


def table(X, y, names=None, n_side=30):
    g = square_grid(n_side)
    cells = list(g.cells())[: len(y)]
    names = names or [f"x{i}" for i in range(X.shape[1])]
    return FeatureTable(g, names, X, y, cells)


def planted(n, p, coef, noise, seed, f=None):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = (f(X) if f else X[:, : len(coef)] @ np.asarray(coef)) + rng.normal(0, noise, n)
    return X, y


# ---------------------------------------------------------------- split

def test_single_cluster_of_ten():
    t = table(np.zeros((10, 1)), np.arange(10.0))
    plan = spatial_split(t, k=1, train_frac=0.8, seed=0)
    assert (len(plan.train), len(plan.test)) == (8, 2)


def test_singleton_cluster_goes_to_train():
    g = square_grid(30)
    cells = [CellId(c, r) for c in range(3) for r in range(3)] + [CellId(29, 29)]
    t = FeatureTable(g, ["a"], np.zeros((10, 1)), np.arange(10.0), cells)
    plan = spatial_split(t, k=2, train_frac=0.5, seed=1)
    assert 9 in plan.train
    assert plan.cluster_of[9] != plan.cluster_of[0]


@pytest.mark.parametrize("seed", range(5))
def test_split_partition_and_counts(seed):
    X, y = planted(400, 2, [1, 1], 0.1, seed)
    t = table(X, y, n_side=25)
    plan = spatial_split(t, k=15, train_frac=0.8, seed=seed)
    assert sorted(plan.train + plan.test) == list(range(400))
    assert set(plan.train).isdisjoint(plan.test)
    cl = np.array(plan.cluster_of)
    for j in range(15):
        m = int((cl == j).sum())
        n_train = sum(1 for i in plan.train if cl[i] == j)
        assert n_train == max(1, int(np.floor(0.8 * m + 0.5)))
    again = spatial_split(t, k=15, train_frac=0.8, seed=seed)
    assert again.to_dict() == plan.to_dict()


def test_split_round_half_up():
    # a cluster of 5 at train_frac 0.5 trains on round_half_up(2.5) = 3
    t = table(np.zeros((5, 1)), np.arange(5.0))
    plan = spatial_split(t, k=1, train_frac=0.5, seed=0)
    assert len(plan.train) == 3


def test_split_too_few_rows():
    t = table(np.zeros((4, 1)), np.arange(4.0))
    with pytest.raises(TooFewRows):
        spatial_split(t, k=5)


# ---------------------------------------------------------------- baseline

def test_baseline_examples():
    rng = np.random.default_rng(1)
    hubs = rng.poisson(4, 300).astype(float)
    other = rng.normal(size=300)
    y = 2 * hubs + rng.normal(0, 0.2, 300)
    t = table(np.c_[other, hubs], y, ["noise", "hubs"], n_side=20)
    art = run_baseline(t)
    assert art.feature_names == ["hubs"] and art.metrics["r2"] > 0.95
    assert run_baseline(t, "noise").metrics["r2"] < 0.05
    exact = table(np.c_[hubs], 3 * hubs + 1, ["hubs"], n_side=20)
    assert run_baseline(exact).metrics["r2"] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(UnknownFeature):
        run_baseline(t, "missing")
    assert best_single_feature(t) == "hubs"


# ---------------------------------------------------------------- scenarios

def test_perfect_linear_ridge():
    X, y = planted(200, 3, [1.0, -2.0, 0.5], 0.0, 2)
    t = table(X, y, n_side=15)
    art = run_scenario(t, t, ModelConfig(kind="ridge", ridge_alpha=1e-9), seed=0)
    assert art.metrics["r2"] == pytest.approx(1.0, abs=1e-6)
    assert art.split == {"mode": "cross_region"}


def test_gbr_beats_single_feature_baseline():
    X, y = planted(600, 4, None, 0.2, 3, f=lambda X: X[:, 0] + X[:, 1] ** 2 + np.sin(2 * X[:, 2]))
    t = table(X, y, n_side=25)
    gbr = run_scenario(t, None, GBR, seed=1)
    base = run_baseline(t)
    assert gbr.metrics["r2"] > base.metrics["r2"] + 0.15


def test_cross_region_same_law():
    law = lambda X: 2 * X[:, 0] + np.tanh(X[:, 1]) * 3 + X[:, 2] ** 2  # noqa: E731
    a = table(*planted(500, 4, None, 0.3, 4, f=law), n_side=25)
    b = table(*planted(500, 4, None, 0.3, 5, f=law), n_side=25)
    art = run_scenario(a, b, GBR, seed=0)
    assert art.metrics["r2"] >= 0.6
    assert art.fingerprints["test"] == b.fingerprint()


def test_schema_mismatch():
    X, y = planted(50, 2, [1, 1], 0.1, 6)
    with pytest.raises(SchemaMismatch):
        run_scenario(table(X, y), table(X, y, ["a", "b"]), RIDGE)


def test_paired_split_for_ridge_and_gbr():
    X, y = planted(300, 3, [1, 2, 3], 0.5, 7)
    t = table(X, y, n_side=20)
    r = run_scenario(t, None, RIDGE, seed=3)
    g = run_scenario(t, None, GBR, seed=3)
    assert r.split == g.split
    assert r.cv["fold_sizes"] == g.cv["fold_sizes"]
    assert len(r.cv["fold_r2"]) == 5


def test_importance_blocks():
    X, y = planted(200, 3, [3, 0, 1], 0.1, 8)
    t = table(X, y, n_side=15)
    for cfg, method in ((RIDGE, "abs_coefficient"), (GBR, "gain")):
        imp = run_scenario(t, None, cfg, seed=0).importance
        assert imp["method"] == method
        assert sum(imp["aggregate"].values()) == pytest.approx(1.0, abs=1e-9)
        assert max(imp["aggregate"], key=imp["aggregate"].get) == "x0"


# ---------------------------------------------------------------- reduced

def _ten_feature_table(seed=9):
    X, y = planted(500, 10, None, 0.3, seed, f=lambda X: 3 * X[:, 4] + 2 * X[:, 7])
    return table(X, y, n_side=25)


@pytest.mark.parametrize("cfg", [RIDGE, GBR], ids=["ridge", "gbr"])
def test_reduced_planted_two_of_ten(cfg):
    t = _ten_feature_table()
    full = run_scenario(t, None, cfg, seed=2)
    two = run_reduced(full, 2, t)
    one = run_reduced(full, 1, t)
    assert set(two.feature_names) == {"x4", "x7"}
    assert abs(two.metrics["r2"] - full.metrics["r2"]) <= 0.05
    assert 0.5 < one.metrics["r2"] < full.metrics["r2"]
    assert one.extra["delta_r2"] == pytest.approx(one.metrics["r2"] - full.metrics["r2"])
    assert two.scenario == "combined-top2" and two.split == full.split


def test_reduced_all_features_is_identity():
    t = _ten_feature_table()
    full = run_scenario(t, None, RIDGE, seed=2)
    same = run_reduced(full, 10, t)
    assert same.metrics["r2"] == full.metrics["r2"]
    assert same.extra["delta_r2"] == 0.0


def test_reduced_with_ensemble_report_and_errors():
    t = _ten_feature_table()
    full = run_scenario(t, None, RIDGE, seed=2)
    scores = np.full(10, 0.01)
    scores[[2, 5]] = [0.5, 0.41]
    rep = ImportanceReport(t.names, {}, scores)
    red = run_reduced(full, 2, t, report=rep)
    assert red.feature_names == ["x2", "x5"] and red.extra["ranking"] == "ensemble"
    with pytest.raises(TooFewFeatures):
        run_reduced(full, 0, t)
    with pytest.raises(TooFewFeatures):
        run_reduced(full, 11, t)
    with pytest.raises(SchemaMismatch):
        run_reduced(full, 2, t, report=ImportanceReport(("a", "b"), {}, np.array([0.5, 0.5])))
    bare = ModelArtifact("x", "ridge", full.model, full.feature_names, full.metrics)
    with pytest.raises(TooFewFeatures):
        run_reduced(bare, 2, t)


# ---------------------------------------------------------------- artifacts

def test_artifact_save_load_recompute(tmp_path):
    X, y = planted(300, 4, [1, -1, 2, 0], 0.4, 10)
    t = table(X, y, n_side=20)
    for cfg in (RIDGE, GBR):
        art = run_scenario(t, None, cfg, seed=4)
        out = save_artifact(art, tmp_path)
        assert out.name.startswith(f"combined-{cfg.kind}-")
        back = load_artifact(out)
        assert back.to_dict() == json.loads(art.to_json())
        again = recompute_metrics(back, t)
        assert again["r2"] == art.metrics["r2"] and again["rmse"] == art.metrics["rmse"]
        assert (out / "metrics.csv").read_text().startswith("scenario,model,r2")
        assert save_artifact(art, tmp_path) == out  # identical re-save is fine


def test_artifact_cross_region_recompute(tmp_path):
    a = table(*planted(200, 3, [1, 2, 3], 0.2, 11), n_side=15)
    b = table(*planted(200, 3, [1, 2, 3], 0.2, 12), n_side=15)
    art = run_scenario(a, b, RIDGE, seed=0)
    back = load_artifact(save_artifact(art, tmp_path))
    assert recompute_metrics(back, a, b)["r2"] == art.metrics["r2"]
    with pytest.raises(SpecDemandError):
        recompute_metrics(back, a)


def test_artifact_refuses_overwrite(tmp_path):
    X, y = planted(120, 2, [1, 1], 0.1, 13)
    art = run_scenario(table(X, y), None, RIDGE, seed=0)
    save_artifact(art, tmp_path)
    art.metrics = dict(art.metrics, r2=0.0)
    with pytest.raises(SpecDemandError):
        save_artifact(art, tmp_path)
