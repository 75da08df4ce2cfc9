import json

import pytest

from specdemand.cli import COMMANDS, load_config, main
from specdemand.errors import ConfigError

from conftest import write_config

CHAIN = ["synth", "grid", "proxy", "indicator", "validate-proxy", "features", "rank", "split",
         "train", "evaluate", "reduce"]


def small_doc(**synth_overrides):
    return {
        "seed": 3,
        "run_dir": "run",
        "models": ["ridge", "gbr"],
        "model": {"gbr_estimators": 40, "gbr_learning_rate": 0.15, "k_clusters": 6},
        "synth": {"extent_km": 30.0, "n_hub_clusters": 4, **synth_overrides},
        "cities": {
            "east": {"synth": {"seed": 11}},
            "west": {"synth": {"seed": 12, "center_lat": 49.25, "center_lon": -123.1}},
        },
        "scenarios": [{"name": "combined", "train": "east"},
                      {"name": "cross", "train": "east", "test": "west"}],
        "reduce": {"top_n": [5, 1]},
    }


def run(cfg, *cmds, extra=()):
    for c in cmds:
        code = main([c, "--config", str(cfg), *extra])
        assert code == 0, c


def parse_lines(text):
    out = []
    for line in text.splitlines():
        if line.startswith("stage="):
            out.append(dict(kv.split("=", 1) for kv in line.split()))
    return out


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "cfg.json", small_doc())
    run(cfg, *CHAIN)
    return cfg, root / "run"


def test_chain_prints_metrics(chain, capsys):
    cfg, _ = chain
    run(cfg, "evaluate")
    lines = parse_lines(capsys.readouterr().out)
    assert lines and all(d["stage"] == "evaluate" and d["status"] == "ok" for d in lines)
    for d in lines:
        float(d["r2"]), float(d["rmse"])
    assert {(d["scenario"], d["model"]) for d in lines} == {
        (s, m) for s in ("combined", "cross") for m in ("baseline", "ridge", "gbr")}


def test_chain_outputs(chain):
    _, rd = chain
    for city in ("east", "west"):
        for f in ("grid.json", "proxy.csv", "indicator.csv", "validation.json", "features.csv"):
            assert (rd / city / f).exists()
    assert (rd / "east" / "importance.json").exists()
    assert (rd / "splits" / "combined.json").exists()
    assert (rd / "evaluation.csv").read_text().startswith("scenario,model,r2,rmse,n_test")
    assert len((rd / "reduced.csv").read_text().splitlines()) == 1 + 2 * 2 * 2


def test_rerun_is_idempotent(chain):
    cfg, rd = chain
    before = {p: p.read_bytes() for p in rd.rglob("*") if p.is_file()}
    run(cfg, *CHAIN[1:])
    after = {p: p.read_bytes() for p in rd.rglob("*") if p.is_file()}
    assert after == before


def test_heatmap_geojson(chain, capsys):
    cfg, rd = chain
    run(cfg, "heatmap", extra=["--series", "proxy"])
    line = parse_lines(capsys.readouterr().out)[0]
    fc = json.loads((rd / "east" / "heatmap_proxy.geojson").read_text())
    assert fc["type"] == "FeatureCollection"
    assert len(fc["features"]) == int(line["cells"])
    f = fc["features"][0]
    assert f["geometry"]["type"] == "Polygon" and "value" in f["properties"]
    run(cfg, "heatmap", extra=["--series", "roads_m"])
    assert (rd / "west" / "heatmap_roads_m.geojson").exists()
    assert main(["heatmap", "--config", str(cfg), "--series", "nope"]) == 1


def test_validate_proxy_rho_one(tmp_path, capsys):
    doc = small_doc(rho_target=1.0)
    doc["cities"] = {"one": {"synth": {"seed": 4}}}
    doc["scenarios"] = []
    cfg = write_config(tmp_path / "cfg.json", doc)
    run(cfg, "synth", "grid", "proxy", "indicator")
    capsys.readouterr()
    run(cfg, "validate-proxy")
    (line,) = parse_lines(capsys.readouterr().out)
    assert abs(float(line["r2"]) - 1.0) <= 1e-3


@pytest.mark.parametrize("name", list(COMMANDS))
def test_help_documents_flags(name, capsys):
    assert main([name, "--help"]) == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--run-dir", "--seed"):
        assert flag in text
    if name == "heatmap":
        assert "--series" in text


def test_usage_errors_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", small_doc())
    assert main([]) == 2
    assert main(["grid"]) == 2  # --config is required
    assert main(["grid", "--config", str(cfg), "--bogus"]) == 2
    assert main(["nonsense", "--config", str(cfg)]) == 2
    assert main(["grid", "--config", str(cfg), "--seed", "x"]) == 2


def test_missing_stage_names_prior_command(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", small_doc())
    assert main(["proxy", "--config", str(cfg)]) == 1
    assert "run the 'grid' subcommand first" in capsys.readouterr().err
    assert main(["grid", "--config", str(cfg)]) == 0
    assert main(["proxy", "--config", str(cfg)]) == 1
    assert "run the 'synth' subcommand first" in capsys.readouterr().err
    assert main(["train", "--config", str(cfg)]) == 1
    assert "run the 'features' subcommand first" in capsys.readouterr().err
    assert main(["evaluate", "--config", str(cfg)]) == 1
    assert "run the 'train' subcommand first" in capsys.readouterr().err


def test_run_dir_and_seed_overrides(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", small_doc())
    c = load_config(cfg, run_dir=tmp_path / "elsewhere", seed=99)
    assert c.run_dir == tmp_path / "elsewhere" and c.seed == 99
    assert c.cities["east"].synth.seed == 11
    assert main(["grid", "--config", str(cfg), "--run-dir", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "east" / "grid.json").exists()


def test_config_defaults(tmp_path):
    doc = {"cities": {"a": {"grid": {"bbox": [45.0, -75.0, 45.1, -74.9]}, "data_dir": "."}}}
    c = load_config(write_config(tmp_path / "cfg.json", doc))
    assert c.cities["a"].cell_size_m == 1500.0
    assert (c.rx_threshold_dbm, c.mobile_height_m) == (-95.0, 1.5)
    m = c.model
    assert (m.ridge_alpha, m.k_clusters, m.train_frac, m.cv_folds) == (0.1, 15, 0.8, 5)
    assert c.scenarios == [{"name": "combined", "train": "a"}]


@pytest.mark.parametrize("doc", [
    {"cities": {}},
    {"cities": {"a": {}}},
    {"cities": {"a": {"synth": {}}}, "model": {"ridge_alpha": -1}},
    {"cities": {"a": {"synth": {}}}, "model": {"k_clusters": "many"}},
    {"cities": {"a": {"synth": {}}}, "model": {"depth": 3}},
    {"cities": {"a": {"synth": {}}}, "models": ["svm"]},
    {"cities": {"a": {"synth": {}}}, "propagation": {"mobile_height_m": 50}},
    {"cities": {"a": {"synth": {"colour": "red"}}}},
    {"cities": {"a": {"synth": {}}}, "scenarios": [{"name": "x", "train": "b"}]},
    {"cities": {"a": {"synth": {}}}, "indicator": {"reduction": "max"}},
    {"cities": {"a": {"grid": {"bbox": [1, 2, 3]}, "data_dir": "."}}},
])
def test_config_errors(tmp_path, doc, capsys):
    cfg = write_config(tmp_path / "cfg.json", doc)
    with pytest.raises(ConfigError):
        load_config(cfg)
    assert main(["grid", "--config", str(cfg)]) == 1
    assert capsys.readouterr().err.startswith("error: ")


def test_config_file_problems(tmp_path):
    assert main(["grid", "--config", str(tmp_path / "absent.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert main(["grid", "--config", str(bad)]) == 1


def test_log_level_env(tmp_path, monkeypatch, capsys):
    cfg = write_config(tmp_path / "cfg.json", small_doc())
    monkeypatch.setenv("SDK_LOG_LEVEL", "loud")
    assert main(["grid", "--config", str(cfg)]) == 1
    assert "SDK_LOG_LEVEL" in capsys.readouterr().err
    monkeypatch.setenv("SDK_LOG_LEVEL", "debug")
    assert main(["grid", "--config", str(cfg)]) == 0
