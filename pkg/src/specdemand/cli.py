"""Command-line front end: one subcommand per pipeline stage.

Every subcommand takes ``--config PATH`` (a JSON run configuration), reads
the outputs of earlier stages from the run directory, writes its own, and
prints one ``stage=<name> status=ok key=value ...`` line per unit of work
(city, scenario or artifact).  Exit codes: 0 success, 1 data or
configuration error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import ingest, synth
from .demand import (CellSeries, demand_indicator, deployed_bandwidth, ntl_weight_series,
                     ols_validate, user_weight_series, weighted_proxy)
from .errors import ConfigError, MissingStage, SpecDemandError
from .features import FeatureTable, ImportanceReport, assemble, rank_features, rasterize
from .geo import GeoPoint, GridSpec, make_grid
from .pipeline import (ModelConfig, load_artifact, recompute_metrics, run_baseline,
                       run_reduced, run_scenario, save_artifact, spatial_split)
from .propagation import DEFAULT_MOBILE_HEIGHT_M, DEFAULT_RX_THRESHOLD_DBM, footprints

log = logging.getLogger("specdemand")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}
INPUT_FILES = {"sites": "sites.csv", "traffic": "traffic.csv", "measurements": "measurements.csv",
               "ntl": "ntl.asc", "features": "features"}
SERIES_FILES = {"proxy": "proxy.csv", "indicator": "indicator.csv", "bandwidth": "bandwidth.csv",
                "ntl_weight": "ntl_weight.csv", "user_weight": "user_weight.csv"}
SERIES_STAGE = {"proxy": "proxy", "bandwidth": "proxy", "ntl_weight": "proxy",
                "indicator": "indicator", "user_weight": "indicator"}


# ---------------------------------------------------------------- configuration

@dataclass
class CityConfig:
    name: str
    data_dir: Path
    inputs: dict
    bbox: tuple | None = None
    cell_size_m: float = 1500.0
    synth: synth.CitySpec | None = None


@dataclass
class RunConfig:
    path: Path
    run_dir: Path
    seed: int
    cities: dict
    rx_threshold_dbm: float = DEFAULT_RX_THRESHOLD_DBM
    mobile_height_m: float = DEFAULT_MOBILE_HEIGHT_M
    reduction: str = "mean"
    model: ModelConfig = field(default_factory=ModelConfig)
    models: tuple = ("ridge", "gbr")
    scenarios: list = field(default_factory=list)
    top_n: tuple = (5, 1)

    def city_dir(self, city: str) -> Path:
        return self.run_dir / city

    def city(self, name: str) -> CityConfig:
        try:
            return self.cities[name]
        except KeyError:
            raise ConfigError(f"unknown city {name!r}; configured: {sorted(self.cities)}") from None


def _number(d, key, default, lo=None, hi=None, kind=float):
    v = d.get(key, default)
    try:
        v = kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a {kind.__name__}, got {v!r}") from None
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{key}={v} outside [{lo}, {hi}]")
    return v


def _norm(p) -> Path:
    return Path(os.path.normpath(p))


def load_config(path, run_dir=None, seed=None) -> RunConfig:
    """Parse and range-check a run configuration.

    Relative paths are resolved against the config file's directory.  Input
    files are checked when a stage needs them, since ``synth`` may create
    them.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    base = path.parent
    rd = _norm(run_dir) if run_dir is not None else _norm(base / doc.get("run_dir", "runs"))
    seed = seed if seed is not None else _number(doc, "seed", 0, 0, None, int)

    prop = doc.get("propagation", {})
    rx = _number(prop, "rx_threshold_dbm", DEFAULT_RX_THRESHOLD_DBM, -200.0, 0.0)
    hm = _number(prop, "mobile_height_m", DEFAULT_MOBILE_HEIGHT_M, 1.0, 10.0)

    m = doc.get("model", {})
    unknown = set(m) - set(ModelConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown model parameters {sorted(unknown)}")
    model = ModelConfig(
        ridge_alpha=_number(m, "ridge_alpha", 0.1, 0.0),
        gbr_estimators=_number(m, "gbr_estimators", 300, 1, None, int),
        gbr_learning_rate=_number(m, "gbr_learning_rate", 0.05, 1e-6, 1.0),
        gbr_max_depth=_number(m, "gbr_max_depth", 3, 1, 32, int),
        gbr_min_leaf=_number(m, "gbr_min_leaf", 5, 1, None, int),
        k_clusters=_number(m, "k_clusters", 15, 1, None, int),
        train_frac=_number(m, "train_frac", 0.8, 0.0, 1.0),
        cv_folds=_number(m, "cv_folds", 5, 2, None, int),
    )
    models = tuple(doc.get("models", ["ridge", "gbr"]))
    for k in models:
        if k not in ("ridge", "gbr", "ols"):
            raise ConfigError(f"unknown model kind {k!r}")

    shared = doc.get("synth", {})
    cities = {}
    raw_cities = doc.get("cities")
    if not isinstance(raw_cities, dict) or not raw_cities:
        raise ConfigError("config needs a non-empty 'cities' object")
    for i, (name, c) in enumerate(raw_cities.items()):
        spec = None
        if "synth" in c:
            fields = {**shared, **c["synth"]}
            fields.setdefault("seed", seed + i)
            fields.setdefault("rx_threshold_dbm", rx)
            fields.setdefault("mobile_height_m", hm)
            try:
                spec = synth.CitySpec.from_dict(fields)
            except (TypeError, SpecDemandError) as e:
                raise ConfigError(f"city {name}: bad synth block: {e}") from None
        if "data_dir" in c:
            data_dir = _norm(base / c["data_dir"])
        elif spec is not None:
            data_dir = rd / "data" / name
        else:
            raise ConfigError(f"city {name}: needs 'data_dir' or a 'synth' block")
        inputs = {k: data_dir / v for k, v in INPUT_FILES.items()}
        inputs.update({k: _norm(base / v) for k, v in c.get("inputs", {}).items()})
        grid = c.get("grid", {})
        bbox = grid.get("bbox")
        if bbox is not None and (not isinstance(bbox, list) or len(bbox) != 4):
            raise ConfigError(f"city {name}: grid.bbox must be [min_lat, min_lon, max_lat, max_lon]")
        cell = _number(grid, "cell_size_m", spec.cell_size_m if spec else 1500.0, 1.0)
        if bbox is None and spec is None:
            raise ConfigError(f"city {name}: needs grid.bbox or a synth block")
        cities[name] = CityConfig(name, data_dir, inputs, tuple(bbox) if bbox else None, cell, spec)

    scenarios = doc.get("scenarios") or [{"name": "combined", "train": next(iter(cities))}]
    for sc in scenarios:
        if "name" not in sc or "train" not in sc:
            raise ConfigError("each scenario needs 'name' and 'train'")
        for key in ("train", "test"):
            if key in sc and sc[key] not in cities:
                raise ConfigError(f"scenario {sc['name']}: unknown city {sc[key]!r}")
    red = doc.get("reduce", {})
    top_n = tuple(int(v) for v in red.get("top_n", [5, 1]))
    reduction = doc.get("indicator", {}).get("reduction", "mean")
    if reduction not in ("mean", "busy_hour"):
        raise ConfigError(f"indicator.reduction must be mean or busy_hour, got {reduction!r}")
    return RunConfig(path, rd, seed, cities, rx, hm, reduction, model, models, scenarios, top_n)


# ---------------------------------------------------------------- helpers

def _summary(stage: str, **kv) -> str:
    parts = [f"stage={stage}", "status=ok"]
    for k, v in kv.items():
        if isinstance(v, float):
            v = f"{v:.6g}" if k not in ("r2", "rmse", "delta_r2", "cv_r2", "full_r2") else f"{v:.4f}"
        parts.append(f"{k}={v}")
    line = " ".join(parts)
    print(line)
    return line


def _need_input(city: CityConfig, key: str) -> Path:
    p = city.inputs[key]
    if not p.exists():
        if city.synth is not None:
            raise MissingStage("synth", str(p))
        raise ConfigError(f"city {city.name}: input {key} not found at {p}")
    return p


def _need_output(path: Path, stage: str) -> Path:
    if not path.exists():
        raise MissingStage(stage, str(path))
    return path


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _grid(cfg: RunConfig, city: str) -> GridSpec:
    p = _need_output(cfg.city_dir(city) / "grid.json", "grid")
    return GridSpec.from_dict(json.loads(p.read_text(encoding="utf-8")))


def _series(cfg: RunConfig, city: str, name: str, grid: GridSpec) -> CellSeries:
    p = _need_output(cfg.city_dir(city) / SERIES_FILES[name], SERIES_STAGE[name])
    return CellSeries.from_csv(p, grid, name=name)


def _table(cfg: RunConfig, city: str) -> FeatureTable:
    grid = _grid(cfg, city)
    p = _need_output(cfg.city_dir(city) / "features.csv", "features")
    return FeatureTable.from_csv(p, grid)


def _footprints(cfg: RunConfig, city: CityConfig, grid: GridSpec):
    sites = ingest.parse_sites(_need_input(city, "sites"))
    return sites, footprints(sites, grid, cfg.rx_threshold_dbm, cfg.mobile_height_m)


def _feature_paths(city: CityConfig) -> list[Path]:
    p = _need_input(city, "features")
    if p.is_dir():
        paths = sorted(p.glob("*.geojson"))
        if not paths:
            raise ConfigError(f"city {city.name}: no *.geojson files in {p}")
        return paths
    return [p]


# ---------------------------------------------------------------- stages

def cmd_synth(cfg: RunConfig, args) -> None:
    done = False
    for name, city in cfg.cities.items():
        if city.synth is None:
            continue
        spec = city.synth
        if args.seed is not None:
            spec = replace(spec, seed=args.seed + list(cfg.cities).index(name))
        out = synth.generate(spec, city.data_dir)
        done = True
        _summary("synth", city=name, seed=spec.seed, cells=out.grid.n_cells,
                 sites=out.truth["n_sites"], rho_target=spec.rho_target, path=city.data_dir)
    if not done:
        raise ConfigError("no city has a 'synth' block")


def cmd_grid(cfg: RunConfig, args) -> None:
    for name, city in cfg.cities.items():
        if city.bbox is not None:
            lat0, lon0, lat1, lon1 = (float(v) for v in city.bbox)
            grid = make_grid(GeoPoint(lat0, lon0), GeoPoint(lat1, lon1), city.cell_size_m)
        else:
            grid = synth.city_grid(city.synth)
        _write_json(cfg.city_dir(name) / "grid.json", grid.to_dict())
        _summary("grid", city=name, n_cols=grid.n_cols, n_rows=grid.n_rows, cells=grid.n_cells,
                 cell_size_m=grid.cell_size_m)


def cmd_proxy(cfg: RunConfig, args) -> None:
    for name, city in cfg.cities.items():
        grid = _grid(cfg, name)
        sites, fps = _footprints(cfg, city, grid)
        bw = deployed_bandwidth(sites, fps, grid)
        ntl = ntl_weight_series(ingest.parse_raster(_need_input(city, "ntl")), grid)
        proxy = weighted_proxy(bw, ntl)
        d = cfg.city_dir(name)
        bw.to_csv(d / "bandwidth.csv")
        ntl.to_csv(d / "ntl_weight.csv")
        proxy.to_csv(d / "proxy.csv")
        _summary("proxy", city=name, sites=len(sites), cells=len(proxy),
                 total_bandwidth_mhz=sum(bw.values.values()))


def cmd_indicator(cfg: RunConfig, args) -> None:
    for name, city in cfg.cities.items():
        grid = _grid(cfg, name)
        _, fps = _footprints(cfg, city, grid)
        weights = user_weight_series(ingest.parse_measurements(_need_input(city, "measurements")),
                                     grid)
        traffic = ingest.parse_traffic(_need_input(city, "traffic"))
        ind = demand_indicator(traffic, fps, weights, grid, cfg.reduction)
        d = cfg.city_dir(name)
        weights.to_csv(d / "user_weight.csv")
        ind.to_csv(d / "indicator.csv")
        _summary("indicator", city=name, records=len(traffic), cells=len(ind),
                 reduction=cfg.reduction)


def cmd_validate_proxy(cfg: RunConfig, args) -> None:
    for name in cfg.cities:
        grid = _grid(cfg, name)
        fit = ols_validate(_series(cfg, name, "proxy", grid), _series(cfg, name, "indicator", grid))
        _write_json(cfg.city_dir(name) / "validation.json",
                    {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r_squared,
                     "n": fit.n})
        _summary("validate-proxy", city=name, r2=fit.r_squared, slope=fit.slope,
                 intercept=fit.intercept, n=fit.n)


def cmd_features(cfg: RunConfig, args) -> None:
    for name, city in cfg.cities.items():
        grid = _grid(cfg, name)
        target = _series(cfg, name, "proxy", grid)
        cols = []
        for p in _feature_paths(city):
            cols.append(rasterize(ingest.parse_feature_source(p), grid))
        table = assemble(cols, target)
        table.to_csv(cfg.city_dir(name) / "features.csv")
        _summary("features", city=name, rows=table.n_rows, features=len(table.names),
                 fingerprint=table.fingerprint()[:12])


def _train_cities(cfg: RunConfig) -> list[str]:
    seen = []
    for sc in cfg.scenarios:
        if sc["train"] not in seen:
            seen.append(sc["train"])
    return seen


def cmd_rank(cfg: RunConfig, args) -> None:
    for name in _train_cities(cfg):
        report = rank_features(_table(cfg, name), seed=cfg.seed)
        _write_json(cfg.city_dir(name) / "importance.json", report.to_dict())
        _summary("rank", city=name, top=",".join(report.ranked()[:5]))


def cmd_split(cfg: RunConfig, args) -> None:
    for sc in cfg.scenarios:
        if "test" in sc:
            continue
        table = _table(cfg, sc["train"])
        plan = spatial_split(table, cfg.model.k_clusters, cfg.model.train_frac, cfg.seed)
        _write_json(cfg.run_dir / "splits" / f"{sc['name']}.json", plan.to_dict())
        _summary("split", scenario=sc["name"], city=sc["train"], k=plan.k,
                 train=len(plan.train), test=len(plan.test))


def _index_path(cfg: RunConfig) -> Path:
    return cfg.run_dir / "models" / "index.json"


def cmd_train(cfg: RunConfig, args) -> None:
    index = []
    models_dir = cfg.run_dir / "models"
    for sc in cfg.scenarios:
        train = _table(cfg, sc["train"])
        test = _table(cfg, sc["test"]) if "test" in sc else None
        if test is None:
            stored = json.loads(_need_output(cfg.run_dir / "splits" / f"{sc['name']}.json",
                                             "split").read_text(encoding="utf-8"))
        base = run_baseline(train)
        base.scenario = f"{sc['name']}-baseline"
        path = save_artifact(base, models_dir)
        index.append({"scenario": sc["name"], "model": "baseline", "path": path.name})
        _summary("train", scenario=sc["name"], model="baseline", feature=base.feature_names[0],
                 r2=base.metrics["r2"], rmse=base.metrics["rmse"])
        for kind in cfg.models:
            art = run_scenario(train, test, replace(cfg.model, kind=kind), cfg.seed, sc["name"])
            if test is None and art.split["test_cells"] != stored["test_cells"]:
                raise SpecDemandError(f"scenario {sc['name']}: split differs from the stored "
                                      "plan; re-run `split`")
            path = save_artifact(art, models_dir)
            index.append({"scenario": sc["name"], "model": kind, "path": path.name})
            _summary("train", scenario=sc["name"], model=kind, r2=art.metrics["r2"],
                     rmse=art.metrics["rmse"], cv_r2=art.cv["mean_r2"])
    _write_json(_index_path(cfg), {"artifacts": index})


def _scenario(cfg: RunConfig, name: str) -> dict:
    for sc in cfg.scenarios:
        if sc["name"] == name:
            return sc
    raise ConfigError(f"artifact refers to unknown scenario {name!r}")


def _artifacts(cfg: RunConfig):
    idx = json.loads(_need_output(_index_path(cfg), "train").read_text(encoding="utf-8"))
    for entry in idx["artifacts"]:
        yield entry, load_artifact(cfg.run_dir / "models" / entry["path"])


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def cmd_evaluate(cfg: RunConfig, args) -> None:
    rows = []
    for entry, art in _artifacts(cfg):
        sc = _scenario(cfg, entry["scenario"])
        train = _table(cfg, sc["train"])
        if entry["model"] == "baseline":
            m = run_baseline(train, art.feature_names[0]).metrics
        else:
            test = _table(cfg, sc["test"]) if "test" in sc else None
            m = recompute_metrics(art, train, test)
        if abs(m["r2"] - art.metrics["r2"]) > 1e-9:
            raise SpecDemandError(f"{entry['path']}: stored r2 {art.metrics['r2']} does not "
                                  f"reproduce ({m['r2']})")
        rows.append([entry["scenario"], entry["model"], repr(m["r2"]), repr(m["rmse"]), m["n_test"]])
        _summary("evaluate", scenario=entry["scenario"], model=entry["model"], r2=m["r2"],
                 rmse=m["rmse"], n_test=m["n_test"])
    _write_csv(cfg.run_dir / "evaluation.csv", ["scenario", "model", "r2", "rmse", "n_test"], rows)


def cmd_reduce(cfg: RunConfig, args) -> None:
    rows = []
    for entry, art in list(_artifacts(cfg)):
        if entry["model"] == "baseline":
            continue
        sc = _scenario(cfg, entry["scenario"])
        train = _table(cfg, sc["train"])
        test = _table(cfg, sc["test"]) if "test" in sc else None
        rep_path = _need_output(cfg.city_dir(sc["train"]) / "importance.json", "rank")
        report = ImportanceReport.from_dict(json.loads(rep_path.read_text(encoding="utf-8")))
        for n in cfg.top_n:
            red = run_reduced(art, n, train, test, report)
            save_artifact(red, cfg.run_dir / "reduced")
            rows.append([entry["scenario"], entry["model"], n, repr(red.metrics["r2"]),
                         repr(red.extra["delta_r2"]), " ".join(red.extra["kept"])])
            _summary("reduce", scenario=entry["scenario"], model=entry["model"], top_n=n,
                     r2=red.metrics["r2"], full_r2=art.metrics["r2"],
                     delta_r2=red.extra["delta_r2"])
    _write_csv(cfg.run_dir / "reduced.csv",
               ["scenario", "model", "top_n", "r2", "delta_r2", "features"], rows)


def cmd_heatmap(cfg: RunConfig, args) -> None:
    name = args.series or "proxy"
    for city in cfg.cities:
        grid = _grid(cfg, city)
        if name in SERIES_FILES:
            series = _series(cfg, city, name, grid)
        else:
            table = _table(cfg, city)
            if name not in table.names:
                raise ConfigError(f"unknown series {name!r}; choose one of "
                                  f"{sorted(SERIES_FILES)} or a feature column")
            series = CellSeries(grid, dict(zip(table.cell_ids, table.column(name).tolist())), name)
        out = cfg.city_dir(city) / f"heatmap_{name}.geojson"
        out.write_text(json.dumps(series.to_geojson(), sort_keys=True) + "\n", encoding="utf-8")
        series.to_csv(cfg.city_dir(city) / f"heatmap_{name}.csv")
        _summary("heatmap", city=city, series=name, cells=len(series), path=out)


COMMANDS = {
    "synth": (cmd_synth, "generate synthetic input datasets for cities with a synth block"),
    "grid": (cmd_grid, "build each city's analysis grid"),
    "proxy": (cmd_proxy, "NTL-weighted deployed bandwidth per cell"),
    "indicator": (cmd_indicator, "crowdsource-weighted throughput indicator per cell"),
    "validate-proxy": (cmd_validate_proxy, "regress the indicator on the proxy"),
    "features": (cmd_features, "rasterize feature layers into the feature table"),
    "rank": (cmd_rank, "ensemble feature importance for each training city"),
    "split": (cmd_split, "spatially clustered train/test split per combined scenario"),
    "train": (cmd_train, "fit baseline, ridge and GBR for every scenario"),
    "evaluate": (cmd_evaluate, "recompute test metrics from stored artifacts"),
    "reduce": (cmd_reduce, "re-run scenarios on the top-ranked features"),
    "heatmap": (cmd_heatmap, "export a cell series as GeoJSON and CSV"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specdemand", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
        p.add_argument("--run-dir", metavar="PATH",
                       help="output directory (overrides the config's run_dir)")
        p.add_argument("--seed", type=int, metavar="INT",
                       help="random seed (overrides the config's seed)")
        if name == "heatmap":
            p.add_argument("--series", metavar="NAME", default="proxy",
                           help="proxy, indicator, bandwidth, ntl_weight, user_weight or a "
                                "feature column (default: proxy)")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("SDK_LOG_LEVEL", "warn").lower()
    if level not in LOG_LEVELS:
        raise ConfigError(f"SDK_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        _setup_logging()
        cfg = load_config(args.config, args.run_dir, args.seed)
        COMMANDS[args.command][0](cfg, args)
    except SpecDemandError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
