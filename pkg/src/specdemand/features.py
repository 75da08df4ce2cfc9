"""Grid-aligned feature columns, the feature table, and ensemble feature ranking."""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from . import _kernels
from .demand import CellSeries
from .errors import (DuplicateColumn, EmptyTable, GeometryError, GridMismatch, InvalidInput,
                     ParseError, TooFewFeatures, TooFewRows, UnknownFeature)
from .geo import CellId, GridSpec, ProjectedPoint, cells_along_segment, locate_arrays, project_arrays
from .ingest import FeatureSource
from .ml import (fit_forest, fit_gbr, fit_lasso, fit_ridge, gain_importance,
                 permutation_importance)

log = logging.getLogger(__name__)

METHODS = ("random_forest", "gradient_boosting", "lasso", "ridge", "permutation")


# ---------------------------------------------------------------- rasterization

def _orient(ax, ay, bx, by, cx, cy):
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (v > 0) - (v < 0)


def _on_segment(ax, ay, bx, by, cx, cy):
    return min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by)


def _segments_cross(p1, p2, p3, p4):
    o1 = _orient(*p1, *p2, *p3)
    o2 = _orient(*p1, *p2, *p4)
    o3 = _orient(*p3, *p4, *p1)
    o4 = _orient(*p3, *p4, *p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and _on_segment(*p1, *p2, *p3)) or (o2 == 0 and _on_segment(*p1, *p2, *p4))
            or (o3 == 0 and _on_segment(*p3, *p4, *p1)) or (o4 == 0 and _on_segment(*p3, *p4, *p2)))


def is_simple_ring(xs, ys) -> bool:
    """True when no two non-adjacent edges of the (open) ring touch."""
    n = len(xs)
    if n < 3:
        return False
    pts = list(zip(xs, ys))
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a, b, pts[j], pts[(j + 1) % n]):
                return False
    return True


def ring_area(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    return 0.5 * abs(float(np.dot(xs, np.roll(ys, -1)) - np.dot(np.roll(xs, -1), ys)))


def _cell_range(lo, hi, origin, size, n):
    a = max(0, math.floor((lo - origin) / size))
    b = min(n - 1, math.floor((hi - origin) / size))
    return range(a, b + 1)


def polygon_cell_overlaps(xs, ys, grid: GridSpec):
    """Yield ``(cell, overlap_area_m2)`` for every grid cell a projected ring touches."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    s = grid.cell_size_m
    for row in _cell_range(ys.min(), ys.max(), grid.origin.y, s, grid.n_rows):
        y0 = grid.origin.y + row * s
        for col in _cell_range(xs.min(), xs.max(), grid.origin.x, s, grid.n_cols):
            x0 = grid.origin.x + col * s
            a = _kernels.polygon_box_area(xs, ys, x0, y0, x0 + s, y0 + s)
            if a > 0.0:
                yield CellId(col, row), a


def rasterize_polygon_value(src: FeatureSource, grid: GridSpec) -> CellSeries:
    """Areal interpolation of polygon values onto the grid.

    ``extensive`` values are split in proportion to overlap area (mass
    conserving for polygons inside the grid); ``intensive`` values become
    the overlap-area-weighted mean of the polygons touching a cell.
    """
    if src.kind != "polygon_value":
        raise InvalidInput(f"{src.name}: expected a polygon_value source, got {src.kind}")
    if src.allocation not in ("intensive", "extensive"):
        raise InvalidInput(f"{src.name}: allocation tag missing")
    num = defaultdict(float)
    den = defaultdict(float)
    for i, (ring, value) in enumerate(zip(src.geometries, src.values)):
        lon = [p[0] for p in ring]
        lat = [p[1] for p in ring]
        xs, ys = project_arrays(lat, lon, grid.projection_origin)
        if not is_simple_ring(xs.tolist(), ys.tolist()):
            raise GeometryError(f"{src.name}: polygon {i} is self-intersecting")
        area = ring_area(xs, ys)
        if not area > 0:
            raise GeometryError(f"{src.name}: polygon {i} has zero area")
        for c, a in polygon_cell_overlaps(xs, ys, grid):
            if src.allocation == "extensive":
                num[c] += value * a / area
            else:
                num[c] += value * a
                den[c] += a
    if src.allocation == "intensive":
        values = {c: num[c] / den[c] for c in num if den[c] > 0}
    else:
        values = dict(num)
    return CellSeries(grid, values, src.name, "")


def rasterize_points(src: FeatureSource, grid: GridSpec) -> CellSeries:
    """Number of points per cell; points outside the grid are dropped."""
    if src.kind != "point":
        raise InvalidInput(f"{src.name}: expected a point source, got {src.kind}")
    counts = defaultdict(float)
    if src.geometries:
        lon = [p[0] for p in src.geometries]
        lat = [p[1] for p in src.geometries]
        x, y = project_arrays(lat, lon, grid.projection_origin)
        cols, rows, inside = locate_arrays(x, y, grid)
        for col, row in zip(cols[inside].tolist(), rows[inside].tolist()):
            counts[CellId(col, row)] += 1.0
        dropped = int((~inside).sum())
        if dropped:
            log.warning("%s: %d point(s) outside the grid dropped", src.name, dropped)
    return CellSeries(grid, dict(counts), src.name, "count")


def rasterize_lines(src: FeatureSource, grid: GridSpec) -> CellSeries:
    """Total clipped line length (m) per cell."""
    if src.kind != "line":
        raise InvalidInput(f"{src.name}: expected a line source, got {src.kind}")
    totals = defaultdict(float)
    s = grid.cell_size_m
    for line in src.geometries:
        lon = [p[0] for p in line]
        lat = [p[1] for p in line]
        xs, ys = project_arrays(lat, lon, grid.projection_origin)
        for k in range(len(xs) - 1):
            a = ProjectedPoint(float(xs[k]), float(ys[k]))
            b = ProjectedPoint(float(xs[k + 1]), float(ys[k + 1]))
            for c in cells_along_segment(a, b, grid):
                x0 = grid.origin.x + c.col * s
                y0 = grid.origin.y + c.row * s
                length = _kernels.segment_box_length(a.x, a.y, b.x, b.y, x0, y0, x0 + s, y0 + s)
                if length > 0.0:
                    totals[c] += length
    return CellSeries(grid, dict(totals), src.name, "m")


def rasterize(src: FeatureSource, grid: GridSpec) -> CellSeries:
    if src.kind == "polygon_value":
        return rasterize_polygon_value(src, grid)
    if src.kind == "point":
        return rasterize_points(src, grid)
    if src.kind == "line":
        return rasterize_lines(src, grid)
    raise InvalidInput(f"unknown source kind {src.kind!r}")


def per_km2(series: CellSeries, name: str | None = None) -> CellSeries:
    """Density variant of a count/length/extensive column."""
    area_km2 = series.grid.cell_size_m ** 2 / 1e6
    return series.with_values({c: v / area_km2 for c, v in series.values.items()},
                              name=name or f"{series.name}_per_km2",
                              units=f"{series.units}/km2" if series.units else "1/km2")


# ---------------------------------------------------------------- feature table

@dataclass(eq=False)
class FeatureTable:
    grid: GridSpec
    names: tuple
    X: np.ndarray
    target: np.ndarray
    cell_ids: list
    target_name: str = "target"

    def __post_init__(self):
        self.names = tuple(self.names)
        # C order keeps BLAS reductions, and so stored metrics, bit-identical after select()
        self.X = np.ascontiguousarray(np.asarray(self.X, dtype=float).reshape(len(self.cell_ids), len(self.names)))
        self.target = np.ascontiguousarray(self.target, dtype=float)
        if len(set(self.names)) != len(self.names):
            raise DuplicateColumn(f"duplicate column names in {self.names}")
        if self.target.shape != (len(self.cell_ids),):
            raise InvalidInput("target length differs from the number of cells")
        if not (np.isfinite(self.X).all() and np.isfinite(self.target).all()):
            raise InvalidInput("feature table contains non-finite values")
        self.cell_ids = [self.grid.check(c) for c in self.cell_ids]

    @property
    def n_rows(self) -> int:
        return len(self.cell_ids)

    def column(self, name) -> np.ndarray:
        try:
            return self.X[:, self.names.index(name)]
        except ValueError:
            raise UnknownFeature(f"no feature named {name!r}") from None

    def select(self, names) -> "FeatureTable":
        """Restrict to ``names``, keeping this table's column order."""
        missing = [n for n in names if n not in self.names]
        if missing:
            raise UnknownFeature(f"unknown feature(s) {missing}")
        keep = [i for i, n in enumerate(self.names) if n in set(names)]
        return FeatureTable(self.grid, [self.names[i] for i in keep], self.X[:, keep],
                            self.target, list(self.cell_ids), self.target_name)

    def rows(self, idx) -> "FeatureTable":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureTable(self.grid, self.names, self.X[idx], self.target[idx],
                            [self.cell_ids[i] for i in idx], self.target_name)

    def centroids_xy(self) -> np.ndarray:
        return np.array([[self.grid.center(c).x, self.grid.center(c).y] for c in self.cell_ids])

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cell_col", "cell_row", *self.names, "target"])
        for c, xr, t in zip(self.cell_ids, self.X.tolist(), self.target.tolist()):
            w.writerow([c.col, c.row, *map(repr, xr), repr(t)])
        return buf.getvalue()

    def to_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_text(), encoding="utf-8")

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_csv_text().encode()).hexdigest()

    @classmethod
    def from_csv(cls, path, grid: GridSpec) -> "FeatureTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[:2] != ["cell_col", "cell_row"] or header[-1] != "target":
                raise ParseError(1, None, "expected header cell_col,cell_row,<features...>,target",
                                 path=str(path))
            names = header[2:-1]
            cells, rows, target = [], [], []
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != len(header):
                    raise ParseError(lineno, None, "wrong field count", path=str(path))
                try:
                    cells.append(CellId(int(rec[0]), int(rec[1])))
                    rows.append([float(v) for v in rec[2:-1]])
                    target.append(float(rec[-1]))
                except ValueError:
                    raise ParseError(lineno, None, "malformed number", path=str(path)) from None
        return cls(grid, names, np.array(rows, dtype=float).reshape(len(cells), len(names)),
                   np.array(target), cells)


def assemble(columns, target: CellSeries, mask: str | Callable = "nonzero") -> FeatureTable:
    """Join feature columns and the target over the cells selected by ``mask``.

    ``columns`` is a list of :class:`CellSeries` (named by ``.name``) or a
    mapping name -> series.  ``mask`` is ``"nonzero"`` (cells where the
    target or any feature is positive), ``"all"``, or a predicate
    ``f(cell, features: dict, target: float) -> bool``.
    """
    if isinstance(columns, Mapping):
        named = list(columns.items())
    else:
        named = [(c.name, c) for c in columns]
    names = [n for n, _ in named]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateColumn(f"duplicate feature column(s) {dup}")
    grid = target.grid
    for n, col in named:
        if col.grid != grid:
            raise GridMismatch(f"column {n!r} is on a different grid than the target")
    if mask == "all":
        candidates = list(grid.cells())
    else:
        keys = set(target.values)
        for _, col in named:
            keys.update(col.values)
        candidates = sorted(keys, key=lambda c: (c.row, c.col))
    cells, rows, ys = [], [], []
    for c in candidates:
        feats = [col[c] for _, col in named]
        t = target[c]
        if mask == "nonzero":
            keep = t > 0 or any(v > 0 for v in feats)
        elif mask == "all":
            keep = True
        elif callable(mask):
            keep = bool(mask(c, dict(zip(names, feats)), t))
        else:
            raise InvalidInput(f"unknown mask {mask!r}")
        if keep:
            cells.append(c)
            rows.append(feats)
            ys.append(t)
    if not cells:
        raise EmptyTable("mask selected no cells")
    return FeatureTable(grid, names, np.array(rows, dtype=float).reshape(len(cells), len(names)),
                        np.array(ys), cells, target.name or "target")


# ---------------------------------------------------------------- ranking

@dataclass
class RankSettings:
    forest_trees: int = 200
    forest_max_depth: int = 8
    forest_min_leaf: int = 2
    forest_feature_frac: float = 1 / 3
    gbr_estimators: int = 300
    gbr_learning_rate: float = 0.05
    gbr_max_depth: int = 3
    gbr_min_leaf: int = 5
    lasso_alpha: float = 0.01
    ridge_alpha: float = 0.1
    permutation_repeats: int = 5
    holdout_frac: float = 0.25


@dataclass
class ImportanceReport:
    features: tuple
    methods: dict = field(default_factory=dict)
    aggregate: np.ndarray = None

    def ranked(self) -> list[str]:
        """Features by descending aggregate score (ties keep column order)."""
        order = sorted(range(len(self.features)), key=lambda i: (-self.aggregate[i], i))
        return [self.features[i] for i in order]

    def to_dict(self) -> dict:
        return {
            "features": list(self.features),
            "methods": {m: dict(zip(self.features, map(float, v))) for m, v in self.methods.items()},
            "aggregate": dict(zip(self.features, map(float, self.aggregate))),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImportanceReport":
        feats = tuple(d["features"])
        methods = {m: np.array([v[f] for f in feats]) for m, v in d["methods"].items()}
        return cls(feats, methods, np.array([d["aggregate"][f] for f in feats]))


def sum_normalize(scores) -> np.ndarray:
    """Scale non-negative scores to sum to 1; an all-zero vector becomes uniform."""
    s = np.asarray(scores, dtype=float)
    total = s.sum()
    if not total > 0:
        return np.full(s.shape, 1.0 / s.size)
    return s / total


def aggregate_scores(per_method) -> np.ndarray:
    """Unweighted mean of the sum-normalised score vectors."""
    vecs = [sum_normalize(v) for v in per_method]
    return np.mean(vecs, axis=0)


def rank_features(t: FeatureTable, seed: int = 0, settings: RankSettings | None = None) -> ImportanceReport:
    """Ensemble importance from five methods on z-scored features.

    Forest and boosting use split gain, lasso and ridge absolute
    coefficients, and permutation importance the mean R^2 drop (clipped at
    0) of a boosted model on a held-out share of rows.  Each method's scores
    are sum-normalised; the aggregate is their plain mean.
    """
    cfg = settings or RankSettings()
    n, p = t.X.shape
    if p < 2:
        raise TooFewFeatures(f"ranking needs >= 2 features, got {p}")
    if n < 30:
        raise TooFewRows(f"ranking needs >= 30 rows, got {n}")
    means = t.X.mean(axis=0)
    stds = t.X.std(axis=0)
    stds = np.where(stds > 0, stds, 1.0)
    Z = (t.X - means) / stds
    y = t.target
    seeds = np.random.SeedSequence(seed).generate_state(3)
    raw = {}
    forest = fit_forest(Z, y, cfg.forest_trees, cfg.forest_max_depth, cfg.forest_min_leaf,
                        cfg.forest_feature_frac, seed=int(seeds[0]))
    raw["random_forest"] = gain_importance(forest)
    gbr = fit_gbr(Z, y, cfg.gbr_estimators, cfg.gbr_learning_rate, cfg.gbr_max_depth,
                  cfg.gbr_min_leaf)
    raw["gradient_boosting"] = gain_importance(gbr)
    raw["lasso"] = np.abs(fit_lasso(Z, y, cfg.lasso_alpha).coefficients)
    raw["ridge"] = np.abs(fit_ridge(Z, y, cfg.ridge_alpha).coefficients)
    perm = np.random.default_rng(int(seeds[1])).permutation(n)
    n_hold = max(2, int(round(cfg.holdout_frac * n)))
    hold, train = perm[:n_hold], perm[n_hold:]
    held_model = fit_gbr(Z[train], y[train], cfg.gbr_estimators, cfg.gbr_learning_rate,
                         cfg.gbr_max_depth, cfg.gbr_min_leaf)
    drops = permutation_importance(held_model, Z[hold], y[hold], cfg.permutation_repeats,
                                   seed=int(seeds[2]))
    raw["permutation"] = np.clip(drops, 0.0, None)
    methods = {m: sum_normalize(raw[m]) for m in METHODS}
    return ImportanceReport(t.names, methods, aggregate_scores([methods[m] for m in METHODS]))
