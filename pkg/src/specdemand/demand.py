"""Demand indicator, deployed-bandwidth proxy, weighting layers and OLS validation."""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (DegenerateVariance, GridMismatch, InvalidInput, MissingFootprint,
                     NoOverlap, ParseError, TooFewRows)
from .geo import CellId, GridSpec, cell_polygon, locate_arrays, project_arrays


@dataclass(frozen=True, eq=False)
class CellSeries:
    """Per-cell values on a grid; cells missing from ``values`` read as 0."""

    grid: GridSpec
    values: Mapping[CellId, float]
    name: str = ""
    units: str = ""

    def __post_init__(self):
        clean = {}
        for c, v in self.values.items():
            c = self.grid.check(c)
            v = float(v)
            if not math.isfinite(v):
                raise InvalidInput(f"{self.name or 'series'}: non-finite value at {tuple(c)}")
            clean[c] = v
        object.__setattr__(self, "values", dict(sorted(clean.items(), key=lambda kv: (kv[0].row, kv[0].col))))

    def __getitem__(self, c) -> float:
        return self.values.get(CellId(*c), 0.0)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, CellSeries):
            return NotImplemented
        return self.grid == other.grid and self.values == other.values

    def cells(self) -> list[CellId]:
        return list(self.values)

    def to_array(self) -> np.ndarray:
        """Dense ``(n_rows, n_cols)`` array, absent cells 0."""
        out = np.zeros((self.grid.n_rows, self.grid.n_cols))
        for c, v in self.values.items():
            out[c.row, c.col] = v
        return out

    def with_values(self, values, name=None, units=None) -> "CellSeries":
        return CellSeries(self.grid, values, self.name if name is None else name,
                          self.units if units is None else units)

    def to_csv(self, path) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["col", "row", "value"])
        for c, v in self.values.items():
            w.writerow([c.col, c.row, repr(v)])
        Path(path).write_text(buf.getvalue(), encoding="utf-8")

    @classmethod
    def from_csv(cls, path, grid: GridSpec, name="", units="") -> "CellSeries":
        values = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["col", "row", "value"]:
                raise ParseError(1, None, "expected header col,row,value", path=str(path))
            for lineno, row in enumerate(reader, start=2):
                try:
                    values[CellId(int(row[0]), int(row[1]))] = float(row[2])
                except (ValueError, IndexError):
                    raise ParseError(lineno, None, f"malformed row {row}", path=str(path)) from None
        return cls(grid, values, name, units)

    def to_geojson(self) -> dict:
        """One polygon feature per populated cell with property ``value``."""
        feats = []
        for c, v in self.values.items():
            ring = [[p.lon, p.lat] for p in cell_polygon(c, self.grid)]
            feats.append({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {"col": c.col, "row": c.row, "value": v},
            })
        return {"type": "FeatureCollection", "name": self.name, "units": self.units,
                "features": feats}


@dataclass(frozen=True)
class OlsFit:
    slope: float
    intercept: float
    r_squared: float
    n: int


def _same_grid(a: GridSpec, b: GridSpec):
    if a != b:
        raise GridMismatch("series are defined on different grids")


def _max_normalized(grid, sums: dict, name: str) -> CellSeries:
    peak = max(sums.values(), default=0.0)
    if not peak > 0:
        return CellSeries(grid, {c: 1.0 for c in grid.cells()}, name, "1")
    return CellSeries(grid, {c: v / peak for c, v in sums.items()}, name, "1")


def site_throughput(traffic, reduction: str = "mean") -> dict[str, float]:
    """Collapse hourly records to one value per site.

    Bands are summed within each (date, hour); ``mean`` averages the hours,
    ``busy_hour`` takes the maximum.
    """
    per_slot = defaultdict(float)
    for r in traffic:
        per_slot[(r.site_id, r.date, r.hour)] += r.dl_throughput_mbps
    per_site = defaultdict(list)
    for (site, _, _), v in per_slot.items():
        per_site[site].append(v)
    if reduction == "mean":
        return {s: math.fsum(v) / len(v) for s, v in per_site.items()}
    if reduction == "busy_hour":
        return {s: max(v) for s, v in per_site.items()}
    raise InvalidInput(f"unknown temporal reduction {reduction!r}")


def demand_indicator(traffic, footprints, weights: CellSeries | None, grid: GridSpec,
                     reduction: str = "mean") -> CellSeries:
    """Spatial demand indicator in Mbps.

    Each transmitter's reduced throughput is added in full to every cell of
    its footprint; the per-cell total is then multiplied by ``weights`` when
    given (cells absent from ``weights`` get weight 0).
    """
    per_site = site_throughput(traffic, reduction)
    totals = defaultdict(float)
    for site_id in sorted(per_site):
        fp = footprints.get(site_id)
        if fp is None:
            raise MissingFootprint(site_id)
        for c, _ in fp.cells:
            totals[c] += per_site[site_id]
    if weights is not None:
        _same_grid(weights.grid, grid)
        if any(w < 0 for w in weights.values.values()):
            raise InvalidInput("weights must be non-negative")
        totals = {c: v * weights[c] for c, v in totals.items()}
    return CellSeries(grid, dict(totals), "indicator", "Mbps")


def user_weight_series(measurements, grid: GridSpec) -> CellSeries:
    """Crowdsourced sample counts per cell, max-normalised to [0, 1].

    With no in-grid samples every cell gets weight 1.
    """
    sums = defaultdict(float)
    if measurements:
        lat = [m.location.lat for m in measurements]
        lon = [m.location.lon for m in measurements]
        x, y = project_arrays(lat, lon, grid.projection_origin)
        cols, rows, inside = locate_arrays(x, y, grid)
        for col, row, ok, m in zip(cols, rows, inside, measurements):
            if ok:
                sums[CellId(int(col), int(row))] += m.samples
    return _max_normalized(grid, sums, "user_weight")


def deployed_bandwidth(sites, footprints, grid: GridSpec) -> CellSeries:
    """Total deployed bandwidth (MHz) of all sites covering each cell."""
    totals = defaultdict(float)
    for s in sites:
        fp = footprints.get(s.site_id)
        if fp is None:
            raise MissingFootprint(s.site_id)
        for c, _ in fp.cells:
            totals[c] += s.bandwidth_mhz
    return CellSeries(grid, dict(totals), "bandwidth", "MHz")


def ntl_weight_series(raster, grid: GridSpec) -> CellSeries:
    """Median night-light luminance per cell, max-normalised to [0, 1].

    A pixel belongs to the cell containing its center; nodata pixels are
    ignored.  Cells without pixels take the median over all in-grid pixels.
    """
    lat, lon, vals = raster.pixel_centers()
    x, y = project_arrays(lat, lon, grid.projection_origin)
    cols, rows, inside = locate_arrays(x, y, grid)
    ok = inside & np.isfinite(vals) & (vals != raster.nodata)
    if not ok.any():
        raise NoOverlap("raster has no valid pixels inside the grid")
    flat = (rows[ok] * grid.n_cols + cols[ok]).astype(np.int64)
    v = vals[ok]
    fill = float(np.median(v))
    order = np.argsort(flat, kind="stable")
    flat, v = flat[order], v[order]
    starts = np.flatnonzero(np.r_[True, flat[1:] != flat[:-1]])
    meds = np.full(grid.n_cells, fill)
    for a, b in zip(starts, np.r_[starts[1:], flat.size]):
        meds[flat[a]] = np.median(v[a:b])
    sums = {}
    for k, m in enumerate(meds.tolist()):
        row, col = divmod(k, grid.n_cols)
        sums[CellId(col, row)] = m
    return _max_normalized(grid, sums, "ntl_weight")


def weighted_proxy(bandwidth: CellSeries, ntl_weights: CellSeries) -> CellSeries:
    """Cell-wise product: the spectrum demand proxy."""
    _same_grid(bandwidth.grid, ntl_weights.grid)
    return CellSeries(bandwidth.grid, {c: v * ntl_weights[c] for c, v in bandwidth.values.items()},
                      "proxy", bandwidth.units)


def ols_validate(proxy: CellSeries, indicator: CellSeries) -> OlsFit:
    """Regress the indicator on the proxy over cells present in either series."""
    _same_grid(proxy.grid, indicator.grid)
    cells = sorted(set(proxy.values) | set(indicator.values), key=lambda c: (c.row, c.col))
    if len(cells) < 3:
        raise TooFewRows(f"OLS validation needs >= 3 cells, got {len(cells)}")
    x = np.array([proxy[c] for c in cells])
    y = np.array([indicator[c] for c in cells])
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if not syy > 0:
        raise DegenerateVariance("indicator has zero variance")
    if not sxx > 0:
        raise DegenerateVariance("proxy has zero variance")
    slope = float(xc @ yc) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    r2 = 1.0 - float(resid @ resid) / syy
    return OlsFit(slope, intercept, min(1.0, max(0.0, r2)), len(cells))
