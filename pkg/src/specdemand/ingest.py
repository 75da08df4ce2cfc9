"""Readers and writers for every external file format.

Tabular data is CSV (``#`` comment lines allowed), vector data GeoJSON and
rasters ESRI ASCII grid.  Readers either return a complete, valid dataset or
raise: :class:`ParseError` for the first structurally malformed row, or
:class:`ValidationError` listing every row that breaks a domain invariant.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInput, ParseError, UnsupportedGeometry, ValidationError
from .geo import GeoPoint
from .propagation import SiteRecord

SITE_COLUMNS = ("site_id", "lat", "lon", "tx_power_dbm", "antenna_height_m",
                "center_freq_mhz", "bandwidth_mhz", "environment")
TRAFFIC_COLUMNS = ("site_id", "date", "hour", "dl_throughput_mbps")
MEASUREMENT_COLUMNS = ("lat", "lon", "samples")

SOURCE_KINDS = ("polygon_value", "point", "line")
ALLOCATIONS = ("intensive", "extensive")


@dataclass(frozen=True)
class TrafficRecord:
    site_id: str
    date: dt.date
    hour: int
    dl_throughput_mbps: float
    band: str | None = None


@dataclass(frozen=True)
class MeasurementRecord:
    location: GeoPoint
    samples: int


@dataclass(frozen=True, eq=False)
class RasterGrid:
    """Raster in geographic degrees; ``values[0]`` is the southernmost row."""

    origin: GeoPoint
    cell_deg: float
    n_cols: int
    n_rows: int
    values: np.ndarray
    nodata: float = -9999.0

    def __post_init__(self):
        if not self.cell_deg > 0:
            raise InvalidInput("raster cell size must be > 0")
        if self.values.shape != (self.n_rows, self.n_cols):
            raise InvalidInput(
                f"raster values shape {self.values.shape} != ({self.n_rows}, {self.n_cols})")

    def __eq__(self, other):
        if not isinstance(other, RasterGrid):
            return NotImplemented
        return (self.origin == other.origin and self.cell_deg == other.cell_deg
                and self.n_cols == other.n_cols and self.n_rows == other.n_rows
                and self.nodata == other.nodata and np.array_equal(self.values, other.values))

    def pixel_centers(self):
        """``(lat, lon, values)`` flattened arrays over every pixel."""
        rows, cols = np.mgrid[0:self.n_rows, 0:self.n_cols]
        lat = self.origin.lat + (rows + 0.5) * self.cell_deg
        lon = self.origin.lon + (cols + 0.5) * self.cell_deg
        return lat.ravel(), lon.ravel(), self.values.ravel()


@dataclass(frozen=True)
class FeatureSource:
    """A named vector layer.

    ``geometries`` holds ``(lon, lat)`` tuples: one per point, a vertex list
    per line, or an open exterior ring (no repeated closing vertex) per
    polygon.  ``values`` is set only for ``polygon_value`` sources.
    """

    kind: str
    name: str
    geometries: tuple
    values: tuple | None = None
    allocation: str | None = None

    def segments(self):
        """Consecutive vertex pairs of every line."""
        for line in self.geometries:
            for a, b in zip(line[:-1], line[1:]):
                yield a, b


# ---------------------------------------------------------------- CSV helpers

def _rows(path, required):
    """Yield ``(line_number, row_dict)`` skipping comments and blank lines."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines())
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError(1, None, "missing header", path=str(path))
    reader = csv.reader([ln for _, ln in lines])
    header = [h.strip() for h in next(reader)]
    missing = [c for c in required if c not in header]
    if missing:
        raise ParseError(lines[0][0], missing[0], f"header lacks column(s) {missing}", path=str(path))
    for (lineno, _), values in zip(lines[1:], reader):
        if len(values) != len(header):
            raise ParseError(lineno, None,
                             f"expected {len(header)} fields, found {len(values)}", path=str(path))
        yield lineno, dict(zip(header, (v.strip() for v in values)))


def _float(row, col, lineno, path):
    try:
        v = float(row[col])
    except ValueError:
        raise ParseError(lineno, col, f"not a number: {row[col]!r}", path=str(path)) from None
    if not math.isfinite(v):
        raise ParseError(lineno, col, f"non-finite value {row[col]!r}", path=str(path))
    return v


def _int(row, col, lineno, path):
    try:
        return int(row[col])
    except ValueError:
        raise ParseError(lineno, col, f"not an integer: {row[col]!r}", path=str(path)) from None


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# ---------------------------------------------------------------- sites

def parse_sites(path) -> list[SiteRecord]:
    """Read a site deployment CSV; row order is preserved."""
    sites, problems = [], []
    seen = set()
    for lineno, row in _rows(path, SITE_COLUMNS):
        lat = _float(row, "lat", lineno, path)
        lon = _float(row, "lon", lineno, path)
        nums = {c: _float(row, c, lineno, path) for c in
                ("tx_power_dbm", "antenna_height_m", "center_freq_mhz", "bandwidth_mhz")}
        site_id = row["site_id"]
        errs = []
        if not site_id:
            errs.append("empty site_id")
        elif site_id in seen:
            errs.append(f"duplicate site_id {site_id!r}")
        seen.add(site_id)
        try:
            loc = GeoPoint(lat, lon)
        except InvalidInput as e:
            errs.append(str(e))
            loc = None
        if loc is not None:
            rec = SiteRecord(site_id, loc, environment=row["environment"], **nums)
            errs.extend(rec.problems())
        if errs:
            problems.append((lineno, "; ".join(errs)))
        else:
            sites.append(rec)
    if problems:
        raise ValidationError(problems, path=str(path))
    return sites


def write_sites(path, sites) -> None:
    _write_csv(path, SITE_COLUMNS, [
        (s.site_id, _fmt(s.location.lat), _fmt(s.location.lon), _fmt(s.tx_power_dbm),
         _fmt(s.antenna_height_m), _fmt(s.center_freq_mhz), _fmt(s.bandwidth_mhz), s.environment)
        for s in sites])


# ---------------------------------------------------------------- traffic

def parse_traffic(path) -> list[TrafficRecord]:
    """Read hourly per-site throughput.

    An optional ``band`` column is accepted; when present, uniqueness is per
    (site, date, hour, band).
    """
    records, problems = [], []
    seen = set()
    for lineno, row in _rows(path, TRAFFIC_COLUMNS):
        try:
            date = dt.date.fromisoformat(row["date"])
        except ValueError:
            raise ParseError(lineno, "date", f"not an ISO-8601 date: {row['date']!r}",
                             path=str(path)) from None
        hour = _int(row, "hour", lineno, path)
        thr = _float(row, "dl_throughput_mbps", lineno, path)
        band = row.get("band") or None
        errs = []
        if not 0 <= hour <= 23:
            errs.append(f"hour {hour} outside 0-23")
        if thr < 0:
            errs.append(f"negative throughput {thr}")
        key = (row["site_id"], date, hour, band)
        if key in seen:
            errs.append(f"duplicate (site_id, date, hour) {key[:3]}")
        seen.add(key)
        if errs:
            problems.append((lineno, "; ".join(errs)))
        else:
            records.append(TrafficRecord(row["site_id"], date, hour, thr, band))
    if problems:
        raise ValidationError(problems, path=str(path))
    return records


def write_traffic(path, records) -> None:
    with_band = any(r.band is not None for r in records)
    header = TRAFFIC_COLUMNS + (("band",) if with_band else ())
    rows = []
    for r in records:
        row = [r.site_id, r.date.isoformat(), str(r.hour), _fmt(r.dl_throughput_mbps)]
        if with_band:
            row.append(r.band or "")
        rows.append(row)
    _write_csv(path, header, rows)


# ---------------------------------------------------------------- measurements

def parse_measurements(path) -> list[MeasurementRecord]:
    """Read crowdsourced sample counts (``lat,lon,samples``)."""
    records, problems = [], []
    for lineno, row in _rows(path, MEASUREMENT_COLUMNS):
        lat = _float(row, "lat", lineno, path)
        lon = _float(row, "lon", lineno, path)
        samples = _int(row, "samples", lineno, path)
        errs = []
        if samples < 1:
            errs.append(f"samples must be >= 1, got {samples}")
        try:
            loc = GeoPoint(lat, lon)
        except InvalidInput as e:
            errs.append(str(e))
        if errs:
            problems.append((lineno, "; ".join(errs)))
        else:
            records.append(MeasurementRecord(loc, samples))
    if problems:
        raise ValidationError(problems, path=str(path))
    return records


def write_measurements(path, records) -> None:
    _write_csv(path, MEASUREMENT_COLUMNS, [
        (_fmt(m.location.lat), _fmt(m.location.lon), str(m.samples)) for m in records])


# ---------------------------------------------------------------- raster

_ASC_KEYS = {"ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter",
             "cellsize", "nodata_value"}


def parse_raster(path) -> RasterGrid:
    """Read an ESRI ASCII grid. The file lists the northern row first."""
    path = str(path)
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0].lower()
        if key not in _ASC_KEYS:
            break
        if len(parts) != 2:
            raise ParseError(i + 1, key, "header line must be 'key value'", path=path)
        try:
            header[key] = float(parts[1])
        except ValueError:
            raise ParseError(i + 1, key, f"not a number: {parts[1]!r}", path=path) from None
        i += 1
    for key in ("ncols", "nrows", "cellsize"):
        if key not in header:
            raise ParseError(i + 1, key, f"header lacks {key}", path=path)
    cell = header["cellsize"]
    if "xllcorner" in header:
        xll = header["xllcorner"]
    elif "xllcenter" in header:
        xll = header["xllcenter"] - cell / 2
    else:
        raise ParseError(i + 1, "xllcorner", "header lacks xllcorner", path=path)
    if "yllcorner" in header:
        yll = header["yllcorner"]
    elif "yllcenter" in header:
        yll = header["yllcenter"] - cell / 2
    else:
        raise ParseError(i + 1, "yllcorner", "header lacks yllcorner", path=path)
    ncols, nrows = header["ncols"], header["nrows"]
    if ncols != int(ncols) or nrows != int(nrows) or ncols < 1 or nrows < 1:
        raise ParseError(1, "ncols", "ncols/nrows must be positive integers", path=path)
    ncols, nrows = int(ncols), int(nrows)
    if not cell > 0:
        raise ParseError(1, "cellsize", "cellsize must be > 0", path=path)
    tokens = []
    for j in range(i, len(lines)):
        for tok in lines[j].split():
            try:
                tokens.append(float(tok))
            except ValueError:
                raise ParseError(j + 1, None, f"not a number: {tok!r}", path=path) from None
    if len(tokens) != ncols * nrows:
        raise ParseError(len(lines), None,
                         f"expected {ncols * nrows} values, found {len(tokens)}", path=path)
    values = np.asarray(tokens, dtype=float).reshape(nrows, ncols)[::-1].copy()
    try:
        origin = GeoPoint(yll, xll)
    except InvalidInput as e:
        raise ParseError(1, "xllcorner", str(e), path=path) from None
    return RasterGrid(origin, cell, ncols, nrows, values, header.get("nodata_value", -9999.0))


def write_raster(path, raster: RasterGrid) -> None:
    out = [
        f"ncols {raster.n_cols}",
        f"nrows {raster.n_rows}",
        f"xllcorner {_fmt(raster.origin.lon)}",
        f"yllcorner {_fmt(raster.origin.lat)}",
        f"cellsize {_fmt(raster.cell_deg)}",
        f"NODATA_value {_fmt(raster.nodata)}",
    ]
    for row in raster.values[::-1]:
        out.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- vector

_GEOM_FOR_KIND = {"point": "Point", "line": "LineString", "polygon_value": "Polygon"}


def _position(pos, where, path):
    if not (isinstance(pos, (list, tuple)) and len(pos) >= 2):
        raise ParseError(None, where, "position must be [lon, lat]", path=path)
    try:
        lon, lat = float(pos[0]), float(pos[1])
    except (TypeError, ValueError):
        raise ParseError(None, where, "non-numeric coordinate", path=path) from None
    return lon, lat


def parse_feature_source(path, kind=None, name=None, allocation=None) -> FeatureSource:
    """Read a GeoJSON FeatureCollection as a feature layer.

    ``kind``, ``name`` and ``allocation`` default to the collection's
    top-level members of the same names (as written by
    :func:`write_feature_source`).
    """
    path = str(path)
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, None, f"invalid JSON: {e.msg}", path=path) from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError(1, "type", "expected a GeoJSON FeatureCollection", path=path)
    kind = kind or doc.get("kind")
    name = name or doc.get("name") or Path(path).stem
    allocation = allocation or doc.get("allocation")
    if kind not in SOURCE_KINDS:
        raise ParseError(1, "kind", f"source kind must be one of {SOURCE_KINDS}, got {kind!r}", path=path)
    if kind == "polygon_value" and allocation not in ALLOCATIONS:
        raise ParseError(1, "allocation",
                         f"polygon_value sources need allocation in {ALLOCATIONS}", path=path)
    want = _GEOM_FOR_KIND[kind]
    geoms, values, problems = [], [], []
    for idx, feat in enumerate(doc.get("features", [])):
        where = f"features[{idx}]"
        geom = (feat or {}).get("geometry") or {}
        gtype = geom.get("type")
        if gtype and gtype.startswith("Multi"):
            raise UnsupportedGeometry(f"{path}: {where}: multi-geometries are not supported")
        if gtype != want:
            raise ParseError(None, where, f"expected {want} geometry, got {gtype!r}", path=path)
        coords = geom.get("coordinates")
        if kind == "point":
            g = _position(coords, where, path)
            pts = [g]
        elif kind == "line":
            if not isinstance(coords, list) or len(coords) < 2:
                raise ParseError(None, where, "LineString needs at least 2 positions", path=path)
            g = tuple(_position(p, where, path) for p in coords)
            pts = list(g)
        else:
            if not isinstance(coords, list) or not coords:
                raise ParseError(None, where, "Polygon needs an exterior ring", path=path)
            if len(coords) > 1:
                raise UnsupportedGeometry(f"{path}: {where}: polygons with holes are not supported")
            ring = [_position(p, where, path) for p in coords[0]]
            if len(ring) < 4 or ring[0] != ring[-1]:
                raise ParseError(None, where, "exterior ring must be closed with >= 4 positions",
                                 path=path)
            g = tuple(ring[:-1])
            pts = list(g)
            props = feat.get("properties") or {}
            if "value" not in props:
                raise ParseError(None, where, f"feature {idx} lacks numeric property 'value'",
                                 path=path)
            try:
                v = float(props["value"])
            except (TypeError, ValueError):
                raise ParseError(None, where, f"feature {idx} 'value' is not numeric",
                                 path=path) from None
            if not math.isfinite(v):
                problems.append((idx, f"non-finite value {v}"))
            elif allocation == "extensive" and v < 0:
                problems.append((idx, f"extensive value {v} < 0"))
            values.append(v)
        for lon, lat in pts:
            try:
                GeoPoint(lat, lon)
            except InvalidInput as e:
                problems.append((idx, str(e)))
                break
        geoms.append(g)
    if problems:
        raise ValidationError(problems, path=path)
    return FeatureSource(kind, name, tuple(geoms),
                         tuple(values) if kind == "polygon_value" else None,
                         allocation if kind == "polygon_value" else None)


def feature_source_to_geojson(src: FeatureSource) -> dict:
    feats = []
    for i, g in enumerate(src.geometries):
        if src.kind == "point":
            geom = {"type": "Point", "coordinates": list(g)}
            props = {}
        elif src.kind == "line":
            geom = {"type": "LineString", "coordinates": [list(p) for p in g]}
            props = {}
        else:
            ring = [list(p) for p in g] + [list(g[0])]
            geom = {"type": "Polygon", "coordinates": [ring]}
            props = {"value": src.values[i]}
        feats.append({"type": "Feature", "geometry": geom, "properties": props})
    doc = {"type": "FeatureCollection", "name": src.name, "kind": src.kind}
    if src.allocation:
        doc["allocation"] = src.allocation
    doc["features"] = feats
    return doc


def write_feature_source(path, src: FeatureSource) -> None:
    Path(path).write_text(json.dumps(feature_source_to_geojson(src)), encoding="utf-8")
