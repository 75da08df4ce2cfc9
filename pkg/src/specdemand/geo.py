"""Local metric projection, the analysis grid, and cell-assignment primitives.

Coordinates are projected with a local equirectangular map about a fixed
origin (the grid's bbox center).  Cells are half-open squares ``[min, max)``
on both axes, anchored at the projected south-west corner of the bbox.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from . import _kernels
from .errors import CellOutOfBounds, DegenerateBBox, InvalidInput

EARTH_RADIUS_M = 6371000.0
DEG = math.pi / 180.0

# Offsets this close to a cell boundary (in cell units) snap onto it, so that
# points built by inverse projection of exact boundaries land in the right cell.
_SNAP = 1e-9


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InvalidInput(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise InvalidInput(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise InvalidInput(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class ProjectedPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInput(f"non-finite projected point ({self.x}, {self.y})")


class CellId(NamedTuple):
    col: int
    row: int


def project(p: GeoPoint, origin: GeoPoint) -> ProjectedPoint:
    """Project ``p`` to meters east/north of ``origin``."""
    x = EARTH_RADIUS_M * (p.lon - origin.lon) * DEG * math.cos(origin.lat * DEG)
    y = EARTH_RADIUS_M * (p.lat - origin.lat) * DEG
    return ProjectedPoint(x, y)


def unproject(q: ProjectedPoint, origin: GeoPoint) -> GeoPoint:
    """Inverse of :func:`project`."""
    lat = origin.lat + q.y / (EARTH_RADIUS_M * DEG)
    lon = origin.lon + q.x / (EARTH_RADIUS_M * DEG * math.cos(origin.lat * DEG))
    return GeoPoint(lat, lon)


def project_arrays(lat, lon, origin: GeoPoint):
    """Vectorised :func:`project`; returns ``(x, y)`` arrays."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    x = EARTH_RADIUS_M * (lon - origin.lon) * DEG * math.cos(origin.lat * DEG)
    y = EARTH_RADIUS_M * (lat - origin.lat) * DEG
    return x, y


def unproject_arrays(x, y, origin: GeoPoint):
    """Vectorised :func:`unproject`; returns ``(lat, lon)`` arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lat = origin.lat + y / (EARTH_RADIUS_M * DEG)
    lon = origin.lon + x / (EARTH_RADIUS_M * DEG * math.cos(origin.lat * DEG))
    return lat, lon


@dataclass(frozen=True)
class GridSpec:
    """Uniform square grid in the local projection.

    ``origin`` is the projected south-west corner; ``projection_origin`` is
    the geographic point the projection is centered on.
    """

    origin: ProjectedPoint
    cell_size_m: float
    n_cols: int
    n_rows: int
    projection_origin: GeoPoint

    def __post_init__(self):
        if not self.cell_size_m > 0:
            raise InvalidInput(f"cell_size_m must be > 0, got {self.cell_size_m}")
        if self.n_cols < 1 or self.n_rows < 1:
            raise InvalidInput(f"grid needs at least one cell, got {self.n_cols}x{self.n_rows}")

    @property
    def n_cells(self) -> int:
        return self.n_cols * self.n_rows

    @property
    def width_m(self) -> float:
        return self.n_cols * self.cell_size_m

    @property
    def height_m(self) -> float:
        return self.n_rows * self.cell_size_m

    def contains(self, c) -> bool:
        return 0 <= c[0] < self.n_cols and 0 <= c[1] < self.n_rows

    def check(self, c) -> CellId:
        if not self.contains(c):
            raise CellOutOfBounds(f"cell {tuple(c)} outside {self.n_cols}x{self.n_rows} grid")
        return CellId(int(c[0]), int(c[1]))

    def cells(self) -> Iterator[CellId]:
        """All cells, row-major from the south-west corner."""
        for row in range(self.n_rows):
            for col in range(self.n_cols):
                yield CellId(col, row)

    def bounds(self, c) -> tuple[float, float, float, float]:
        """Projected ``(xmin, ymin, xmax, ymax)`` of a cell."""
        s = self.cell_size_m
        x0 = self.origin.x + c[0] * s
        y0 = self.origin.y + c[1] * s
        return x0, y0, x0 + s, y0 + s

    def center(self, c) -> ProjectedPoint:
        s = self.cell_size_m
        return ProjectedPoint(self.origin.x + (c[0] + 0.5) * s, self.origin.y + (c[1] + 0.5) * s)

    def center_arrays(self):
        """Projected centers of all cells as ``(cols, rows, x, y)`` in row-major order."""
        rows, cols = np.divmod(np.arange(self.n_cells), self.n_cols)
        x = self.origin.x + (cols + 0.5) * self.cell_size_m
        y = self.origin.y + (rows + 0.5) * self.cell_size_m
        return cols, rows, x, y

    def project(self, p: GeoPoint) -> ProjectedPoint:
        return project(p, self.projection_origin)

    def unproject(self, q: ProjectedPoint) -> GeoPoint:
        return unproject(q, self.projection_origin)

    def to_dict(self) -> dict:
        sw = self.unproject(self.origin)
        return {
            "origin_lat": sw.lat,
            "origin_lon": sw.lon,
            "cell_size_m": self.cell_size_m,
            "n_cols": self.n_cols,
            "n_rows": self.n_rows,
            "projection_lat": self.projection_origin.lat,
            "projection_lon": self.projection_origin.lon,
            "origin_x": self.origin.x,
            "origin_y": self.origin.y,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        sw = GeoPoint(float(d["origin_lat"]), float(d["origin_lon"]))
        proj = GeoPoint(float(d.get("projection_lat", sw.lat)), float(d.get("projection_lon", sw.lon)))
        if "origin_x" in d and "origin_y" in d:
            origin = ProjectedPoint(float(d["origin_x"]), float(d["origin_y"]))
        else:
            origin = project(sw, proj)
        return cls(origin, float(d["cell_size_m"]), int(d["n_cols"]), int(d["n_rows"]), proj)


def _cells_needed(extent: float, cell_size: float) -> int:
    q = extent / cell_size
    r = round(q)
    if abs(q - r) < _SNAP * max(1.0, q):
        return max(1, int(r))
    return max(1, math.ceil(q))


def make_grid(bbox_min: GeoPoint, bbox_max: GeoPoint, cell_size_m: float = 1500.0) -> GridSpec:
    """Build the smallest grid of ``cell_size_m`` squares covering the bbox.

    The projection is centered on the bbox midpoint and the grid is anchored
    at the projected south-west corner.
    """
    if not cell_size_m > 0:
        raise InvalidInput(f"cell_size_m must be > 0, got {cell_size_m}")
    if not (bbox_min.lat < bbox_max.lat and bbox_min.lon < bbox_max.lon):
        raise DegenerateBBox(
            f"bbox_min {bbox_min} must lie strictly south-west of bbox_max {bbox_max}"
        )
    center = GeoPoint((bbox_min.lat + bbox_max.lat) / 2, (bbox_min.lon + bbox_max.lon) / 2)
    sw = project(bbox_min, center)
    ne = project(bbox_max, center)
    width = ne.x - sw.x
    height = ne.y - sw.y
    if width <= 0 or height <= 0:
        raise DegenerateBBox("bbox has zero projected area")
    return GridSpec(
        origin=sw,
        cell_size_m=float(cell_size_m),
        n_cols=_cells_needed(width, cell_size_m),
        n_rows=_cells_needed(height, cell_size_m),
        projection_origin=center,
    )


def _snap_floor(q: float) -> int:
    r = round(q)
    if abs(q - r) < _SNAP:
        return int(r)
    return math.floor(q)


def locate_xy(q: ProjectedPoint, grid: GridSpec) -> CellId | None:
    """Cell containing a projected point, or ``None`` when outside the grid."""
    col = _snap_floor((q.x - grid.origin.x) / grid.cell_size_m)
    row = _snap_floor((q.y - grid.origin.y) / grid.cell_size_m)
    if 0 <= col < grid.n_cols and 0 <= row < grid.n_rows:
        return CellId(col, row)
    return None


def locate(p: GeoPoint, grid: GridSpec) -> CellId | None:
    """Cell containing ``p``; ``None`` stands for *Outside*."""
    return locate_xy(grid.project(p), grid)


def locate_arrays(x, y, grid: GridSpec):
    """Vectorised :func:`locate_xy`. Returns ``(cols, rows, inside_mask)``."""
    qx = (np.asarray(x, dtype=float) - grid.origin.x) / grid.cell_size_m
    qy = (np.asarray(y, dtype=float) - grid.origin.y) / grid.cell_size_m
    rx, ry = np.round(qx), np.round(qy)
    qx = np.where(np.abs(qx - rx) < _SNAP, rx, qx)
    qy = np.where(np.abs(qy - ry) < _SNAP, ry, qy)
    cols = np.floor(qx).astype(np.int64)
    rows = np.floor(qy).astype(np.int64)
    inside = (cols >= 0) & (cols < grid.n_cols) & (rows >= 0) & (rows < grid.n_rows)
    return cols, rows, inside


def cell_polygon(c, grid: GridSpec) -> list[GeoPoint]:
    """Closed counter-clockwise ring (5 points) of a cell, in geographic coordinates."""
    c = grid.check(c)
    x0, y0, x1, y1 = grid.bounds(c)
    ring = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
    return [grid.unproject(ProjectedPoint(x, y)) for x, y in ring]


def segment_length_in_cell(a: ProjectedPoint, b: ProjectedPoint, c, grid: GridSpec) -> float:
    """Length in meters of the part of segment ``ab`` inside cell ``c``.

    Upper cell edges are exclusive, so a segment lying exactly on a shared
    edge is credited to one cell only.
    """
    x0, y0, x1, y1 = grid.bounds(c)
    return _kernels.segment_box_length(a.x, a.y, b.x, b.y, x0, y0, x1, y1)


def cells_along_segment(a: ProjectedPoint, b: ProjectedPoint, grid: GridSpec):
    """In-grid cells a segment may touch: a small superset, walked column by column."""
    s = grid.cell_size_m
    ax, ay = (a.x - grid.origin.x) / s, (a.y - grid.origin.y) / s
    bx, by = (b.x - grid.origin.x) / s, (b.y - grid.origin.y) / s
    if ax > bx:
        ax, ay, bx, by = bx, by, ax, ay
    eps = 1e-9
    c_lo = max(0, math.floor(ax - eps))
    c_hi = min(grid.n_cols - 1, math.floor(bx + eps))
    dx = bx - ax
    for col in range(c_lo, c_hi + 1):
        if dx > 0:
            t0 = min(max((col - ax) / dx, 0.0), 1.0)
            t1 = min(max((col + 1 - ax) / dx, 0.0), 1.0)
            ya, yb = ay + t0 * (by - ay), ay + t1 * (by - ay)
        else:
            ya, yb = ay, by
        r_lo = max(0, math.floor(min(ya, yb) - eps))
        r_hi = min(grid.n_rows - 1, math.floor(max(ya, yb) + eps))
        for row in range(r_lo, r_hi + 1):
            yield CellId(col, row)
