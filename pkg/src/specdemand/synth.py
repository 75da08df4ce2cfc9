"""Synthetic cities with a planted demand law.

Every layer is a noisy monotone transform of one latent activity surface
(a sum of seeded Gaussian bumps) mixed with an independent smooth field of
its own, so the layers are correlated the way real urban indicators are.

The proxy target obeys

    T = intercept + sum_i beta_i * phi_i(f_i / s_i) + eps,
    Var(eps) = Var(signal) * (1 - feature_rho) / feature_rho

where ``f_i`` is the rasterized value of layer ``i`` and ``phi_i`` one of
:data:`TRANSFORMS`.  Site bandwidths are then chosen so the deployed,
NTL-weighted bandwidth reproduces ``T`` exactly.  The indicator is

    I = a * T + e + shift,   Var(e) = Var(a * T) * (1 - rho_target) / rho_target

with ``e`` orthogonalised against ``[1, T]``, so regressing ``I`` on ``T``
gives R^2 = rho_target up to rounding.  Per-site traffic and crowdsourced
samples are drawn so that the weighted aggregate reproduces ``I``.
"""
from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import ingest
from .demand import ntl_weight_series
from .errors import InvalidInput
from .features import rasterize
from .geo import (GeoPoint, GridSpec, ProjectedPoint, make_grid, project_arrays, unproject,
                  unproject_arrays)
from .ingest import FeatureSource, MeasurementRecord, RasterGrid, TrafficRecord
from .propagation import SiteRecord, footprint, path_loss_db

TRANSFORMS = {
    "identity": lambda x: x,
    "sqrt": np.sqrt,
    "log1p": np.log1p,
    "saturate": lambda x: 1.0 - np.exp(-x),
    "hinge": lambda x: np.maximum(x - 1.0, 0.0),
}

# (freq MHz, antenna height m) pairs small cells and macro sites are drawn from
SMALL_CONFIGS = ((700.0, 30.0), (850.0, 30.0), (1900.0, 35.0), (2100.0, 30.0), (2600.0, 40.0))
MACRO_CONFIGS = ((700.0, 45.0), (850.0, 50.0), (1900.0, 45.0))

SMALL_RADIUS_KM = 0.5
MACRO_RADIUS_KM = 2.4
SITE_JITTER_M = 300.0
DATE = "2024-03-12"


@dataclass(frozen=True)
class Layer:
    name: str
    kind: str            # point | line | polygon_value
    allocation: str | None
    geography: str | None  # polygon lattice id
    mix: float           # weight of the shared latent surface
    scale: float         # intensity at z = 1 (per cell, or per km2 for polygons)
    noise: float         # lognormal sigma of per-unit noise
    offset: float = 0.0  # intensive layers: value at z = 0


LAYERS = (
    Layer("roads_m", "line", None, None, 0.45, 9000.0, 0.25),
    Layer("cycle_paths_m", "line", None, None, 0.30, 2500.0, 0.40),
    Layer("transit_hubs", "point", None, None, 0.55, 7.0, 0.0),
    Layer("poi", "point", None, None, 0.40, 45.0, 0.0),
    Layer("buildings", "point", None, None, 0.50, 60.0, 0.0),
    Layer("nonres_buildings", "point", None, None, 0.35, 18.0, 0.0),
    Layer("daytime_pop", "polygon_value", "extensive", "dpa", 0.50, 3500.0, 0.30),
    Layer("industry_jobs", "polygon_value", "extensive", "csd", 0.35, 400.0, 0.35),
    Layer("night_pop", "polygon_value", "extensive", "da", 0.30, 2500.0, 0.30),
    Layer("households", "polygon_value", "extensive", "da", 0.30, 1000.0, 0.30),
    Layer("median_income", "polygon_value", "intensive", "da", 0.20, 70000.0, 0.15, 40000.0),
    Layer("pct_university", "polygon_value", "intensive", "da", 0.20, 40.0, 0.15, 15.0),
    Layer("median_age", "polygon_value", "intensive", "da", 0.10, -12.0, 0.05, 48.0),
    Layer("commute_km", "polygon_value", "intensive", "da", 0.10, -10.0, 0.15, 22.0),
    Layer("employment_rate", "polygon_value", "intensive", "da", 0.15, 20.0, 0.05, 55.0),
)
LAYER_NAMES = tuple(l.name for l in LAYERS)

GEOGRAPHY_SPACING_M = {"da": 2000.0, "dpa": 2700.0, "csd": 3600.0}


@dataclass(frozen=True)
class LawTerm:
    feature: str
    beta: float
    transform: str
    scale: float


DEFAULT_LAW = (
    LawTerm("roads_m", 22.0, "saturate", 2500.0),
    LawTerm("daytime_pop", 8.0, "sqrt", 2000.0),
    LawTerm("transit_hubs", 3.0, "identity", 1.0),
    LawTerm("poi", 8.0, "hinge", 8.0),
    LawTerm("industry_jobs", 6.0, "log1p", 100.0),
)


@dataclass(frozen=True)
class CitySpec:
    seed: int = 0
    extent_km: float = 90.0
    cell_size_m: float = 1500.0
    center_lat: float = 45.42
    center_lon: float = -75.69
    n_sites: int | None = None        # small cells; default 1.5 per grid cell
    n_macro: int | None = None        # overlapping macro sites; default 1 per 40 cells
    n_hub_clusters: int = 7
    law: tuple = DEFAULT_LAW
    intercept: float = 8.0
    feature_rho: float = 0.92         # R^2 of the planted law on its own features
    rho_target: float = 0.763         # R^2 of indicator on proxy
    indicator_slope: float = 2.0      # Mbps per unit of proxy
    hours: int = 24
    pixels_per_cell: int = 3
    rx_threshold_dbm: float = -95.0
    mobile_height_m: float = 1.5

    def __post_init__(self):
        if not 0.0 < self.rho_target <= 1.0:
            raise InvalidInput(f"rho_target must lie in (0, 1], got {self.rho_target}")
        if not 0.0 < self.feature_rho <= 1.0:
            raise InvalidInput(f"feature_rho must lie in (0, 1], got {self.feature_rho}")
        if self.extent_km * 1000.0 / self.cell_size_m < 10 - 1e-9:
            raise InvalidInput("extent must span at least 10 cells per side")
        names = [t.feature for t in self.law]
        for t in self.law:
            if t.feature not in LAYER_NAMES:
                raise InvalidInput(f"law term on unknown layer {t.feature!r}")
            if t.transform not in TRANSFORMS:
                raise InvalidInput(f"unknown transform {t.transform!r}")
        if len(set(names)) != len(names):
            raise InvalidInput("law terms must name distinct layers")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["law"] = [asdict(t) for t in self.law]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CitySpec":
        d = dict(d)
        if "law" in d:
            d["law"] = tuple(LawTerm(**t) for t in d["law"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInput(f"unknown city spec fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SynthCity:
    root: Path
    grid: GridSpec
    truth: dict
    paths: dict = field(default_factory=dict)


def city_grid(spec: CitySpec) -> GridSpec:
    """The square grid of ``extent_km`` centered on the city center."""
    c = GeoPoint(spec.center_lat, spec.center_lon)
    half = spec.extent_km * 500.0
    return make_grid(unproject(ProjectedPoint(-half, -half), c),
                     unproject(ProjectedPoint(half, half), c), spec.cell_size_m)


def apply_law(spec: CitySpec, columns: dict) -> np.ndarray:
    """Noiseless planted signal (without intercept) from raw layer values."""
    out = 0.0
    for t in spec.law:
        out = out + t.beta * TRANSFORMS[t.transform](np.asarray(columns[t.feature]) / t.scale)
    return np.asarray(out, dtype=float)


def law_design(spec: CitySpec, columns: dict) -> np.ndarray:
    """Transformed regressors, one column per law term."""
    return np.column_stack([TRANSFORMS[t.transform](np.asarray(columns[t.feature]) / t.scale)
                            for t in spec.law])


# ---------------------------------------------------------------- fields

class BumpField:
    """Sum of isotropic Gaussian bumps, max-normalised over the grid extent."""

    def __init__(self, rng, n, width, height, sigma=(3000.0, 11000.0), margin=0.1):
        self.cx = rng.uniform(margin * width, (1 - margin) * width, n)
        self.cy = rng.uniform(margin * height, (1 - margin) * height, n)
        self.amp = rng.uniform(0.4, 1.0, n)
        self.sigma = rng.uniform(sigma[0], sigma[1], n)
        gx, gy = np.meshgrid(np.linspace(0, width, 61), np.linspace(0, height, 61))
        self.peak = float(self._raw(gx.ravel(), gy.ravel()).max())

    def _raw(self, x, y):
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        d2 = (x - self.cx) ** 2 + (y - self.cy) ** 2
        return (self.amp * np.exp(-0.5 * d2 / self.sigma ** 2)).sum(axis=-1)

    def __call__(self, x, y):
        return np.minimum(self._raw(x, y) / self.peak, 1.0)


def _stage_seeds(seed: int) -> dict:
    names = ("latent", "layers", "geometry", "law", "ntl", "sites", "indicator", "traffic")
    st = np.random.SeedSequence(seed).generate_state(len(names))
    return {n: int(s) for n, s in zip(names, st)}


# ---------------------------------------------------------------- geometry

def _lattice_polygons(rng, spacing, width, height):
    """Jittered quad lattice tiling ``[0, width] x [0, height]`` exactly."""
    nx = max(1, round(width / spacing))
    ny = max(1, round(height / spacing))
    dx, dy = width / nx, height / ny
    gx, gy = np.meshgrid(np.arange(nx + 1) * dx, np.arange(ny + 1) * dy)
    jx = rng.uniform(-0.25, 0.25, gx.shape) * dx
    jy = rng.uniform(-0.25, 0.25, gy.shape) * dy
    jx[:, [0, -1]] = 0.0
    jy[[0, -1], :] = 0.0
    vx, vy = gx + jx, gy + jy
    rings = []
    for j in range(ny):
        for i in range(nx):
            idx = ((j, i), (j, i + 1), (j + 1, i + 1), (j + 1, i))
            rings.append((np.array([vx[k] for k in idx]), np.array([vy[k] for k in idx])))
    return rings


def _to_lonlat(xs, ys, grid):
    lat, lon = unproject_arrays(np.asarray(xs) + grid.origin.x, np.asarray(ys) + grid.origin.y,
                                grid.projection_origin)
    return [(float(a), float(b)) for a, b in zip(lon.tolist(), lat.tolist())]


def _layer_source(layer, z_fn, rng, grid, lattices):
    """Geometry and values for one layer; ``z_fn(x, y)`` is its intensity in [0, 1]."""
    s = grid.cell_size_m
    cols, rows, cx, cy = grid.center_arrays()
    lx, ly = cx - grid.origin.x, cy - grid.origin.y
    if layer.kind == "point":
        lam = layer.scale * z_fn(lx, ly) ** 1.5
        counts = rng.poisson(lam)
        n = int(counts.sum())
        x0 = np.repeat(cols * s, counts)
        y0 = np.repeat(rows * s, counts)
        xs = x0 + rng.uniform(0.001, 0.999, n) * s
        ys = y0 + rng.uniform(0.001, 0.999, n) * s
        return FeatureSource("point", layer.name, tuple(_to_lonlat(xs, ys, grid)))
    if layer.kind == "line":
        target = layer.scale * z_fn(lx, ly) * rng.lognormal(0.0, layer.noise, lx.size)
        lines = []
        inset = 1.0
        for col, row, want in zip(cols.tolist(), rows.tolist(), target.tolist()):
            x0, y0 = col * s + inset, row * s + inset
            span = s - 2 * inset
            done = 0.0
            while want - done > 1.0:
                pts = [(x0 + rng.uniform() * span, y0 + rng.uniform() * span)]
                for _ in range(int(rng.integers(1, 4))):
                    nx_, ny_ = x0 + rng.uniform() * span, y0 + rng.uniform() * span
                    px, py = pts[-1]
                    seg = math.hypot(nx_ - px, ny_ - py)
                    left = want - done
                    if seg >= left:
                        f = left / seg
                        pts.append((px + f * (nx_ - px), py + f * (ny_ - py)))
                        done = want
                        break
                    pts.append((nx_, ny_))
                    done += seg
                xs, ys = zip(*pts)
                lines.append(tuple(_to_lonlat(xs, ys, grid)))
        return FeatureSource("line", layer.name, tuple(lines))
    rings = lattices[layer.geography]
    geoms, values = [], []
    for xs, ys in rings:
        area = 0.5 * abs(float(np.dot(xs, np.roll(ys, -1)) - np.dot(np.roll(xs, -1), ys)))
        z = float(z_fn(xs.mean(), ys.mean()))
        eta = float(rng.lognormal(0.0, layer.noise))
        if layer.allocation == "extensive":
            v = layer.scale * z * eta * area / 1e6
        else:
            v = layer.offset + layer.scale * z * eta
        geoms.append(tuple(_to_lonlat(xs, ys, grid)))
        values.append(v)
    return FeatureSource("polygon_value", layer.name, tuple(geoms), tuple(values), layer.allocation)


def _ntl_raster(spec, grid, latent, rng):
    """Night-light raster covering the grid, about ``pixels_per_cell`` pixels per cell side."""
    sw = grid.unproject(grid.origin)
    ne = grid.unproject(ProjectedPoint(grid.origin.x + grid.width_m, grid.origin.y + grid.height_m))
    deg = (ne.lat - sw.lat) / (grid.n_rows * spec.pixels_per_cell)
    n_rows = grid.n_rows * spec.pixels_per_cell
    n_cols = int(math.ceil((ne.lon - sw.lon) / deg))
    rr, cc = np.mgrid[0:n_rows, 0:n_cols]
    lat = sw.lat + (rr + 0.5) * deg
    lon = sw.lon + (cc + 0.5) * deg
    x, y = project_arrays(lat.ravel(), lon.ravel(), grid.projection_origin)
    a = latent(x - grid.origin.x, y - grid.origin.y)
    lum = 60.0 * (0.1 + a) ** 1.2 * rng.lognormal(0.0, 0.2, a.size)
    vals = np.round(lum, 3).reshape(n_rows, n_cols)
    return RasterGrid(sw, deg, n_cols, n_rows, vals)


# ---------------------------------------------------------------- generation

def _site(site_id, x, y, grid, freq, height, radius_km, bw, spec):
    loc = grid.unproject(ProjectedPoint(x, y))
    tx = spec.rx_threshold_dbm + path_loss_db(freq, radius_km, height, spec.mobile_height_m, "urban")
    return SiteRecord(site_id, loc, round(tx, 6), height, freq, bw, "urban")


def _orthogonal_noise(rng, t, var):
    e = rng.standard_normal(t.size)
    basis = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(basis, e, rcond=None)
    e = e - basis @ coef
    sd = float(np.sqrt(np.mean(e * e)))
    return e * (math.sqrt(var) / sd) if sd > 0 and var > 0 else np.zeros_like(t)


def generate(spec: CitySpec, out_dir) -> SynthCity:
    """Write a full synthetic dataset into ``out_dir`` and return its ground truth.

    Files: ``sites.csv``, ``traffic.csv``, ``measurements.csv``, ``ntl.asc``,
    ``features/<layer>.geojson``, ``grid.json`` and ``truth.json``.
    """
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    seeds = _stage_seeds(spec.seed)
    grid = city_grid(spec)
    W, H = grid.width_m, grid.height_m
    s = grid.cell_size_m
    n = grid.n_cells
    cols, rows, cx, cy = grid.center_arrays()
    lx, ly = cx - grid.origin.x, cy - grid.origin.y

    latent = BumpField(np.random.default_rng(seeds["latent"]), spec.n_hub_clusters, W, H)
    rng_layers = np.random.default_rng(seeds["layers"])
    rng_geom = np.random.default_rng(seeds["geometry"])
    lattices = {g: _lattice_polygons(rng_geom, d, W, H) for g, d in GEOGRAPHY_SPACING_M.items()}

    paths = {"features": {}}
    columns = {}
    for layer in LAYERS:
        own = BumpField(rng_layers, 6, W, H, sigma=(2500.0, 9000.0), margin=0.0)
        mix = layer.mix

        def z_fn(x, y, own=own, mix=mix):
            return mix * latent(x, y) + (1.0 - mix) * own(x, y)

        src = _layer_source(layer, z_fn, rng_geom, grid, lattices)
        p = out / "features" / f"{layer.name}.geojson"
        ingest.write_feature_source(p, src)
        paths["features"][layer.name] = str(p)
        # rasterize what was written, so the law sees exactly what the pipeline will
        col = rasterize(ingest.parse_feature_source(p), grid)
        columns[layer.name] = col.to_array().ravel()

    # planted law on the proxy
    rng_law = np.random.default_rng(seeds["law"])
    signal = apply_law(spec, columns)
    law_var = float(np.var(signal)) * (1.0 - spec.feature_rho) / spec.feature_rho
    eps = rng_law.normal(0.0, math.sqrt(law_var), n) if law_var > 0 else np.zeros(n)
    floor = 0.05 * spec.intercept
    raw_t = spec.intercept + signal + eps
    n_clipped = int((raw_t < floor).sum())
    T = np.maximum(raw_t, floor)

    raster = _ntl_raster(spec, grid, latent, np.random.default_rng(seeds["ntl"]))
    ingest.write_raster(out / "ntl.asc", raster)
    raster = ingest.parse_raster(out / "ntl.asc")
    w_ntl = ntl_weight_series(raster, grid).to_array().ravel()

    # sites: every cell gets at least one single-cell small site, plus macros
    rng_s = np.random.default_rng(seeds["sites"])
    a_cell = latent(lx, ly)
    n_small = spec.n_sites if spec.n_sites is not None else int(round(1.5 * n))
    if n_small < n:
        raise InvalidInput(f"n_sites must be >= number of cells ({n})")
    per_cell = 1 + rng_s.multinomial(n_small - n, a_cell / a_cell.sum())
    n_macro = spec.n_macro if spec.n_macro is not None else n // 40
    need_bw = T / w_ntl

    macros, macro_fps = [], []
    if n_macro:
        hot = rng_s.choice(n, n_macro, replace=False, p=a_cell / a_cell.sum())
        for k, c in enumerate(sorted(hot.tolist())):
            freq, height = MACRO_CONFIGS[int(rng_s.integers(len(MACRO_CONFIGS)))]
            x = cx[c] + rng_s.uniform(-0.5, 0.5) * s
            y = cy[c] + rng_s.uniform(-0.5, 0.5) * s
            site = _site(f"M{k:05d}", x, y, grid, freq, height, MACRO_RADIUS_KM, 1.0, spec)
            fp = footprint(site, grid, spec.rx_threshold_dbm, spec.mobile_height_m)
            macros.append(site)
            macro_fps.append(np.array([cc.row * grid.n_cols + cc.col for cc, _ in fp.cells], dtype=int))
    cover = np.zeros(n)
    for idx in macro_fps:
        cover[idx] += 1
    macro_bw = np.zeros(n)
    for k, (site, idx) in enumerate(zip(macros, macro_fps)):
        bw = min(20.0, 0.5 * float((need_bw[idx] / cover[idx]).min())) if idx.size else 5.0
        macros[k] = replace(site, bandwidth_mhz=bw)
        macro_bw[idx] += bw
    small_bw = need_bw - macro_bw

    small, small_cell = [], []
    for c in range(n):
        k = int(per_cell[c])
        shares = rng_s.dirichlet(np.full(k, 2.0)) if k > 1 else np.ones(1)
        for j in range(k):
            freq, height = SMALL_CONFIGS[int(rng_s.integers(len(SMALL_CONFIGS)))]
            x = cx[c] + rng_s.uniform(-SITE_JITTER_M, SITE_JITTER_M)
            y = cy[c] + rng_s.uniform(-SITE_JITTER_M, SITE_JITTER_M)
            small.append(_site(f"S{c:05d}{j:02d}", x, y, grid, freq, height, SMALL_RADIUS_KM,
                               float(small_bw[c] * shares[j]), spec))
            small_cell.append(c)
    sites = macros + small
    ingest.write_sites(out / "sites.csv", sites)

    # indicator target, then user weights and per-site traffic that reproduce it
    rng_i = np.random.default_rng(seeds["indicator"])
    base = spec.indicator_slope * T
    noise_var = float(np.var(base)) * (1.0 - spec.rho_target) / spec.rho_target
    e = _orthogonal_noise(rng_i, T, noise_var)
    ind = base + e
    lo = 0.05 * float(base.mean())
    shift = max(0.0, lo - float(ind.min()))
    ind = ind + shift

    m_counts = 1 + rng_i.poisson(6.0 * a_cell)
    meas = []
    samples_per_cell = np.zeros(n)
    for c in range(n):
        for _ in range(int(m_counts[c])):
            x = cx[c] + rng_i.uniform(-0.49, 0.49) * s
            y = cy[c] + rng_i.uniform(-0.49, 0.49) * s
            k = 1 + int(rng_i.poisson(25.0 * a_cell[c]))
            meas.append(MeasurementRecord(grid.unproject(ProjectedPoint(x, y)), k))
            samples_per_cell[c] += k
    ingest.write_measurements(out / "measurements.csv", meas)
    u = samples_per_cell / samples_per_cell.max()
    need_thr = ind / u

    macro_thr = np.zeros(n)
    thr = {}
    for site, idx in zip(macros, macro_fps):
        v = 0.5 * float((need_thr[idx] / cover[idx]).min()) if idx.size else 1.0
        thr[site.site_id] = v
        macro_thr[idx] += v
    small_thr = need_thr - macro_thr
    by_cell = {}
    for site, c in zip(small, small_cell):
        by_cell.setdefault(c, []).append(site)
    for c, group in by_cell.items():
        shares = rng_i.dirichlet(np.full(len(group), 2.0)) if len(group) > 1 else np.ones(1)
        for site, sh in zip(group, shares):
            thr[site.site_id] = float(small_thr[c] * sh)

    rows_out = []
    day = dt.date.fromisoformat(DATE)
    for site in sites:
        band = f"B{int(site.center_freq_mhz)}"
        for h in range(spec.hours):
            rows_out.append(TrafficRecord(site.site_id, day, h, thr[site.site_id], band))
    ingest.write_traffic(out / "traffic.csv", rows_out)

    (out / "grid.json").write_text(json.dumps(grid.to_dict(), indent=2, sort_keys=True) + "\n",
                                   encoding="utf-8")
    truth = {
        "schema": 1,
        "spec": spec.to_dict(),
        "seed": spec.seed,
        "noise_seeds": {"law": seeds["law"], "indicator": seeds["indicator"]},
        "stage_seeds": seeds,
        "law": {
            "intercept": spec.intercept,
            "terms": [asdict(t) for t in spec.law],
            "feature_rho": spec.feature_rho,
            "noise_sd": math.sqrt(law_var),
            "n_clipped": n_clipped,
            "floor": floor,
        },
        "indicator": {
            "rho_target": spec.rho_target,
            "slope": spec.indicator_slope,
            "noise_sd": math.sqrt(noise_var),
            "shift": shift,
        },
        "relevant": [t.feature for t in spec.law],
        "layers": list(LAYER_NAMES),
        "n_sites": len(sites),
        "n_macro": len(macros),
        "grid": grid.to_dict(),
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8")
    paths.update({k: str(out / f) for k, f in (
        ("sites", "sites.csv"), ("traffic", "traffic.csv"), ("measurements", "measurements.csv"),
        ("ntl", "ntl.asc"), ("grid", "grid.json"), ("truth", "truth.json"))})
    return SynthCity(out, grid, truth, paths)


def twin_cities(spec: CitySpec, seed_a: int, seed_b: int, out_a, out_b,
                center_b: tuple[float, float] | None = None) -> tuple[SynthCity, SynthCity]:
    """Two cities sharing the planted law, differing in every random draw."""
    a = generate(replace(spec, seed=seed_a), out_a)
    spec_b = replace(spec, seed=seed_b)
    if center_b is not None:
        spec_b = replace(spec_b, center_lat=center_b[0], center_lon=center_b[1])
    return a, generate(spec_b, out_b)


def load_truth(path) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "truth.json"
    return json.loads(p.read_text(encoding="utf-8"))
