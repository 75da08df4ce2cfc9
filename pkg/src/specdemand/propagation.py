"""Extended-Hata path loss and transmitter coverage footprints.

Normative formulas (f in MHz, d in km, heights in m)::

    a(hm)   = (1.1 log f - 0.7) hm - (1.56 log f - 0.8)
    f <= 1500:  L = 69.55 + 26.16 log f - 13.82 log hb - a(hm) + (44.9 - 6.55 log hb) log d
    f >  1500:  L = 46.3 + 33.9 log f - 13.82 log hb - a(hm) + (44.9 - 6.55 log hb) log d + C
                C = 3 dB (urban), 0 otherwise
    suburban:   L -= 2 (log(f/28))^2 + 5.4
    open:       L -= 4.78 (log f)^2 - 18.33 log f + 40.94

Distances below 40 m are clamped to 40 m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import InvalidInput, OutOfValidityRange
from .geo import CellId, GeoPoint, GridSpec

ENVIRONMENTS = ("urban", "suburban", "open")

MIN_DIST_KM = 0.04
MAX_DIST_KM = 100.0
FREQ_RANGE_MHZ = (150.0, 3000.0)
BASE_HEIGHT_RANGE_M = (30.0, 200.0)
MOBILE_HEIGHT_RANGE_M = (1.0, 10.0)

DEFAULT_RX_THRESHOLD_DBM = -95.0
DEFAULT_MOBILE_HEIGHT_M = 1.5


@dataclass(frozen=True)
class SiteRecord:
    site_id: str
    location: GeoPoint
    tx_power_dbm: float
    antenna_height_m: float
    center_freq_mhz: float
    bandwidth_mhz: float
    environment: str = "urban"

    def problems(self) -> list[str]:
        """Invariant violations, empty when the record is valid."""
        out = []
        lo, hi = FREQ_RANGE_MHZ
        if not lo <= self.center_freq_mhz <= hi:
            out.append(f"center_freq_mhz {self.center_freq_mhz} outside the 150-3000 MHz range")
        if not self.bandwidth_mhz > 0:
            out.append(f"bandwidth_mhz must be > 0, got {self.bandwidth_mhz}")
        if not 1.0 <= self.antenna_height_m <= 300.0:
            out.append(f"antenna_height_m {self.antenna_height_m} outside 1-300 m")
        if self.environment not in ENVIRONMENTS:
            out.append(f"environment {self.environment!r} not one of {', '.join(ENVIRONMENTS)}")
        if not math.isfinite(self.tx_power_dbm):
            out.append("tx_power_dbm must be finite")
        return out


@dataclass(frozen=True)
class CoverageFootprint:
    site_id: str
    cells: tuple[tuple[CellId, float], ...]

    def cell_ids(self) -> list[CellId]:
        return [c for c, _ in self.cells]

    def __len__(self):
        return len(self.cells)


def _check_ranges(freq_mhz, h_base_m, h_mobile_m, env):
    if env not in ENVIRONMENTS:
        raise InvalidInput(f"unknown environment {env!r}")
    if not FREQ_RANGE_MHZ[0] <= freq_mhz <= FREQ_RANGE_MHZ[1]:
        raise OutOfValidityRange(f"frequency {freq_mhz} MHz outside 150-3000 MHz")
    if not BASE_HEIGHT_RANGE_M[0] <= h_base_m <= BASE_HEIGHT_RANGE_M[1]:
        raise OutOfValidityRange(f"base station height {h_base_m} m outside 30-200 m")
    if not MOBILE_HEIGHT_RANGE_M[0] <= h_mobile_m <= MOBILE_HEIGHT_RANGE_M[1]:
        raise OutOfValidityRange(f"mobile height {h_mobile_m} m outside 1-10 m")


def _loss_at_1km(freq_mhz, h_base_m, h_mobile_m, env):
    lf = math.log10(freq_mhz)
    a_hm = (1.1 * lf - 0.7) * h_mobile_m - (1.56 * lf - 0.8)
    if freq_mhz <= 1500.0:
        loss = 69.55 + 26.16 * lf - 13.82 * math.log10(h_base_m) - a_hm
    else:
        loss = 46.3 + 33.9 * lf - 13.82 * math.log10(h_base_m) - a_hm
        if env == "urban":
            loss += 3.0
    if env == "suburban":
        loss -= 2.0 * math.log10(freq_mhz / 28.0) ** 2 + 5.4
    elif env == "open":
        loss -= 4.78 * lf * lf - 18.33 * lf + 40.94
    return loss


def _distance_slope(h_base_m):
    return 44.9 - 6.55 * math.log10(h_base_m)


def path_loss_db(freq_mhz: float, dist_km: float, h_base_m: float,
                 h_mobile_m: float = DEFAULT_MOBILE_HEIGHT_M, env: str = "urban") -> float:
    """Median path loss in dB.

    Raises
    ------
    OutOfValidityRange
        Frequency, heights or (clamped) distance outside the model's range.
    """
    _check_ranges(freq_mhz, h_base_m, h_mobile_m, env)
    if not dist_km <= MAX_DIST_KM:
        raise OutOfValidityRange(f"distance {dist_km} km beyond {MAX_DIST_KM} km")
    d = max(dist_km, MIN_DIST_KM)
    return _loss_at_1km(freq_mhz, h_base_m, h_mobile_m, env) + _distance_slope(h_base_m) * math.log10(d)


@lru_cache(maxsize=4096)
def _radius(tx_power_dbm, h_base_m, freq_mhz, env, rx_threshold_dbm, h_mobile_m):
    def ok(d):
        return tx_power_dbm - path_loss_db(freq_mhz, d, h_base_m, h_mobile_m, env) >= rx_threshold_dbm

    lo, hi = MIN_DIST_KM, MAX_DIST_KM
    if not ok(lo):
        return MIN_DIST_KM
    if ok(hi):
        return MAX_DIST_KM
    # invariant: ok(lo) and not ok(hi)
    while hi - lo > 1e-7:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def coverage_radius_km(site: SiteRecord, rx_threshold_dbm: float = DEFAULT_RX_THRESHOLD_DBM,
                       h_mobile_m: float = DEFAULT_MOBILE_HEIGHT_M) -> float:
    """Largest distance at which received power still meets the threshold.

    Bisection on [0.04, 100] km; the returned distance always satisfies the
    threshold except in the unreachable case, where the 0.04 km floor is
    returned.
    """
    return _radius(float(site.tx_power_dbm), float(site.antenna_height_m),
                   float(site.center_freq_mhz), site.environment,
                   float(rx_threshold_dbm), float(h_mobile_m))


def footprint(site: SiteRecord, grid: GridSpec,
              rx_threshold_dbm: float = DEFAULT_RX_THRESHOLD_DBM,
              h_mobile_m: float = DEFAULT_MOBILE_HEIGHT_M) -> CoverageFootprint:
    """In-grid cells whose centers lie within the coverage radius of ``site``.

    Cells are listed row-major with their received power at the center.
    """
    radius_m = coverage_radius_km(site, rx_threshold_dbm, h_mobile_m) * 1000.0
    q = grid.project(site.location)
    s = grid.cell_size_m
    # centers are at origin + (i + 0.5) s
    c_lo = max(0, math.ceil((q.x - radius_m - grid.origin.x) / s - 0.5) - 1)
    c_hi = min(grid.n_cols - 1, math.floor((q.x + radius_m - grid.origin.x) / s - 0.5) + 1)
    r_lo = max(0, math.ceil((q.y - radius_m - grid.origin.y) / s - 0.5) - 1)
    r_hi = min(grid.n_rows - 1, math.floor((q.y + radius_m - grid.origin.y) / s - 0.5) + 1)
    cells = []
    for row in range(r_lo, r_hi + 1):
        cy = grid.origin.y + (row + 0.5) * s
        for col in range(c_lo, c_hi + 1):
            cx = grid.origin.x + (col + 0.5) * s
            dist = math.hypot(cx - q.x, cy - q.y)
            if dist <= radius_m:
                loss = path_loss_db(site.center_freq_mhz, dist / 1000.0, site.antenna_height_m,
                                    h_mobile_m, site.environment)
                cells.append((CellId(col, row), site.tx_power_dbm - loss))
    return CoverageFootprint(site.site_id, tuple(cells))


def footprints(sites, grid: GridSpec, rx_threshold_dbm: float = DEFAULT_RX_THRESHOLD_DBM,
               h_mobile_m: float = DEFAULT_MOBILE_HEIGHT_M) -> dict[str, CoverageFootprint]:
    return {s.site_id: footprint(s, grid, rx_threshold_dbm, h_mobile_m) for s in sites}
