import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specdemand.errors import InvalidInput, OutOfValidityRange
from specdemand.geo import CellId, GeoPoint, ProjectedPoint
from specdemand.propagation import (SiteRecord, coverage_radius_km, footprint, footprints,
                                    path_loss_db)

from conftest import square_grid

# (f MHz, d km, h_b m, h_m m, env, dB) evaluated with 30-digit arithmetic
# from the closed-form expressions, independently of the library
HATA_TABLE = [
    (900, 1, 30, 1.5, "urban", 126.403286481),
    (900, 2, 30, 1.5, "urban", 137.007024664),
    (2000, 1, 30, 1.5, "urban", 140.744008413),
    (150, 0.01, 30, 1.5, "urban", 56.8746481866),
    (450, 5, 50, 1.5, "suburban", 130.785787723),
    (800, 10, 100, 2, "open", 120.384983491),
    (1500, 3, 30, 1, "urban", 150.390260964),
    (1800, 0.5, 40, 1.5, "urban", 127.112903647),
    (2600, 20, 200, 10, "urban", 146.03746611),
    (3000, 100, 30, 1, "open", 180.713435522),
    (1900, 2, 60, 3, "suburban", 126.371364217),
    (700, 0.04, 35, 1.5, "urban", 74.0034490852),
    (1200, 50, 150, 5, "suburban", 151.936484503),
    (2100, 8, 80, 2, "open", 127.586563128),
    (150, 100, 200, 10, "open", 116.303187405),
    (950, 0.3, 45, 1.2, "suburban", 97.4540030599),
    (2400, 1.5, 30, 1.5, "suburban", 133.750526118),
    (1700, 12, 120, 4, "urban", 156.661718804),
    (600, 25, 75, 7, "urban", 148.953736072),
    (2900, 0.2, 33, 1.8, "open", 82.4857707283),
]


def hata_oracle(f, d, hb, hm, env):
    """Straight transcription of the model, kept separate from the library."""
    d = max(d, 0.04)
    lg = math.log10
    a = (1.1 * lg(f) - 0.7) * hm - (1.56 * lg(f) - 0.8)
    if f <= 1500:
        loss = 69.55 + 26.16 * lg(f) - 13.82 * lg(hb) - a + (44.9 - 6.55 * lg(hb)) * lg(d)
    else:
        c = 3.0 if env == "urban" else 0.0
        loss = 46.3 + 33.9 * lg(f) - 13.82 * lg(hb) - a + (44.9 - 6.55 * lg(hb)) * lg(d) + c
    if env == "suburban":
        loss -= 2 * lg(f / 28) ** 2 + 5.4
    elif env == "open":
        loss -= 4.78 * lg(f) ** 2 - 18.33 * lg(f) + 40.94
    return loss


@pytest.mark.parametrize("f,d,hb,hm,env,want", HATA_TABLE)
def test_path_loss_table(f, d, hb, hm, env, want):
    assert path_loss_db(f, d, hb, hm, env) == pytest.approx(want, abs=0.01)
    assert hata_oracle(f, d, hb, hm, env) == pytest.approx(want, abs=1e-8)


def test_path_loss_examples():
    assert round(path_loss_db(900, 1, 30, 1.5, "urban"), 2) == 126.40
    assert round(path_loss_db(900, 2, 30, 1.5, "urban"), 2) == 137.01
    step = path_loss_db(900, 2, 30) - path_loss_db(900, 1, 30)
    assert step == pytest.approx((44.9 - 6.55 * math.log10(30)) * math.log10(2), abs=1e-12)
    assert round(step, 2) == 10.60
    lf = math.log10(2000)
    a = (1.1 * lf - 0.7) * 1.5 - (1.56 * lf - 0.8)
    assert 13.82 * math.log10(30) == pytest.approx(20.414, abs=1e-3)
    want = 46.3 + 33.9 * lf - 13.82 * math.log10(30) - a + 3.0
    assert path_loss_db(2000, 1, 30, 1.5, "urban") == pytest.approx(want, abs=1e-9)


def test_distance_clamp():
    assert path_loss_db(900, 0.001, 30) == path_loss_db(900, 0.04, 30)
    assert path_loss_db(900, 0.0, 30) == path_loss_db(900, 0.04, 30)


@pytest.mark.parametrize("args", [
    (100, 1, 30, 1.5), (3500, 1, 30, 1.5), (900, 1, 20, 1.5), (900, 1, 250, 1.5),
    (900, 1, 30, 0.5), (900, 1, 30, 12), (900, 150, 30, 1.5),
])
def test_out_of_validity_range(args):
    with pytest.raises(OutOfValidityRange):
        path_loss_db(*args)


def test_unknown_environment():
    with pytest.raises(InvalidInput):
        path_loss_db(900, 1, 30, 1.5, "rural")


valid = st.tuples(st.floats(150, 3000), st.floats(0.04, 99.0), st.floats(30, 200),
                  st.floats(1, 10), st.sampled_from(["urban", "suburban", "open"]))


@settings(max_examples=400, deadline=None)
@given(valid, st.floats(1.0001, 1.5))
def test_monotone_in_distance(p, k):
    f, d, hb, hm, env = p
    assert path_loss_db(f, min(d * k, 100), hb, hm, env) > path_loss_db(f, d, hb, hm, env)


@settings(max_examples=400, deadline=None)
@given(valid, st.floats(1.0001, 1.3))
def test_monotone_in_frequency_within_branch(p, k):
    f, d, hb, hm, env = p
    g = f * k
    if (f <= 1500) != (g <= 1500) or g > 3000:
        return
    assert path_loss_db(g, d, hb, hm, env) > path_loss_db(f, d, hb, hm, env)


def _site(tx=43.0, freq=900.0, h=30.0, env="urban", loc=GeoPoint(45.0, -75.0), bw=10.0, sid="s"):
    return SiteRecord(sid, loc, tx, h, freq, bw, env)


def test_site_record_problems():
    assert _site().problems() == []
    assert any("150-3000" in p for p in _site(freq=5000).problems())
    assert _site(bw=0).problems()
    assert _site(h=400).problems()
    assert _site(env="rural").problems()


def test_radius_inverts_one_km_loss():
    s = _site()
    thr = s.tx_power_dbm - path_loss_db(900, 1.0, 30, 1.5)
    assert coverage_radius_km(s, thr) == pytest.approx(1.0, abs=1e-3)


def test_radius_floor_and_ceiling():
    s = _site()
    assert coverage_radius_km(s, s.tx_power_dbm + 10) == 0.04
    assert coverage_radius_km(_site(tx=300.0), -95) == 100.0


def test_radius_meets_threshold():
    s = _site()
    r = coverage_radius_km(s, -95)
    assert s.tx_power_dbm - path_loss_db(900, r, 30) >= -95
    assert s.tx_power_dbm - path_loss_db(900, r + 1e-3, 30) < -95


@settings(max_examples=100, deadline=None)
@given(st.floats(-120, -60), st.floats(0.1, 20))
def test_radius_monotone_in_threshold(thr, delta):
    s = _site()
    assert coverage_radius_km(s, thr - delta) >= coverage_radius_km(s, thr)


def _site_at(grid, x, y, radius_km, **kw):
    loc = grid.unproject(ProjectedPoint(grid.origin.x + x, grid.origin.y + y))
    tx = -95 + path_loss_db(kw.get("freq", 900.0), radius_km, kw.get("h", 30.0))
    return _site(tx=tx, loc=loc, **kw)


def brute_force(site, grid, thr=-95.0):
    r = coverage_radius_km(site, thr) * 1000
    q = grid.project(site.location)
    out = []
    for c in grid.cells():
        ctr = grid.center(c)
        if math.hypot(ctr.x - q.x, ctr.y - q.y) <= r:
            out.append(c)
    return out


def test_footprint_single_cell():
    g = square_grid(5)
    s = _site_at(g, 2250, 2250, 0.5)
    assert footprint(s, g).cell_ids() == [CellId(1, 1)]


def test_footprint_far_outside_is_empty():
    g = square_grid(5)
    s = _site_at(g, -1500, -1500, 0.04)
    assert len(footprint(s, g)) == 0


def test_footprint_radius_2200_matches_enumeration():
    g = square_grid(9)
    s = _site_at(g, 6750, 6750, 2.2)
    fp = footprint(s, g)
    assert sorted(fp.cell_ids()) == sorted(brute_force(s, g))
    assert len(fp) == 9  # the 3x3 block; diagonal centers are 2.12 km away


def test_footprint_power_above_threshold():
    g = square_grid(20)
    s = _site_at(g, 15000, 14000, 5.0)
    fp = footprint(s, g)
    assert len({c for c, _ in fp.cells}) == len(fp)
    assert all(p >= -95 - 1e-9 for _, p in fp.cells)


@pytest.mark.parametrize("n", [10, 37, 100])
def test_footprint_equals_brute_force(n, rng):
    g = square_grid(n)
    for _ in range(4):
        x, y = rng.uniform(-3000, n * 1500 + 3000, 2)
        s = _site_at(g, x, y, float(rng.uniform(0.3, 12.0)))
        assert footprint(s, g).cell_ids() == brute_force(s, g)


def test_footprints_dict():
    g = square_grid(5)
    sites = [_site_at(g, 750, 750, 0.5, sid="a"), _site_at(g, 3750, 3750, 0.5, sid="b")]
    fps = footprints(sites, g)
    assert set(fps) == {"a", "b"}
    assert fps["b"].cell_ids() == [CellId(2, 2)]


def test_vectorised_monotonicity_sample():
    rng = np.random.default_rng(7)
    f = rng.uniform(150, 3000, 10_000)
    d = rng.uniform(0.04, 50, 10_000)
    hb = rng.uniform(30, 200, 10_000)
    hm = rng.uniform(1, 10, 10_000)
    env = rng.choice(["urban", "suburban", "open"], 10_000)
    for i in range(10_000):
        assert path_loss_db(f[i], d[i] * 1.5, hb[i], hm[i], env[i]) > \
            path_loss_db(f[i], d[i], hb[i], hm[i], env[i])
