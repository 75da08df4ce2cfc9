"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--rows 3000] [--trees 100] [--repeat 3]

Each workload runs under both backends; the script reports the best wall
time of ``--repeat`` runs, the speedup, and whether both backends produced
the same result.
"""
import argparse
import time

import numpy as np

from specdemand import _kernels
from specdemand.geo import GeoPoint, make_grid
from specdemand.features import polygon_cell_overlaps
from specdemand.ml import fit_gbr


def gbr_fit(X, y, trees):
    model = fit_gbr(X, y, n_estimators=trees)
    return model.predict(X)


def tree_predict(model, X):
    return model.predict(X)


def polygon_overlaps(rings, grid):
    return [sum(a for _, a in polygon_cell_overlaps(xs, ys, grid)) for xs, ys in rings]


def segment_lengths(segs, boxes):
    f = _kernels.segment_box_length
    return [f(*s, *b) for s, b in zip(segs, boxes)]


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--rows", type=int, default=3000)
    ap.add_argument("--features", type=int, default=15)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--polygons", type=int, default=2000)
    ap.add_argument("--segments", type=int, default=100000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    X = rng.normal(size=(args.rows, args.features))
    y = np.sin(X[:, 0]) + X[:, 1] ** 2 + 0.3 * X[:, 2] + rng.normal(0, 0.1, args.rows)

    grid = make_grid(GeoPoint(45.0, -75.0), GeoPoint(45.4, -74.5), 1500.0)
    rings = []
    for _ in range(args.polygons):
        cx = rng.uniform(0, grid.width_m) + grid.origin.x
        cy = rng.uniform(0, grid.height_m) + grid.origin.y
        ang = np.sort(rng.uniform(0, 2 * np.pi, 6))
        r = rng.uniform(500, 3000, 6)
        rings.append((cx + r * np.cos(ang), cy + r * np.sin(ang)))

    segs = rng.uniform(0, 3000, (args.segments, 4)).tolist()
    boxes = [(1000.0, 1000.0, 2500.0, 2500.0)] * args.segments

    available = _kernels.available()
    if "cython" not in available:
        print("compiled backend not built; only the pure backend is available")
    results = {}
    for name in available:
        prev = _kernels.use(name)
        try:
            model = fit_gbr(X, y, n_estimators=args.trees)
            runs = {
                "gbr_fit": lambda: gbr_fit(X, y, args.trees),
                "tree_predict": lambda: tree_predict(model, X),
                "polygon_clip": lambda: polygon_overlaps(rings, grid),
                "segment_clip": lambda: segment_lengths(segs, boxes),
            }
            results[name] = {k: best_time(fn, args.repeat) for k, fn in runs.items()}
        finally:
            _kernels.use(prev)

    print(f"{'workload':<14} {'pure s':>9} {'cython s':>9} {'speedup':>8}  same")
    for work in results["pure"]:
        tp, op = results["pure"][work]
        if "cython" in results:
            tc, oc = results["cython"][work]
            same = np.allclose(np.asarray(op), np.asarray(oc), rtol=1e-9, atol=1e-9)
            print(f"{work:<14} {tp:9.4f} {tc:9.4f} {tp / tc:8.1f}  {same}")
        else:
            print(f"{work:<14} {tp:9.4f} {'-':>9} {'-':>8}  -")


if __name__ == "__main__":
    main()
