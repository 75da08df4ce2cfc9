"""Pure Python / numpy implementations of the kernels."""
import math

import numpy as np

# Candidates within this relative distance of the best gain are ties.
GAIN_RTOL = 1e-10


def segment_box_length(ax, ay, bx, by, xmin, ymin, xmax, ymax):
    """Liang-Barsky clip of segment ab to a half-open box; returns clipped length."""
    dx = bx - ax
    dy = by - ay
    t0, t1 = 0.0, 1.0
    checks = (
        (-dx, ax - xmin, False),
        (dx, xmax - ax, True),
        (-dy, ay - ymin, False),
        (dy, ymax - ay, True),
    )
    for p, q, upper in checks:
        if p == 0.0:
            if q < 0.0 or (upper and q == 0.0):
                return 0.0
        else:
            r = q / p
            if p < 0.0:
                if r > t0:
                    t0 = r
            elif r < t1:
                t1 = r
    if t0 >= t1:
        return 0.0
    return (t1 - t0) * math.hypot(dx, dy)


def _clip_edge(pts, inside, cross):
    out = []
    n = len(pts)
    if n == 0:
        return out
    prev = pts[-1]
    prev_in = inside(prev)
    for cur in pts:
        cur_in = inside(cur)
        if cur_in:
            if not prev_in:
                out.append(cross(prev, cur))
            out.append(cur)
        elif prev_in:
            out.append(cross(prev, cur))
        prev, prev_in = cur, cur_in
    return out


def _x_cross(xc):
    def cross(p, q):
        t = (xc - p[0]) / (q[0] - p[0])
        return (xc, p[1] + t * (q[1] - p[1]))
    return cross


def _y_cross(yc):
    def cross(p, q):
        t = (yc - p[1]) / (q[1] - p[1])
        return (p[0] + t * (q[0] - p[0]), yc)
    return cross


def polygon_box_area(xs, ys, xmin, ymin, xmax, ymax):
    """Area of a simple polygon clipped to a box (Sutherland-Hodgman + shoelace).

    ``xs``/``ys`` hold the ring vertices without the closing repeat.
    """
    pts = list(zip(map(float, xs), map(float, ys)))
    pts = _clip_edge(pts, lambda p: p[0] >= xmin, _x_cross(xmin))
    pts = _clip_edge(pts, lambda p: p[0] <= xmax, _x_cross(xmax))
    pts = _clip_edge(pts, lambda p: p[1] >= ymin, _y_cross(ymin))
    pts = _clip_edge(pts, lambda p: p[1] <= ymax, _y_cross(ymax))
    if len(pts) < 3:
        return 0.0
    area = 0.0
    px, py = pts[-1]
    for x, y in pts:
        area += px * y - x * py
        px, py = x, y
    return abs(area) * 0.5


class Presort:
    """Split search over a node-partitioned sample index.

    Nodes are contiguous ranges ``[start, end)`` of :attr:`samples`.  Samples
    inside a node stay in ascending original order.
    """

    def __init__(self, X, y):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.samples = np.arange(self.X.shape[0], dtype=np.int64)

    def reset(self, y):
        """New targets on the same rows; all samples return to the root node."""
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.samples = np.arange(self.X.shape[0], dtype=np.int64)

    def node_mean(self, start, end):
        total = 0.0
        for v in self.y[self.samples[start:end]].tolist():
            total += v
        return total / (end - start)

    def node_indices(self, start, end):
        return self.samples[start:end].copy()

    def best_split(self, start, end, features, min_leaf):
        """Best variance-reduction split of a node.

        Returns ``(feature, threshold, gain)`` or ``None`` when no split has
        positive gain.  Ties (relative ``GAIN_RTOL``) resolve to the lowest
        feature in ``features`` order, then the lowest threshold.
        """
        n = end - start
        if n < 2 * min_leaf or n < 2:
            return None
        idx = self.samples[start:end]
        yc = self.y[idx] - self.node_mean(start, end)
        sse = float(np.dot(yc, yc))
        if sse <= 0.0:
            return None
        total = float(yc.sum())
        nl = np.arange(1, n, dtype=np.float64)
        nr = n - nl
        size_ok = (nl >= min_leaf) & (nr >= min_leaf)
        per_feature = []
        best = -np.inf
        for f in features:
            xs = self.X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs_s = xs[order]
            sl = np.cumsum(yc[order])[:-1]
            sr = total - sl
            gain = sl * sl / nl + sr * sr / nr - total * total / n
            valid = size_ok & (xs_s[:-1] < xs_s[1:])
            gain = np.where(valid, gain, -np.inf)
            per_feature.append((f, xs_s, gain))
            if valid.any():
                best = max(best, float(gain.max()))
        tol = GAIN_RTOL * sse
        if not best > tol:
            return None
        for f, xs_s, gain in per_feature:
            hits = np.flatnonzero(gain >= best - tol)
            if hits.size:
                i = int(hits[0])
                a, b = xs_s[i], xs_s[i + 1]
                thr = (a + b) / 2.0
                if not thr < b:
                    thr = a
                return int(f), float(thr), float(gain[i])
        return None

    def partition(self, start, end, feature, threshold):
        """Stable partition of a node on ``x[feature] <= threshold``; returns the split point."""
        idx = self.samples[start:end]
        go_left = self.X[idx, feature] <= threshold
        left = idx[go_left]
        self.samples[start:end] = np.concatenate([left, idx[~go_left]])
        return start + left.size


def predict_tree(feature, threshold, left, right, value, X):
    """Route every row of ``X`` through a flattened tree and return leaf values."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        f = feature[node]
        active = np.flatnonzero(f >= 0)
        if active.size == 0:
            break
        nd = node[active]
        go_left = X[rows[active], f[active]] <= threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
    return value[node]
