# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; semantics mirror ``_pure`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()

cdef double GAIN_RTOL = 1e-10


cpdef double segment_box_length(double ax, double ay, double bx, double by,
                                double xmin, double ymin, double xmax, double ymax):
    cdef double dx = bx - ax, dy = by - ay
    cdef double t0 = 0.0, t1 = 1.0, r
    cdef double ps[4]
    cdef double qs[4]
    cdef int k
    ps[0] = -dx; qs[0] = ax - xmin
    ps[1] = dx;  qs[1] = xmax - ax
    ps[2] = -dy; qs[2] = ay - ymin
    ps[3] = dy;  qs[3] = ymax - ay
    for k in range(4):
        if ps[k] == 0.0:
            if qs[k] < 0.0 or ((k == 1 or k == 3) and qs[k] == 0.0):
                return 0.0
        else:
            r = qs[k] / ps[k]
            if ps[k] < 0.0:
                if r > t0:
                    t0 = r
            elif r < t1:
                t1 = r
    if t0 >= t1:
        return 0.0
    return (t1 - t0) * sqrt(dx * dx + dy * dy)


cdef inline bint _inside(double x, double y, int edge, double c) nogil:
    if edge == 0:
        return x >= c
    if edge == 1:
        return x <= c
    if edge == 2:
        return y >= c
    return y <= c


cdef int _clip(double[::1] ix, double[::1] iy, int n, double[::1] ox, double[::1] oy,
               int edge, double c) nogil:
    cdef int m = 0, k
    cdef double px, py, cx, cy, t
    cdef bint pin, cin
    if n == 0:
        return 0
    px = ix[n - 1]; py = iy[n - 1]
    pin = _inside(px, py, edge, c)
    for k in range(n):
        cx = ix[k]; cy = iy[k]
        cin = _inside(cx, cy, edge, c)
        if cin != pin:
            if edge < 2:
                t = (c - px) / (cx - px)
                ox[m] = c
                oy[m] = py + t * (cy - py)
            else:
                t = (c - py) / (cy - py)
                ox[m] = px + t * (cx - px)
                oy[m] = c
            m += 1
        if cin:
            ox[m] = cx; oy[m] = cy
            m += 1
        px = cx; py = cy; pin = cin
    return m


def polygon_box_area(xs, ys, double xmin, double ymin, double xmax, double ymax):
    cdef double[::1] ax = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[::1] ay = np.ascontiguousarray(ys, dtype=np.float64)
    cdef int n = ax.shape[0]
    cdef int cap = 2 * n + 8
    cdef double[::1] bx = np.empty(cap), by = np.empty(cap)
    cdef double[::1] cx = np.empty(cap), cy = np.empty(cap)
    cdef int m, k
    cdef double area = 0.0, px, py
    m = _clip(ax, ay, n, bx, by, 0, xmin)
    m = _clip(bx, by, m, cx, cy, 1, xmax)
    m = _clip(cx, cy, m, bx, by, 2, ymin)
    m = _clip(bx, by, m, cx, cy, 3, ymax)
    if m < 3:
        return 0.0
    px = cx[m - 1]; py = cy[m - 1]
    for k in range(m):
        area += px * cy[k] - cx[k] * py
        px = cx[k]; py = cy[k]
    return abs(area) * 0.5


cdef class Presort:
    """Presorted split search; node ranges are partitioned stably in place."""
    cdef double[:, ::1] X
    cdef double[::1] y
    cdef cnp.int64_t[::1] samples_v
    cdef cnp.int64_t[:, ::1] order
    cdef object order0
    cdef cnp.int64_t[::1] tmp
    cdef char[::1] flag
    cdef double[::1] yc
    cdef double[::1] gains
    cdef Py_ssize_t n, p
    cdef public object samples

    def __init__(self, X, y):
        Xa = np.ascontiguousarray(X, dtype=np.float64)
        self.X = Xa
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.n = Xa.shape[0]
        self.p = Xa.shape[1]
        self.samples = np.arange(self.n, dtype=np.int64)
        self.samples_v = self.samples
        order = np.empty((self.p, self.n), dtype=np.int64)
        for f in range(self.p):
            order[f] = np.argsort(Xa[:, f], kind="stable")
        self.order0 = order
        self.order = order.copy()
        self.tmp = np.empty(self.n, dtype=np.int64)
        self.flag = np.zeros(self.n, dtype=np.int8)
        self.yc = np.empty(self.n, dtype=np.float64)
        self.gains = np.empty(max(self.n, 1), dtype=np.float64)

    def reset(self, y):
        """New targets on the same rows; all samples return to the root node."""
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.samples = np.arange(self.n, dtype=np.int64)
        self.samples_v = self.samples
        self.order = self.order0.copy()

    cpdef double node_mean(self, Py_ssize_t start, Py_ssize_t end):
        cdef double total = 0.0
        cdef Py_ssize_t i
        for i in range(start, end):
            total += self.y[self.samples_v[i]]
        return total / (end - start)

    def node_indices(self, Py_ssize_t start, Py_ssize_t end):
        return self.samples[start:end].copy()

    def best_split(self, Py_ssize_t start, Py_ssize_t end, features, Py_ssize_t min_leaf):
        cdef Py_ssize_t n = end - start
        if n < 2 * min_leaf or n < 2:
            return None
        cdef cnp.int64_t[::1] feats = np.ascontiguousarray(features, dtype=np.int64)
        cdef Py_ssize_t nf = feats.shape[0]
        cdef double mean = self.node_mean(start, end)
        cdef double sse = 0.0, total = 0.0, v
        cdef Py_ssize_t i, k, f, s, s_next
        for i in range(start, end):
            s = self.samples_v[i]
            v = self.y[s] - mean
            self.yc[s] = v
        # same accumulation order as the fallback: ascending sample index
        for i in range(start, end):
            v = self.yc[self.samples_v[i]]
            sse += v * v
            total += v
        if sse <= 0.0:
            return None
        cdef double best = -INFINITY, tol = GAIN_RTOL * sse
        cdef double sl, sr, nl, nr, g, dn = <double> n
        cdef double base = total * total / dn
        # pass 1: global maximum gain
        for k in range(nf):
            f = feats[k]
            sl = 0.0
            for i in range(start, end - 1):
                s = self.order[f, i]
                s_next = self.order[f, i + 1]
                sl += self.yc[s]
                nl = <double> (i - start + 1)
                nr = dn - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                if not self.X[s, f] < self.X[s_next, f]:
                    continue
                sr = total - sl
                g = sl * sl / nl + sr * sr / nr - base
                if g > best:
                    best = g
        if not best > tol:
            return None
        # pass 2: first candidate within tolerance of the maximum
        cdef double a, b, thr
        for k in range(nf):
            f = feats[k]
            sl = 0.0
            for i in range(start, end - 1):
                s = self.order[f, i]
                s_next = self.order[f, i + 1]
                sl += self.yc[s]
                nl = <double> (i - start + 1)
                nr = dn - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                a = self.X[s, f]
                b = self.X[s_next, f]
                if not a < b:
                    continue
                sr = total - sl
                g = sl * sl / nl + sr * sr / nr - base
                if g >= best - tol:
                    thr = (a + b) / 2.0
                    if not thr < b:
                        thr = a
                    return int(f), float(thr), float(g)
        return None

    def partition(self, Py_ssize_t start, Py_ssize_t end, Py_ssize_t feature, double threshold):
        cdef Py_ssize_t i, f, s, m, nleft = 0
        for i in range(start, end):
            s = self.samples_v[i]
            if self.X[s, feature] <= threshold:
                self.flag[s] = 1
                nleft += 1
            else:
                self.flag[s] = 0
        self._stable(self.samples_v, start, end, nleft)
        for f in range(self.p):
            self._stable(self.order[f], start, end, nleft)
        return start + nleft

    cdef void _stable(self, cnp.int64_t[::1] arr, Py_ssize_t start, Py_ssize_t end,
                      Py_ssize_t nleft):
        cdef Py_ssize_t i, li = start, ri = 0, s
        for i in range(start, end):
            s = arr[i]
            if self.flag[s]:
                arr[li] = s
                li += 1
            else:
                self.tmp[ri] = s
                ri += 1
        for i in range(ri):
            arr[start + nleft + i] = self.tmp[i]


def predict_tree(feature, threshold, left, right, value, X):
    cdef cnp.int64_t[::1] fe = np.ascontiguousarray(feature, dtype=np.int64)
    cdef double[::1] th = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef cnp.int64_t[::1] le = np.ascontiguousarray(left, dtype=np.int64)
    cdef cnp.int64_t[::1] ri = np.ascontiguousarray(right, dtype=np.int64)
    cdef double[::1] va = np.ascontiguousarray(value, dtype=np.float64)
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], i, node
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    for i in range(n):
        node = 0
        while fe[node] >= 0:
            if Xv[i, fe[node]] <= th[node]:
                node = le[node]
            else:
                node = ri[node]
        ov[i] = va[node]
    return out
