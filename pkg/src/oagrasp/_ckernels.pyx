# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``.

Rectangles are rows of (x, y, w, h, theta_deg). Polygon buffers are fixed
size: clipping a convex n-gon by a convex m-gon yields at most n + m vertices.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, ceil, floor, M_PI

cnp.import_array()

cdef enum:
    MAXV = 64


cdef inline void _corners(double x, double y, double w, double h, double theta,
                          double* px, double* py) noexcept nogil:
    cdef double t = theta * (M_PI / 180.0)
    cdef double c = cos(t), s = sin(t)
    cdef double hw = 0.5 * w, hh = 0.5 * h
    px[0] = x - hw * c + hh * s; py[0] = y - hw * s - hh * c
    px[1] = x + hw * c + hh * s; py[1] = y + hw * s - hh * c
    px[2] = x + hw * c - hh * s; py[2] = y + hw * s + hh * c
    px[3] = x - hw * c - hh * s; py[3] = y - hw * s + hh * c


cdef inline double _signed_area(double* px, double* py, int n) noexcept nogil:
    cdef double acc = 0.0
    cdef int i, j
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        acc += px[i] * py[j] - px[j] * py[i]
    return 0.5 * acc


cdef int _clip(double* sx, double* sy, int ns, double* cx, double* cy, int nc,
               double* ox, double* oy) noexcept nogil:
    """Clip subject by clipper (both CCW); writes result into ox/oy."""
    cdef double bufx[MAXV]
    cdef double bufy[MAXV]
    cdef double ax, ay, bx, by, ex, ey, ppx, ppy, qx, qy, pside, qside, r
    cdef int i, j, n_in, n_out
    n_out = ns
    for i in range(ns):
        ox[i] = sx[i]; oy[i] = sy[i]
    for i in range(nc):
        if n_out == 0:
            break
        ax = cx[i]; ay = cy[i]
        j = i + 1
        if j == nc:
            j = 0
        bx = cx[j]; by = cy[j]
        ex = bx - ax; ey = by - ay
        n_in = n_out
        for j in range(n_in):
            bufx[j] = ox[j]; bufy[j] = oy[j]
        n_out = 0
        ppx = bufx[n_in - 1]; ppy = bufy[n_in - 1]
        pside = ex * (ppy - ay) - ey * (ppx - ax)
        for j in range(n_in):
            qx = bufx[j]; qy = bufy[j]
            qside = ex * (qy - ay) - ey * (qx - ax)
            if qside >= 0.0:
                if pside < 0.0:
                    r = pside / (pside - qside)
                    ox[n_out] = ppx + r * (qx - ppx); oy[n_out] = ppy + r * (qy - ppy)
                    n_out += 1
                ox[n_out] = qx; oy[n_out] = qy
                n_out += 1
            elif pside >= 0.0:
                r = pside / (pside - qside)
                ox[n_out] = ppx + r * (qx - ppx); oy[n_out] = ppy + r * (qy - ppy)
                n_out += 1
            ppx = qx; ppy = qy; pside = qside
    return n_out


cdef double _rect_jaccard(double* a, double* b) noexcept nogil:
    cdef double ax_[4]
    cdef double ay_[4]
    cdef double bx_[4]
    cdef double by_[4]
    cdef double ox[MAXV]
    cdef double oy[MAXV]
    cdef double a1 = a[2] * a[3], a2 = b[2] * b[3]
    cdef double dx = a[0] - b[0], dy = a[1] - b[1]
    cdef double rad = 0.5 * (sqrt(a[2] * a[2] + a[3] * a[3]) + sqrt(b[2] * b[2] + b[3] * b[3]))
    cdef double ia, union
    cdef int n
    if dx * dx + dy * dy >= rad * rad:
        return 0.0
    _corners(a[0], a[1], a[2], a[3], a[4], ax_, ay_)
    _corners(b[0], b[1], b[2], b[3], b[4], bx_, by_)
    n = _clip(ax_, ay_, 4, bx_, by_, 4, ox, oy)
    if n < 3:
        return 0.0
    ia = _signed_area(ox, oy, n)
    if ia < 0.0:
        ia = -ia
    union = a1 + a2 - ia
    if union <= 0.0:
        return 0.0
    if ia / union > 1.0:
        return 1.0
    return ia / union


cdef void _reverse(double* px, double* py, int n) noexcept nogil:
    cdef int i = 0, j = n - 1
    cdef double t
    while i < j:
        t = px[i]; px[i] = px[j]; px[j] = t
        t = py[i]; py[i] = py[j]; py[j] = t
        i += 1
        j -= 1


def poly_intersection_area(a, b):
    cdef double[:, ::1] pa = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] pb = np.ascontiguousarray(b, dtype=np.float64)
    cdef int na = pa.shape[0], nb = pb.shape[0], i, n
    cdef double sx[MAXV]
    cdef double sy[MAXV]
    cdef double cx[MAXV]
    cdef double cy[MAXV]
    cdef double ox[MAXV]
    cdef double oy[MAXV]
    if na < 3 or nb < 3:
        return 0.0
    if na + nb > MAXV:
        raise ValueError("polygons too large for compiled kernel")
    for i in range(na):
        sx[i] = pa[i, 0]; sy[i] = pa[i, 1]
    for i in range(nb):
        cx[i] = pb[i, 0]; cy[i] = pb[i, 1]
    if _signed_area(sx, sy, na) < 0.0:
        _reverse(sx, sy, na)
    if _signed_area(cx, cy, nb) < 0.0:
        _reverse(cx, cy, nb)
    n = _clip(sx, sy, na, cx, cy, nb, ox, oy)
    if n < 3:
        return 0.0
    return abs(_signed_area(ox, oy, n))


def rect_jaccard(r1, r2):
    cdef double a[5]
    cdef double b[5]
    cdef int i
    for i in range(5):
        a[i] = float(r1[i]); b[i] = float(r2[i])
    return _rect_jaccard(a, b)


def jaccard_matrix(rects1, rects2):
    cdef double[:, ::1] r1 = np.ascontiguousarray(rects1, dtype=np.float64).reshape(-1, 5)
    cdef double[:, ::1] r2 = np.ascontiguousarray(rects2, dtype=np.float64).reshape(-1, 5)
    cdef Py_ssize_t n1 = r1.shape[0], n2 = r2.shape[0], i, j
    out = np.zeros((n1, n2), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n1):
            for j in range(n2):
                o[i, j] = _rect_jaccard(&r1[i, 0], &r2[j, 0])
    return out


def nms(rects, order, thresh):
    cdef double[:, ::1] r = np.ascontiguousarray(rects, dtype=np.float64).reshape(-1, 5)
    cdef cnp.int64_t[::1] ordv = np.ascontiguousarray(order, dtype=np.int64)
    cdef double th = thresh
    cdef Py_ssize_t n = ordv.shape[0], i, j, nk = 0
    kept = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] kv = kept
    cdef bint ok
    with nogil:
        for i in range(n):
            ok = True
            for j in range(nk):
                if _rect_jaccard(&r[ordv[i], 0], &r[kv[j], 0]) > th:
                    ok = False
                    break
            if ok:
                kv[nk] = ordv[i]
                nk += 1
    return kept[:nk].copy()


def match_slots(gts, int grid_n, double stride, int k, double input_size):
    cdef double[:, ::1] g = np.ascontiguousarray(gts, dtype=np.float64).reshape(-1, 5)
    cdef Py_ssize_t m = g.shape[0], i
    out = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef double bin_w = 180.0 / k, x, y
    cdef long col, row, a
    with nogil:
        for i in range(m):
            x = g[i, 0]; y = g[i, 1]
            if not (0.0 <= x < input_size and 0.0 <= y < input_size):
                o[i] = -1
                continue
            col = <long>floor(x / stride)
            row = <long>floor(y / stride)
            if col > grid_n - 1:
                col = grid_n - 1
            if row > grid_n - 1:
                row = grid_n - 1
            a = <long>ceil((90.0 - g[i, 4]) / bin_w) - 1
            if a < 0:
                a = 0
            elif a > k - 1:
                a = k - 1
            o[i] = (row * grid_n + col) * k + a
    return out
