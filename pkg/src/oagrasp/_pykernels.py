"""Pure-Python implementations of the hot geometry kernels.

Each function here has a twin in ``_ckernels.pyx`` with the same signature
and semantics. Inputs are numpy arrays; the inner loops are plain Python on
floats so this module works without a compiler.
"""
import math

import numpy as np


def _corners(x, y, w, h, theta):
    t = math.radians(theta)
    c, s = math.cos(t), math.sin(t)
    hw, hh = 0.5 * w, 0.5 * h
    # u = (c, s) along w, n = (-s, c) along h
    return [
        (x - hw * c + hh * s, y - hw * s - hh * c),
        (x + hw * c + hh * s, y + hw * s - hh * c),
        (x + hw * c - hh * s, y + hw * s + hh * c),
        (x - hw * c - hh * s, y - hw * s + hh * c),
    ]


def _signed_area(pts):
    n = len(pts)
    acc = 0.0
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def _clip(subject, clipper):
    """Sutherland-Hodgman; both polygons counterclockwise (positive area)."""
    out = list(subject)
    m = len(clipper)
    for i in range(m):
        if not out:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % m]
        ex, ey = bx - ax, by - ay
        inp = out
        out = []
        px, py = inp[-1]
        pside = ex * (py - ay) - ey * (px - ax)
        for qx, qy in inp:
            qside = ex * (qy - ay) - ey * (qx - ax)
            if qside >= 0.0:
                if pside < 0.0:
                    r = pside / (pside - qside)
                    out.append((px + r * (qx - px), py + r * (qy - py)))
                out.append((qx, qy))
            elif pside >= 0.0:
                r = pside / (pside - qside)
                out.append((px + r * (qx - px), py + r * (qy - py)))
            px, py, pside = qx, qy, qside
    return out


def _ccw(pts):
    return pts if _signed_area(pts) >= 0.0 else pts[::-1]


def poly_intersection_area(a, b):
    """Area of the intersection of two convex polygons given as (n, 2) arrays."""
    pa = _ccw([(float(p[0]), float(p[1])) for p in a])
    pb = _ccw([(float(p[0]), float(p[1])) for p in b])
    if len(pa) < 3 or len(pb) < 3:
        return 0.0
    inter = _clip(pa, pb)
    if len(inter) < 3:
        return 0.0
    return abs(_signed_area(inter))


def _rect_jaccard(r1, r2):
    a1 = r1[2] * r1[3]
    a2 = r2[2] * r2[3]
    # circumradius rejection
    dx, dy = r1[0] - r2[0], r1[1] - r2[1]
    rad = 0.5 * (math.hypot(r1[2], r1[3]) + math.hypot(r2[2], r2[3]))
    if dx * dx + dy * dy >= rad * rad:
        return 0.0
    inter = _clip(_corners(*r1), _corners(*r2))
    if len(inter) < 3:
        return 0.0
    ia = abs(_signed_area(inter))
    union = a1 + a2 - ia
    if union <= 0.0:
        return 0.0
    return min(1.0, ia / union)


def rect_jaccard(r1, r2):
    """Jaccard index of two rectangles given as (x, y, w, h, theta_deg)."""
    return _rect_jaccard(tuple(map(float, r1)), tuple(map(float, r2)))


def jaccard_matrix(rects1, rects2):
    r1 = [tuple(map(float, r)) for r in np.asarray(rects1, dtype=np.float64).reshape(-1, 5)]
    r2 = [tuple(map(float, r)) for r in np.asarray(rects2, dtype=np.float64).reshape(-1, 5)]
    out = np.zeros((len(r1), len(r2)), dtype=np.float64)
    for i, a in enumerate(r1):
        for j, b in enumerate(r2):
            out[i, j] = _rect_jaccard(a, b)
    return out


def nms(rects, order, thresh):
    """Greedy suppression over ``order``; returns kept indices in that order."""
    rs = [tuple(map(float, r)) for r in np.asarray(rects, dtype=np.float64).reshape(-1, 5)]
    kept = []
    for i in order:
        i = int(i)
        ri = rs[i]
        if all(_rect_jaccard(ri, rs[j]) <= thresh for j in kept):
            kept.append(i)
    return np.asarray(kept, dtype=np.int64)


def match_slots(gts, grid_n, stride, k, input_size):
    """Anchor slot index per ground truth (-1 when the center is off-image).

    ``gts`` is (m, 5) of (x, y, w, h, theta) with theta already canonical.
    """
    g = np.asarray(gts, dtype=np.float64).reshape(-1, 5)
    out = np.empty(len(g), dtype=np.int64)
    bin_w = 180.0 / k
    for i in range(len(g)):
        x, y, theta = float(g[i, 0]), float(g[i, 1]), float(g[i, 4])
        if not (0.0 <= x < input_size and 0.0 <= y < input_size):
            out[i] = -1
            continue
        col = min(math.floor(x / stride), grid_n - 1)
        row = min(math.floor(y / stride), grid_n - 1)
        a = math.ceil((90.0 - theta) / bin_w) - 1
        a = 0 if a < 0 else (k - 1 if a > k - 1 else a)
        out[i] = (row * grid_n + col) * k + a
    return out
