"""Independent reference computations used to freeze and check expected values.

None of these reuse the package's clipping, matching or loss code paths.
"""
import math

import numpy as np


def _inside(px, py, rect):
    x, y, w, h, th = rect
    t = math.radians(th)
    dx, dy = px - x, py - y
    u = dx * math.cos(t) + dy * math.sin(t)
    v = -dx * math.sin(t) + dy * math.cos(t)
    return (np.abs(u) <= 0.5 * w) & (np.abs(v) <= 0.5 * h)


def _bbox(rect):
    x, y, w, h, _ = rect
    r = 0.5 * math.hypot(w, h)
    return x - r, x + r, y - r, y + r


def mc_intersection_area(r1, r2, n=10**6, seed=0):
    """Rejection sampling over the bounding box of both rectangles."""
    rng = np.random.default_rng(seed)
    b1, b2 = _bbox(r1), _bbox(r2)
    x0, x1 = min(b1[0], b2[0]), max(b1[1], b2[1])
    y0, y1 = min(b1[2], b2[2]), max(b1[3], b2[3])
    px = rng.uniform(x0, x1, n)
    py = rng.uniform(y0, y1, n)
    both = _inside(px, py, r1) & _inside(px, py, r2)
    return both.mean() * (x1 - x0) * (y1 - y0)


def mc_jaccard(r1, r2, n=10**6, seed=0):
    rng = np.random.default_rng(seed)
    b1, b2 = _bbox(r1), _bbox(r2)
    x0, x1 = min(b1[0], b2[0]), max(b1[1], b2[1])
    y0, y1 = min(b1[2], b2[2]), max(b1[3], b2[3])
    px = rng.uniform(x0, x1, n)
    py = rng.uniform(y0, y1, n)
    a, b = _inside(px, py, r1), _inside(px, py, r2)
    union = (a | b).sum()
    return (a & b).sum() / union if union else 0.0


def brute_angle_nearest(theta, anchor_angles):
    """Index of the anchor angle closest to theta modulo 180, by enumeration."""
    best, best_d = None, None
    for i, ta in enumerate(anchor_angles):
        d = min((theta - ta) % 180.0, (ta - theta) % 180.0)
        if best_d is None or d < best_d - 1e-12:
            best, best_d = i, d
    return best, best_d


def brute_nearest_center(x, y, grid_n, stride):
    """(row, col) of the nearest cell center by scanning every cell."""
    best, best_d = None, None
    for r in range(grid_n):
        for c in range(grid_n):
            d = (x - (c + 0.5) * stride) ** 2 + (y - (r + 0.5) * stride) ** 2
            if best_d is None or d < best_d:
                best, best_d = (r, c), d
    return best, best_d


def central_difference(f, x, eps):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        o = flat[i]
        flat[i] = o + eps
        fp = f(x)
        flat[i] = o - eps
        fm = f(x)
        flat[i] = o
        gf[i] = (fp - fm) / (2 * eps)
    return g
