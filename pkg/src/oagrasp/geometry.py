"""Rotated-rectangle geometry.

Coordinates are image pixels with y pointing down. Angles are degrees
measured from the +x axis, positive values sweeping toward +y, and are kept
in the half-open range [-90, 90) because a grasp rectangle rotated by 180
degrees is the same grasp. ``w`` is the extent along the angle direction
(the gripper plates' moving direction) and ``h`` the extent across it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._backend import kernels


class GeometryError(ValueError):
    """Raised when four points cannot be read as a rectangle."""


def normalize_angle(theta: float) -> float:
    """Map an angle in degrees onto [-90, 90), modulo 180."""
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    r = (theta + 90.0) % 180.0 - 90.0
    # (tiny negative) % 180 can round to 180
    if r >= 90.0:
        r -= 180.0
    return r


def angle_diff(a: float, b: float) -> float:
    """Smallest difference between two grasp angles, in [0, 90]."""
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


@dataclass(frozen=True)
class OrientedRect:
    x: float
    y: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"rectangle sides must be positive, got w={self.w}, h={self.h}")
        for name in ("x", "y", "w", "h", "theta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def area(self) -> float:
        return self.w * self.h

    def normalized(self) -> "OrientedRect":
        return OrientedRect(self.x, self.y, self.w, self.h, normalize_angle(self.theta))

    def as_tuple(self) -> tuple:
        return (self.x, self.y, self.w, self.h, self.theta)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h, "theta": self.theta}

    @classmethod
    def from_dict(cls, d) -> "OrientedRect":
        return cls(float(d["x"]), float(d["y"]), float(d["w"]), float(d["h"]), float(d["theta"]))


def vertices(rect: OrientedRect) -> np.ndarray:
    """Corners as a (4, 2) array; edge 0->1 has length w and direction theta.

    The order has positive shoelace area (counterclockwise in the math sense
    of the (x, y) axes, which reads clockwise on a y-down screen).
    """
    t = math.radians(rect.theta)
    u = np.array([math.cos(t), math.sin(t)]) * (0.5 * rect.w)
    n = np.array([-math.sin(t), math.cos(t)]) * (0.5 * rect.h)
    c = np.array([rect.x, rect.y])
    return np.array([c - u - n, c + u - n, c + u + n, c - u + n])


def _direction_deg(v) -> float:
    return math.degrees(math.atan2(v[1], v[0]))


def rect_from_vertices(poly, tol_deg: float = 1.0) -> OrientedRect:
    """Fit an OrientedRect to four ordered corners.

    Opposite edges must be parallel within ``tol_deg``. Width and height are
    the averages of the two opposite edge lengths, and the angle is the mean
    direction of the two w-edges (v0->v1 and v3->v2).
    """
    p = np.asarray(poly, dtype=np.float64)
    if p.shape != (4, 2) or not np.all(np.isfinite(p)):
        raise GeometryError(f"expected 4 finite vertices, got shape {p.shape}")
    e01, e32 = p[1] - p[0], p[2] - p[3]
    e12, e03 = p[2] - p[1], p[3] - p[0]
    lens = [float(np.hypot(*e)) for e in (e01, e32, e12, e03)]
    scale = max(lens)
    if scale == 0.0 or min(lens) <= 1e-9 * scale:
        raise GeometryError("degenerate rectangle: zero-length edge")
    for a, b in ((e01, e32), (e12, e03)):
        if angle_diff_signed(_direction_deg(a), _direction_deg(b)) > tol_deg:
            raise GeometryError(f"opposite edges not parallel within {tol_deg} deg")
    # adjacent edges must not be (anti)parallel
    cross = abs(e01[0] * e12[1] - e01[1] * e12[0])
    if cross <= math.sin(math.radians(tol_deg)) * lens[0] * lens[2]:
        raise GeometryError("degenerate rectangle: collinear vertices")
    d = e01 / lens[0] + e32 / lens[1]
    theta = normalize_angle(_direction_deg(d))
    cx, cy = p.mean(axis=0)
    return OrientedRect(float(cx), float(cy), 0.5 * (lens[0] + lens[1]), 0.5 * (lens[2] + lens[3]), theta)


def angle_diff_signed(a: float, b: float) -> float:
    """Difference of two direction angles modulo 360, in [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def polygon_area(poly) -> float:
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def convex_intersection_area(a, b) -> float:
    """Area of the intersection of two convex polygons (either winding)."""
    return float(kernels.poly_intersection_area(np.asarray(a, dtype=np.float64),
                                                np.asarray(b, dtype=np.float64)))


_jaccard_calls = 0


def jaccard_call_count() -> int:
    """Number of rectangle-pair Jaccard evaluations made through this module."""
    return _jaccard_calls


def jaccard(g: OrientedRect, ghat: OrientedRect) -> float:
    """Intersection over union of two oriented rectangles."""
    global _jaccard_calls
    _jaccard_calls += 1
    return float(kernels.rect_jaccard(g.as_tuple(), ghat.as_tuple()))


def rects_to_array(rects: Sequence[OrientedRect]) -> np.ndarray:
    if len(rects) == 0:
        return np.zeros((0, 5))
    return np.array([r.as_tuple() for r in rects], dtype=np.float64)


def jaccard_matrix(a: Sequence[OrientedRect], b: Sequence[OrientedRect]) -> np.ndarray:
    global _jaccard_calls
    a, b = rects_to_array(a), rects_to_array(b)
    _jaccard_calls += len(a) * len(b)
    return kernels.jaccard_matrix(a, b)
