import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from oagrasp.geometry import (GeometryError, OrientedRect, angle_diff, convex_intersection_area,
                              jaccard, normalize_angle, polygon_area, rect_from_vertices, vertices)

SQ2 = math.sqrt(2.0)

rects = st.builds(
    OrientedRect,
    st.floats(-200, 200), st.floats(-200, 200),
    st.floats(1, 100), st.floats(1, 100),
    st.floats(-90, 89.999),
)


@pytest.mark.parametrize("theta, expected", [(0, 0), (90, -90), (200, 20), (-90, -90), (-270, -90), (179.5, -0.5)])
def test_normalize_angle(theta, expected):
    assert normalize_angle(theta) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_normalize_angle_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        normalize_angle(bad)


@given(st.floats(-1e6, 1e6))
def test_normalize_angle_range_and_congruence(theta):
    r = normalize_angle(theta)
    assert -90 <= r < 90
    k = (theta - r) / 180.0
    assert abs(k - round(k)) < 1e-6


def test_tiny_negative_angle_stays_in_range():
    assert normalize_angle(-1e-17) < 90


def test_vertices_axis_aligned():
    v = vertices(OrientedRect(0, 0, 4, 2, 0))
    np.testing.assert_allclose(v, [(-2, -1), (2, -1), (2, 1), (-2, 1)], atol=1e-12)


def test_vertices_rotated_square_on_axes():
    v = vertices(OrientedRect(0, 0, 2, 2, 45))
    np.testing.assert_allclose(np.hypot(v[:, 0], v[:, 1]), [SQ2] * 4, atol=1e-12)
    # every vertex lies on a coordinate axis
    assert np.all(np.min(np.abs(v), axis=1) < 1e-12)


@given(rects)
def test_vertices_contract(r):
    v = vertices(r)
    np.testing.assert_allclose(v.mean(axis=0), [r.x, r.y], atol=1e-9)
    edges = np.roll(v, -1, axis=0) - v
    lens = np.hypot(edges[:, 0], edges[:, 1])
    np.testing.assert_allclose(lens, [r.w, r.h, r.w, r.h], atol=1e-9)
    first = math.degrees(math.atan2(edges[0, 1], edges[0, 0]))
    assert angle_diff(first, r.theta) < 1e-9
    assert polygon_area(v) == pytest.approx(r.w * r.h, rel=1e-9)


def test_rect_from_vertices_axis_aligned():
    r = rect_from_vertices([(-2, -1), (2, -1), (2, 1), (-2, 1)])
    assert r.as_tuple() == pytest.approx((0, 0, 4, 2, 0), abs=1e-12)


def test_rect_from_vertices_rotated_square():
    s = 3.0
    v = vertices(OrientedRect(0, 0, s, s, 45))
    r = rect_from_vertices(v)
    assert r.as_tuple() == pytest.approx((0, 0, s, s, 45), abs=1e-9)


@pytest.mark.parametrize("pts", [
    [(0, 0), (1, 0), (2, 0), (3, 0)],
    [(0, 0), (0, 0), (1, 1), (1, 0)],
    [(0, 0), (4, 0), (5, 2), (0, 2)],  # trapezoid
])
def test_rect_from_vertices_rejects_degenerate(pts):
    with pytest.raises(GeometryError):
        rect_from_vertices(pts)


def test_rect_from_vertices_tolerates_hand_drawn_jitter():
    v = vertices(OrientedRect(50, 60, 40, 20, 10)) + np.array([[0.05, 0], [0, 0.05], [-0.05, 0], [0, 0]])
    r = rect_from_vertices(v)
    assert r.w == pytest.approx(40, abs=0.1)
    assert angle_diff(r.theta, 10) < 0.5


@settings(max_examples=300)
@given(rects)
def test_round_trip(r):
    back = rect_from_vertices(vertices(r))
    assert back.x == pytest.approx(r.x, abs=1e-6)
    assert back.y == pytest.approx(r.y, abs=1e-6)
    assert back.w == pytest.approx(r.w, abs=1e-6)
    assert back.h == pytest.approx(r.h, abs=1e-6)
    assert angle_diff(back.theta, r.theta) < 1e-6
    np.testing.assert_allclose(vertices(back), vertices(r), atol=1e-6)


def test_intersection_fixtures():
    unit = vertices(OrientedRect(0.5, 0.5, 1, 1, 0))
    assert convex_intersection_area(unit, unit) == pytest.approx(1.0, abs=1e-12)
    far = vertices(OrientedRect(10, 10, 1, 1, 0))
    assert convex_intersection_area(unit, far) == 0.0
    a = vertices(OrientedRect(0, 0, 2, 2, 0))
    b = vertices(OrientedRect(0, 0, 2, 2, 45))
    # frozen from the Monte-Carlo oracle (10^6 samples): 3.311, closed form 8(sqrt2 - 1)
    assert convex_intersection_area(a, b) == pytest.approx(8 * (SQ2 - 1), abs=1e-9)
    assert abs(oracles.mc_intersection_area((0, 0, 2, 2, 0), (0, 0, 2, 2, 45)) - 8 * (SQ2 - 1)) < 0.01


def test_intersection_accepts_either_winding():
    a = vertices(OrientedRect(0, 0, 2, 2, 0))
    b = vertices(OrientedRect(0, 0, 2, 2, 45))
    ref = convex_intersection_area(a, b)
    assert convex_intersection_area(a[::-1], b) == pytest.approx(ref)
    assert convex_intersection_area(a, b[::-1]) == pytest.approx(ref)


def test_touching_rectangles_have_zero_area():
    a = vertices(OrientedRect(0, 0, 2, 2, 0))
    b = vertices(OrientedRect(2, 0, 2, 2, 0))
    assert convex_intersection_area(a, b) == pytest.approx(0.0, abs=1e-9)
    c = vertices(OrientedRect(2, 2, 2, 2, 0))
    assert convex_intersection_area(a, c) == pytest.approx(0.0, abs=1e-9)


def test_jaccard_fixtures():
    r = OrientedRect(3, 4, 5, 6, 12)
    assert jaccard(r, r) == pytest.approx(1.0, abs=1e-12)
    assert jaccard(OrientedRect(0, 0, 4, 2, 0), OrientedRect(1, 0, 4, 2, 0)) == pytest.approx(0.6, abs=1e-12)
    assert jaccard(OrientedRect(0, 0, 2, 2, 0), OrientedRect(0, 0, 2, 2, 45)) == pytest.approx(0.70711, abs=1e-5)


def test_jaccard_same_rect_different_representation():
    a = OrientedRect(10, 10, 8, 4, 30)
    b = OrientedRect(10, 10, 8, 4, -150)
    c = OrientedRect(10, 10, 4, 8, -60)
    assert jaccard(a, b) == pytest.approx(1.0, abs=1e-12)
    assert jaccard(a, c) == pytest.approx(1.0, abs=1e-12)


@given(rects, rects)
def test_jaccard_symmetric_and_bounded(a, b):
    j1, j2 = jaccard(a, b), jaccard(b, a)
    assert j1 == pytest.approx(j2, abs=1e-9)
    assert 0.0 <= j1 <= 1.0
    inter = convex_intersection_area(vertices(a), vertices(b))
    assert inter <= min(a.area, b.area) * (1 + 1e-9) + 1e-9


@given(rects, rects, st.floats(-180, 180), st.floats(-100, 100), st.floats(-100, 100))
def test_jaccard_rigid_motion_invariance(a, b, rot, tx, ty):
    t = math.radians(rot)

    def move(r):
        x = r.x * math.cos(t) - r.y * math.sin(t) + tx
        y = r.x * math.sin(t) + r.y * math.cos(t) + ty
        return OrientedRect(x, y, r.w, r.h, normalize_angle(r.theta + rot))

    assert jaccard(move(a), move(b)) == pytest.approx(jaccard(a, b), abs=1e-9)


def test_jaccard_agrees_with_monte_carlo_on_small_sample():
    rng = np.random.default_rng(7)
    for _ in range(5):
        r1 = (0.0, 0.0, rng.uniform(5, 40), rng.uniform(5, 40), rng.uniform(-90, 90))
        r2 = (rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(5, 40), rng.uniform(5, 40), rng.uniform(-90, 90))
        j = jaccard(OrientedRect(*r1), OrientedRect(*r2))
        assert abs(j - oracles.mc_jaccard(r1, r2, n=200_000)) < 0.01


@pytest.mark.parametrize("a, b, expected", [(30, 30, 0), (85, -85, 10), (75, -75, 30), (0, 90, 90), (10, 370, 0)])
def test_angle_diff(a, b, expected):
    assert angle_diff(a, b) == pytest.approx(expected, abs=1e-12)


@given(st.floats(-720, 720), st.floats(-720, 720))
def test_angle_diff_properties(a, b):
    d = angle_diff(a, b)
    assert 0 <= d <= 90
    assert d == pytest.approx(angle_diff(b, a), abs=1e-9)
    assert angle_diff(a, a + 180) == pytest.approx(0, abs=1e-9)


def test_rect_invariants_enforced():
    with pytest.raises(ValueError):
        OrientedRect(0, 0, 0, 1, 0)
    with pytest.raises(ValueError):
        OrientedRect(0, 0, 1, -1, 0)
    with pytest.raises(ValueError):
        OrientedRect(math.nan, 0, 1, 1, 0)
