import math

import numpy as np
import pytest

from indoorloc import geometry


def test_project_small_offsets_against_hand_values():
    # 1e-5 deg at latitude 42: y = R*rad(1e-5), x scaled by cos(42 deg)
    x, y = geometry.project(42.0, -71.0, 42.0 + 1e-5, -71.0)
    assert x == 0.0
    assert abs(y - 1.1119492664455874) < 1e-9
    x, y = geometry.project(42.0, -71.0, 42.0, -71.0 + 1e-5)
    assert y == 0.0
    assert abs(x - 0.8263393435524227) < 1e-9


def test_project_unproject_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(200):
        x, y = rng.uniform(-500, 500, size=2)
        lat, lon = geometry.unproject(42.3617, -71.0921, x, y)
        x2, y2 = geometry.project(42.3617, -71.0921, lat, lon)
        assert math.hypot(x2 - x, y2 - y) < 1e-6


def test_haversine_matches_projection_at_short_range():
    lat, lon = geometry.unproject(42.0, -71.0, 30.0, 40.0)
    d = geometry.haversine_m(42.0, -71.0, lat, lon)
    assert abs(d - 50.0) < 0.01


def test_vector_helpers():
    assert geometry.dist((0, 0), (3, 4)) == 5.0
    assert geometry.dot((1, 2), (3, 4)) == 11.0
    assert geometry.cross((1, 0), (0, 1)) == 1.0
    assert geometry.unit((0, 5)) == (0.0, 1.0)
    with pytest.raises(ValueError):
        geometry.unit((0.0, 0.0))


def test_signed_angle_orientation_and_range():
    assert abs(geometry.signed_angle((1, 0), (0, 1)) - math.pi / 2) < 1e-12
    assert abs(geometry.signed_angle((0, 1), (1, 0)) + math.pi / 2) < 1e-12
    # opposite vectors land on +pi, not -pi
    assert geometry.signed_angle((1, 0), (-1, 0)) == pytest.approx(math.pi)
    assert geometry.angle_between((1, 0), (-1, 1e-9)) <= math.pi


def test_rotate_matches_heading_arithmetic():
    h = geometry.heading_vector(0.3)
    r = geometry.rotate(h, 0.4)
    assert geometry.angle_of(r) == pytest.approx(0.7)
    assert math.hypot(*r) == pytest.approx(1.0)


def test_segment_intersection_basic_cross():
    hit = geometry.segment_intersection((0, 0), (2, 2), (0, 2), (2, 0))
    assert hit is not None
    t, u, p = hit
    assert t == pytest.approx(0.5)
    assert u == pytest.approx(0.5)
    assert p == pytest.approx((1.0, 1.0))


def test_segment_intersection_misses_and_parallels():
    assert geometry.segment_intersection((0, 0), (1, 0), (0, 1), (1, 1)) is None
    assert geometry.segment_intersection((0, 0), (1, 0), (2, 0), (3, 0)) is None  # collinear
    assert geometry.segment_intersection((0, 0), (1, 1), (3, 0), (4, 1)) is None


def test_strictly_crosses_requires_both_sides():
    wall = ((0.0, 1.0), (4.0, 1.0))
    assert geometry.strictly_crosses((1, 0), (1, 2), *wall)
    # stopping on the wall is contact, not a crossing
    assert not geometry.strictly_crosses((1, 0), (1, 1), *wall)
    # displacement ending within eps meters past the line is still contact
    assert not geometry.strictly_crosses((1, 0), (1, 1.0 + 5e-10), *wall)
    assert geometry.strictly_crosses((1, 0), (1, 1.0 + 1e-6), *wall)


def test_strictly_crosses_collinear_slide_is_not_a_crossing():
    wall = ((0.0, 0.0), (5.0, 0.0))
    assert not geometry.strictly_crosses((1, 0), (3, 0), *wall)


def test_strictly_crosses_random_agrees_with_side_signs():
    rng = np.random.default_rng(3)
    for _ in range(500):
        a, b, c, d = [tuple(rng.uniform(-5, 5, size=2)) for _ in range(4)]
        got = geometry.strictly_crosses(a, b, c, d)
        # oracle: strict opposite sides of each segment's support line
        def side(p, q, r):
            return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        s1, s2 = side(c, d, a), side(c, d, b)
        s3, s4 = side(a, b, c), side(a, b, d)
        expected = s1 * s2 < 0 and s3 * s4 < 0
        if abs(s1) > 1e-6 and abs(s2) > 1e-6 and abs(s3) > 1e-6 and abs(s4) > 1e-6:
            assert got == expected


def test_point_segment_distance():
    assert geometry.point_segment_distance((0, 1), (0, 0), (2, 0)) == pytest.approx(1.0)
    assert geometry.point_segment_distance((3, 4), (0, 0), (2, 0)) == pytest.approx(math.hypot(1, 4))
    assert geometry.point_segment_distance((1, 0), (1, 0), (1, 0)) == 0.0  # degenerate


def test_point_in_polygon_square_and_boundary():
    square = [(0, 0), (4, 0), (4, 4), (0, 4)]
    assert geometry.point_in_polygon((2, 2), square)
    assert not geometry.point_in_polygon((5, 2), square)
    assert geometry.point_in_polygon((0, 2), square)  # boundary counts as inside
    assert geometry.point_in_polygon((2, 0), square)


def test_point_in_polygon_concave():
    # U-shape: the notch is outside
    poly = [(0, 0), (6, 0), (6, 4), (4, 4), (4, 2), (2, 2), (2, 4), (0, 4)]
    assert geometry.point_in_polygon((1, 3), poly)
    assert geometry.point_in_polygon((5, 3), poly)
    assert not geometry.point_in_polygon((3, 3), poly)
