"""Small 2D geometry kit: local projection, segments, angles.

Everything works on plain (x, y) float tuples so results are easy to
freeze in tests and bit-stable across runs.
"""

from __future__ import annotations

import math

EARTH_RADIUS_M = 6_371_000.0

Point = tuple[float, float]


def project(origin_lat: float, origin_lon: float, lat: float, lon: float) -> Point:
    """Equirectangular projection onto a local tangent plane at the origin.

    x grows east, y grows north, both in meters. Good to sub-centimeter
    at building scale, and trivially invertible.
    """
    x = EARTH_RADIUS_M * math.cos(math.radians(origin_lat)) * math.radians(lon - origin_lon)
    y = EARTH_RADIUS_M * math.radians(lat - origin_lat)
    return (x, y)


def unproject(origin_lat: float, origin_lon: float, x: float, y: float) -> tuple[float, float]:
    """Inverse of :func:`project`; returns (lat, lon)."""
    lat = origin_lat + math.degrees(y / EARTH_RADIUS_M)
    lon = origin_lon + math.degrees(x / (EARTH_RADIUS_M * math.cos(math.radians(origin_lat))))
    return (lat, lon)


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


def dist(a: Point, b: Point) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def sub(a: Point, b: Point) -> Point:
    return (a[0] - b[0], a[1] - b[1])


def add(a: Point, b: Point) -> Point:
    return (a[0] + b[0], a[1] + b[1])


def scale(a: Point, k: float) -> Point:
    return (a[0] * k, a[1] * k)


def dot(a: Point, b: Point) -> float:
    return a[0] * b[0] + a[1] * b[1]


def cross(a: Point, b: Point) -> float:
    return a[0] * b[1] - a[1] * b[0]


def norm(a: Point) -> float:
    return math.hypot(a[0], a[1])


def unit(a: Point) -> Point:
    n = norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return (a[0] / n, a[1] / n)


def heading_vector(theta: float) -> Point:
    return (math.cos(theta), math.sin(theta))


def rotate(a: Point, angle: float) -> Point:
    """Vector a rotated counterclockwise by `angle` radians."""
    c, s = math.cos(angle), math.sin(angle)
    return (c * a[0] - s * a[1], s * a[0] + c * a[1])


def angle_of(v: Point) -> float:
    return math.atan2(v[1], v[0])


def signed_angle(a: Point, b: Point) -> float:
    """Signed angle from vector a to vector b, in (-pi, pi]."""
    return math.atan2(cross(a, b), dot(a, b))


def angle_between(a: Point, b: Point) -> float:
    """Unsigned angle between two vectors, in [0, pi]."""
    return abs(signed_angle(a, b))


def segment_intersection(
    a1: Point, a2: Point, b1: Point, b2: Point, eps: float = 1e-12
) -> tuple[float, float, Point] | None:
    """Proper intersection of segments a1-a2 and b1-b2.

    Returns (t, u, point) with t along a and u along b, both in [0, 1],
    or None when the segments are parallel or do not meet. Collinear
    overlap returns None: running along a line is not a crossing.
    """
    d1 = sub(a2, a1)
    d2 = sub(b2, b1)
    denom = cross(d1, d2)
    if abs(denom) <= eps:
        return None
    r = sub(b1, a1)
    t = cross(r, d2) / denom
    u = cross(r, d1) / denom
    if -eps <= t <= 1.0 + eps and -eps <= u <= 1.0 + eps:
        point = add(a1, scale(d1, t))
        return (t, u, point)
    return None


def strictly_crosses(a1: Point, a2: Point, b1: Point, b2: Point, eps: float = 1e-9) -> bool:
    """True when a1->a2 passes from one side of segment b1-b2 to the other.

    Touching the line (either endpoint within eps of it) does not count,
    so sliding contact along a wall is never a crossing.
    """
    d2 = sub(b2, b1)
    side1 = cross(d2, sub(a1, b1))
    side2 = cross(d2, sub(a2, b1))
    scale_len = norm(d2)
    if scale_len == 0.0:
        return False
    # normalize the side tests to a metric distance so eps means meters
    if abs(side1) <= eps * scale_len or abs(side2) <= eps * scale_len:
        return False
    if (side1 > 0.0) == (side2 > 0.0):
        return False
    hit = segment_intersection(a1, a2, b1, b2)
    return hit is not None


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    """Distance from point p to segment a-b."""
    d = sub(b, a)
    l2 = dot(d, d)
    if l2 == 0.0:
        return dist(p, a)
    t = dot(sub(p, a), d) / l2
    t = min(1.0, max(0.0, t))
    return dist(p, add(a, scale(d, t)))


def point_in_polygon(p: Point, ring: list[Point]) -> bool:
    """Ray-cast containment test; boundary points count as inside."""
    x, y = p
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if point_segment_distance(p, (x1, y1), (x2, y2)) <= 1e-9:
            return True
        if (y1 > y) != (y2 > y):
            x_hit = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x_hit > x:
                inside = not inside
    return inside
