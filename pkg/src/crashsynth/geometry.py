"""Planar helpers: vectors, convex polygons, clipping, hulls, oriented boxes.

Polygons are tuples of (x, y) vertices in counter-clockwise order without a
repeated closing vertex.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

Point = tuple[float, float]
Polygon = tuple[Point, ...]

EPS = 1e-9


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
    if n == 0:
        raise ValueError("zero vector has no direction")
    return (a[0] / n, a[1] / n)


def rotate(a: Point, angle: float) -> Point:
    c, s = math.cos(angle), math.sin(angle)
    return (c * a[0] - s * a[1], s * a[0] + c * a[1])


def left_normal(a: Point) -> Point:
    return (-a[1], a[0])


def right_normal(a: Point) -> Point:
    return (a[1], -a[0])


def heading(a: Point) -> float:
    return math.atan2(a[1], a[0])


def angle_between(a: Point, b: Point) -> float:
    """Unsigned angle in [0, pi] between two non-zero vectors."""
    c = dot(a, b) / (norm(a) * norm(b))
    return math.acos(max(-1.0, min(1.0, c)))


def signed_angle(a: Point, b: Point) -> float:
    """Angle in (-pi, pi] that rotates ``a`` onto ``b`` (positive = counter-clockwise)."""
    return math.atan2(cross(a, b), dot(a, b))


def signed_area(poly: Sequence[Point]) -> float:
    n = len(poly)
    return 0.5 * sum(cross(poly[i], poly[(i + 1) % n]) for i in range(n))


def area(poly: Sequence[Point]) -> float:
    return abs(signed_area(poly)) if len(poly) >= 3 else 0.0


def ensure_ccw(poly: Sequence[Point]) -> Polygon:
    pts = tuple((float(x), float(y)) for x, y in poly)
    return pts if signed_area(pts) >= 0 else pts[::-1]


def centroid(poly: Sequence[Point]) -> Point:
    a = signed_area(poly)
    if abs(a) < EPS:
        n = len(poly)
        return (sum(p[0] for p in poly) / n, sum(p[1] for p in poly) / n)
    cx = cy = 0.0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        f = x0 * y1 - x1 * y0
        cx += (x0 + x1) * f
        cy += (y0 + y1) * f
    return (cx / (6 * a), cy / (6 * a))


def convex_hull(points: Iterable[Point]) -> Polygon:
    """Andrew's monotone chain; collinear points are dropped."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return tuple(pts)

    # The chain uses the plain orientation sign: a tolerance here would pop true
    # vertices when near-tied x values order a near-vertical edge out of sequence.
    def half(seq):
        out: list[Point] = []
        for p in seq:
            while len(out) >= 2 and cross(sub(out[-1], out[-2]), sub(p, out[-2])) <= 0:
                out.pop()
            out.append(p)
        return out

    hull = half(pts)[:-1] + half(reversed(pts))[:-1]
    # then drop vertices within EPS of the line through their neighbours
    changed = True
    while changed and len(hull) > 3:
        changed = False
        for i in range(len(hull)):
            prev, cur, nxt = hull[i - 1], hull[i], hull[(i + 1) % len(hull)]
            base = norm(sub(nxt, prev))
            if base > 0 and abs(cross(sub(nxt, prev), sub(cur, prev))) <= EPS * base:
                del hull[i]
                changed = True
                break
    return tuple(hull)


def is_convex(poly: Sequence[Point]) -> bool:
    n = len(poly)
    if n < 3:
        return False
    sign = 0
    for i in range(n):
        c = cross(sub(poly[(i + 1) % n], poly[i]), sub(poly[(i + 2) % n], poly[(i + 1) % n]))
        if abs(c) <= EPS:
            continue
        s = 1 if c > 0 else -1
        if sign and s != sign:
            return False
        sign = s
    return sign != 0


def clip_convex(subject: Sequence[Point], clip: Sequence[Point]) -> Polygon:
    """Sutherland-Hodgman clipping of ``subject`` by the convex CCW polygon ``clip``."""
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            break
        a, b = clip[i], clip[(i + 1) % n]
        edge = sub(b, a)
        inp, output = output, []
        for j in range(len(inp)):
            p, q = inp[j], inp[(j + 1) % len(inp)]
            dp, dq = cross(edge, sub(p, a)), cross(edge, sub(q, a))
            if dp >= 0:
                output.append(p)
            if (dp >= 0) != (dq >= 0):
                t = dp / (dp - dq)
                output.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    # Merge coincident vertices produced at shared corners.
    cleaned: list[Point] = []
    for p in output:
        if not cleaned or norm(sub(p, cleaned[-1])) > 1e-9:
            cleaned.append(p)
    if len(cleaned) > 1 and norm(sub(cleaned[0], cleaned[-1])) <= 1e-9:
        cleaned.pop()
    return tuple(cleaned)


def point_in_convex(p: Point, poly: Sequence[Point], tol: float = 1e-9) -> bool:
    """Boundary-inclusive containment test against a CCW convex polygon."""
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        e = sub(b, a)
        if cross(e, sub(p, a)) < -tol * max(1.0, norm(e)):
            return False
    return True


def rectangle(start: Point, end: Point, width: float, extend: float = 0.0) -> Polygon:
    """CCW rectangle of ``width`` centred on the segment start->end, optionally lengthened."""
    d = unit(sub(end, start))
    s = sub(start, scale(d, extend))
    e = add(end, scale(d, extend))
    n = scale(left_normal(d), width / 2)
    return ensure_ccw((sub(s, n), sub(e, n), add(e, n), add(s, n)))


def box_corners(center: Point, theta: float, length: float, width: float) -> Polygon:
    d = (math.cos(theta), math.sin(theta))
    n = left_normal(d)
    hl, hw = length / 2, width / 2
    return tuple(
        add(center, add(scale(d, sl * hl), scale(n, sw * hw)))
        for sl, sw in ((-1, -1), (1, -1), (1, 1), (-1, 1))
    )


def convex_overlap(a: Sequence[Point], b: Sequence[Point]) -> bool:
    """Separating-axis test for two convex polygons (touching counts as overlap)."""
    for poly in (a, b):
        n = len(poly)
        for i in range(n):
            axis = left_normal(sub(poly[(i + 1) % n], poly[i]))
            pa = [dot(axis, p) for p in a]
            pb = [dot(axis, p) for p in b]
            if max(pa) < min(pb) - EPS or max(pb) < min(pa) - EPS:
                return False
    return True
