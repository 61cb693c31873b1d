"""Convex regions of a site that waypoints are confined to."""
from __future__ import annotations

from crashsynth import geometry as geo
from crashsynth.roadmap import Lane, Road, Site

EXTENSION = 200.0  # long enough to reach across any junction


def lane_band(lane: Lane, vehicle_width: float) -> geo.Polygon:
    return lane.band(vehicle_width)


def extended_band(lane: Lane, vehicle_width: float) -> geo.Polygon:
    return lane.band(vehicle_width, extend=EXTENSION)


def carriageway(road: Road, site: Site, vehicle_width: float) -> geo.Polygon:
    """Bands of a road and its opposing road, hulled: where a U-turn may happen mid-block."""
    opp = site.opposing_road(road)
    lanes = list(road.lanes) + (list(opp.lanes) if opp else [])
    return geo.convex_hull(p for l in lanes for p in l.band(vehicle_width))


def hull(*polys: geo.Polygon) -> geo.Polygon:
    return geo.convex_hull(p for poly in polys for p in poly)


def carriageway_span(road: Road, site: Site, heading: geo.Point) -> tuple[float, float]:
    """Extent of the paved carriageway along ``heading`` (for a pedestrian crossing it)."""
    opp = site.opposing_road(road)
    lanes = list(road.lanes) + (list(opp.lanes) if opp else [])
    proj = [geo.dot(heading, p) for l in lanes for p in l.rect()]
    return min(proj), max(proj)


def half_plane(poly: geo.Polygon, normal: geo.Point, offset: float, keep_below: bool) -> geo.Polygon:
    """Clip ``poly`` to ``normal . p <= offset`` (or ``>=``)."""
    n = normal if keep_below else geo.scale(normal, -1.0)
    off = offset if keep_below else -offset
    # a huge CCW box on the kept side of the line n.p = off
    t = geo.left_normal(n)
    base = geo.scale(n, off / geo.dot(n, n))
    big = 1e5
    box = geo.ensure_ccw([
        geo.add(base, geo.scale(t, big)),
        geo.add(base, geo.scale(t, -big)),
        geo.add(geo.add(base, geo.scale(t, -big)), geo.scale(n, -big)),
        geo.add(geo.add(base, geo.scale(t, big)), geo.scale(n, -big)),
    ])
    return geo.clip_convex(poly, box)


def crossing_zones(road: Road, site: Site, heading: geo.Point) -> tuple[geo.Polygon, geo.Polygon, geo.Polygon]:
    """(whole crosswalk, kerb zone to start from, kerb zone to finish in)."""
    walk = site.crosswalk(road)
    lo, hi = carriageway_span(road, site, heading)
    start = half_plane(walk, heading, lo, keep_below=True)
    end = half_plane(walk, heading, hi, keep_below=False)
    return walk, start, end
