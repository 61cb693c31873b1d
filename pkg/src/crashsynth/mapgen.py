"""Synthetic map builders for crossings, T-junctions and straight roads.

Builders return plain map documents (the JSON form accepted by
``roadmap.network_from_dict``) so fixtures can be written straight to disk.
"""
from __future__ import annotations

import math
from typing import Any, Sequence

from crashsynth import geometry as geo
from crashsynth.roadmap import compass_of

ARM_NAMES = {0: "e", 90: "n", 180: "w", 270: "s"}


def _lane_doc(lane_id: str, index: int, width: float, entrance: geo.Point, exit_: geo.Point) -> dict:
    r = lambda p: [round(p[0], 9), round(p[1], 9)]  # noqa: E731
    return {"id": lane_id, "index": index, "width_m": width, "entrance": r(entrance), "exit": r(exit_)}


def _road_doc(road_id: str, lanes: list[dict], direction: geo.Point, speed: float) -> dict:
    return {"id": road_id, "direction": compass_of(direction).value, "speed_limit_mps": speed, "lanes": lanes}


def _straight_lanes(road_id: str, start: geo.Point, direction: geo.Point, length: float,
                    n_lanes: int, width: float) -> list[dict]:
    side = geo.right_normal(direction)
    lanes = []
    for k in range(1, n_lanes + 1):
        off = geo.scale(side, (k - 0.5) * width)
        en = geo.add(start, off)
        ex = geo.add(en, geo.scale(direction, length))
        lanes.append(_lane_doc(f"{road_id}_l{k}", k, width, en, ex))
    return lanes


def junction_site(site_id: str, arm_angles: Sequence[float], *, lanes: int | Sequence[int] = 2,
                  width: float = 3.5, length: float = 50.0, center: geo.Point = (0.0, 0.0),
                  rotation: float = 0.0, speed_limit: float = 13.4) -> tuple[dict, list[dict]]:
    """A 3- or 4-arm junction.  ``lanes`` is per arm (same count both directions).

    Arm ``k`` points outward at ``arm_angles[k] + rotation`` degrees; its
    incoming road drives towards the centre and its outgoing road away from it.
    """
    counts = [lanes] * len(arm_angles) if isinstance(lanes, int) else list(lanes)
    half = max(counts) * width
    roads, legs = [], []
    for ang, n in zip(arm_angles, counts):
        theta = math.radians(ang + rotation)
        out = (math.cos(theta), math.sin(theta))
        name = f"{site_id}_{ARM_NAMES.get(int(ang) % 360, str(int(ang)))}"
        inward = geo.scale(out, -1.0)
        far = geo.add(center, geo.scale(out, half + length))
        near = geo.add(center, geo.scale(out, half))
        rin = f"{name}_in"
        rout = f"{name}_out"
        roads.append(_road_doc(rin, _straight_lanes(rin, far, inward, length, n, width), inward, speed_limit))
        roads.append(_road_doc(rout, _straight_lanes(rout, near, out, length, n, width), out, speed_limit))
        legs += [rin, rout]
    square = [geo.add(center, geo.rotate((sx * half, sy * half), math.radians(rotation)))
              for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
    site = {
        "id": site_id,
        "type": "Intersection" if len(arm_angles) == 4 else "TJunction",
        "legs": legs,
        "junction_polygon": [[round(x, 9), round(y, 9)] for x, y in square],
    }
    return site, roads


def intersection(site_id: str, **kw) -> tuple[dict, list[dict]]:
    return junction_site(site_id, (0, 90, 180, 270), **kw)


def t_junction(site_id: str, *, stem: float = 270, **kw) -> tuple[dict, list[dict]]:
    """T-junction whose through road runs along the axis perpendicular to ``stem``."""
    arms = sorted({(stem + 90) % 360, (stem + 270) % 360, stem % 360})
    return junction_site(site_id, arms, **kw)


def straight_site(site_id: str, *, lanes: int = 2, width: float = 3.5, length: float = 120.0,
                  center: geo.Point = (0.0, 0.0), rotation: float = 0.0,
                  speed_limit: float = 22.4) -> tuple[dict, list[dict]]:
    """One carriageway with ``lanes`` lanes in each direction."""
    theta = math.radians(rotation)
    d = (math.cos(theta), math.sin(theta))
    back = geo.scale(d, -1.0)
    a_start = geo.add(center, geo.scale(back, length / 2))
    b_start = geo.add(center, geo.scale(d, length / 2))
    ra, rb = f"{site_id}_fwd", f"{site_id}_rev"
    roads = [
        _road_doc(ra, _straight_lanes(ra, a_start, d, length, lanes, width), d, speed_limit),
        _road_doc(rb, _straight_lanes(rb, b_start, back, length, lanes, width), back, speed_limit),
    ]
    return {"id": site_id, "type": "StraightRoad", "legs": [ra, rb], "junction_polygon": []}, roads


def _connectivity(site: dict, roads: list[dict]) -> list[list[str]]:
    if site["type"] == "StraightRoad":
        return []
    ins = [r["id"] for r in roads if r["id"].endswith("_in")]
    outs = [r["id"] for r in roads if r["id"].endswith("_out")]
    return [[a, b] for a in ins for b in outs]


def network_doc(parts: Sequence[tuple[dict, list[dict]]]) -> dict[str, Any]:
    """Assemble several site builders' outputs into one map document."""
    doc: dict[str, Any] = {"sites": [], "roads": [], "connectivity": []}
    for site, roads in parts:
        doc["sites"].append(site)
        doc["roads"].extend(roads)
        doc["connectivity"].extend(_connectivity(site, roads))
    return doc
