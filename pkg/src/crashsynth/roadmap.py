"""Road networks: parsing, candidate-site enumeration and direction remapping.

Map JSON::

    {"sites": [{"id", "type", "legs": [road_id], "junction_polygon": [[x, y]]}],
     "roads": [{"id", "direction", "speed_limit_mps",
                "lanes": [{"id", "index", "width_m", "entrance": [x, y], "exit": [x, y]}]}],
     "connectivity": [[road_id, road_id]]}

Traffic is right-hand; lane 1 is the leftmost lane in the travel direction
(the one next to the centre line).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Sequence

from crashsynth import geometry as geo
from crashsynth.errors import ConnectivityError, GeometryError, SchemaError, UnmappableDirections
from crashsynth.model import (
    AccidentAbstract,
    Direction,
    DrivingAction,
    ParticipantSpec,
    RoadType,
    parse_direction,
    parse_road_type,
)

PARALLEL_TOL = math.radians(2.0)
HEADING_MATCH_TOL = math.radians(10.0)
ROADSIDE_WIDTH = 3.0
CROSSWALK_WIDTH = 4.0


def compass_of(vec: geo.Point) -> Direction:
    ang = math.degrees(geo.heading(vec)) % 360.0
    return min(Direction, key=lambda d: abs((ang - d.angle_deg + 180.0) % 360.0 - 180.0))


@dataclass(frozen=True)
class Lane:
    id: str
    index: int
    width: float
    entrance: geo.Point
    exit: geo.Point
    road_id: str = ""

    @property
    def centerline(self) -> tuple[geo.Point, geo.Point]:
        return (self.entrance, self.exit)

    @property
    def direction(self) -> geo.Point:
        return geo.unit(geo.sub(self.exit, self.entrance))

    @property
    def length(self) -> float:
        return geo.norm(geo.sub(self.exit, self.entrance))

    def rect(self) -> geo.Polygon:
        return geo.rectangle(self.entrance, self.exit, self.width)

    def band(self, vehicle_width: float, extend: float = 0.0) -> geo.Polygon:
        """Region the centre of a vehicle may occupy without crossing a lane line."""
        return geo.rectangle(self.entrance, self.exit, max(self.width - vehicle_width, 0.0), extend)

    def lateral_offset(self, p: geo.Point) -> float:
        return geo.cross(self.direction, geo.sub(p, self.entrance))

    def station(self, p: geo.Point) -> float:
        return geo.dot(self.direction, geo.sub(p, self.entrance))


@dataclass(frozen=True)
class Road:
    id: str
    lanes: tuple[Lane, ...]
    direction_label: Direction
    speed_limit: float

    @property
    def direction(self) -> geo.Point:
        return self.lanes[0].direction

    @property
    def length(self) -> float:
        return max(l.length for l in self.lanes)

    @property
    def lane_width(self) -> float:
        return sum(l.width for l in self.lanes) / len(self.lanes)

    def lane(self, index: int) -> Lane:
        for l in self.lanes:
            if l.index == index:
                return l
        raise KeyError(f"road {self.id} has no lane {index}")

    @property
    def outer_lane(self) -> Lane:
        return max(self.lanes, key=lambda l: l.index)

    def right_edge(self) -> tuple[geo.Point, geo.Point]:
        lane = self.outer_lane
        off = geo.scale(geo.right_normal(lane.direction), lane.width / 2)
        return geo.add(lane.entrance, off), geo.add(lane.exit, off)

    def roadside(self, width: float = ROADSIDE_WIDTH) -> geo.Polygon:
        """Strip just outside the right edge: shoulder, parking zone and sidewalk."""
        a, b = self.right_edge()
        off = geo.scale(geo.right_normal(self.direction), width / 2)
        return geo.rectangle(geo.add(a, off), geo.add(b, off), width)

    def rect(self) -> geo.Polygon:
        return geo.convex_hull(p for l in self.lanes for p in l.rect())


@dataclass(frozen=True)
class Arm:
    """One side of a junction: roads that touch the junction on that side."""

    outward: geo.Point
    incoming: tuple[str, ...]
    outgoing: tuple[str, ...]


@dataclass(frozen=True)
class Site:
    id: str
    type: RoadType
    road_ids: tuple[str, ...]
    junction_polygon: geo.Polygon
    roads: Mapping[str, Road] = field(repr=False, compare=False, hash=False, default_factory=dict)

    @property
    def approach_roads(self) -> list[Road]:
        return [self.roads[r] for r in self.road_ids]

    @cached_property
    def center(self) -> geo.Point:
        if self.junction_polygon:
            return geo.centroid(self.junction_polygon)
        pts = [p for r in self.approach_roads for l in r.lanes for p in l.centerline]
        return (sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts))

    @cached_property
    def arms(self) -> tuple[Arm, ...]:
        if not self.junction_polygon:
            return ()
        groups: list[tuple[geo.Point, list[str], list[str]]] = []
        for road in self.approach_roads:
            _, incoming = _touch_point(road, self.center)
            # group by travel direction: the touch point of a narrow single-lane
            # road can sit far off the arm's axis
            out = geo.scale(road.direction, -1.0) if incoming else road.direction
            for g_out, inc, outg in groups:
                if geo.angle_between(g_out, out) < math.radians(30):
                    (inc if incoming else outg).append(road.id)
                    break
            else:
                groups.append((out, [road.id] if incoming else [], [] if incoming else [road.id]))
        arms = []
        for g_out, inc, outg in groups:
            ref = self.roads[(inc or outg)[0]].direction
            outward = geo.scale(ref, -1.0) if inc else ref
            arms.append(Arm(outward, tuple(inc), tuple(outg)))
        return tuple(arms)

    @property
    def incoming_roads(self) -> list[Road]:
        if self.type is RoadType.STRAIGHT_ROAD:
            return self.approach_roads
        return [self.roads[r] for a in self.arms for r in a.incoming]

    @property
    def outgoing_roads(self) -> list[Road]:
        if self.type is RoadType.STRAIGHT_ROAD:
            return self.approach_roads
        return [self.roads[r] for a in self.arms for r in a.outgoing]

    @property
    def min_lanes(self) -> int:
        return min(len(r.lanes) for r in self.approach_roads)

    def opposing_road(self, road: Road) -> Road | None:
        if self.type is RoadType.STRAIGHT_ROAD:
            others = [r for r in self.approach_roads if r.id != road.id]
            return others[0] if others else None
        for arm in self.arms:
            if road.id in arm.incoming and arm.outgoing:
                return self.roads[arm.outgoing[0]]
            if road.id in arm.outgoing and arm.incoming:
                return self.roads[arm.incoming[0]]
        return None

    def destination_road(self, road: Road, action: DrivingAction) -> Road | None:
        """Outgoing road reached from ``road`` by a turn, crossing or U-turn."""
        if action is DrivingAction.UTURN:
            return self.opposing_road(road)
        if self.type is RoadType.STRAIGHT_ROAD:
            return None
        d_in = road.direction
        best = None
        for out in self.outgoing_roads:
            d_out = out.direction
            ang = geo.signed_angle(d_in, d_out)
            if action is DrivingAction.TURN_LEFT and abs(ang - math.pi / 2) <= PARALLEL_TOL:
                return out
            if action is DrivingAction.TURN_RIGHT and abs(ang + math.pi / 2) <= PARALLEL_TOL:
                return out
            if action is DrivingAction.VEHICLE_CROSS and geo.dot(d_in, d_out) > math.sin(PARALLEL_TOL):
                if best is None or geo.dot(d_in, d_out) > geo.dot(d_in, best.direction):
                    best = out
        return best

    def crosswalk(self, road: Road) -> geo.Polygon:
        """Pedestrian crossing strip over the carriageway of ``road`` (both directions)."""
        opp = self.opposing_road(road)
        d = road.direction
        n = geo.right_normal(d)
        lanes = list(road.lanes) + (list(opp.lanes) if opp else [])
        offs = [geo.dot(n, geo.sub(p, self.center)) for l in lanes for p in l.rect()]
        lo, hi = min(offs) - ROADSIDE_WIDTH, max(offs) + ROADSIDE_WIDTH
        lane = road.lanes[0]
        if self.junction_polygon and road.id in _incoming_ids(self):
            # crossing just before the junction edge on this road's arm
            s_hi = lane.length - 1.0
            s_lo = s_hi - CROSSWALK_WIDTH
        elif self.junction_polygon:
            s_lo = 1.0
            s_hi = s_lo + CROSSWALK_WIDTH
        else:
            s_lo = lane.length / 2 - CROSSWALK_WIDTH / 2
            s_hi = s_lo + CROSSWALK_WIDTH
        base = lane.entrance
        c_off = geo.dot(n, geo.sub(base, self.center))
        pts = []
        for s, o in ((s_lo, lo), (s_hi, lo), (s_hi, hi), (s_lo, hi)):
            p = geo.add(base, geo.scale(d, s))
            p = geo.add(p, geo.scale(n, o - c_off))
            pts.append(p)
        return geo.ensure_ccw(pts)


def _incoming_ids(site: Site) -> set[str]:
    return {r for a in site.arms for r in a.incoming}


def _touch_point(road: Road, center: geo.Point) -> tuple[geo.Point, bool]:
    lane = road.lanes[0]
    d_ex = geo.norm(geo.sub(lane.exit, center))
    d_en = geo.norm(geo.sub(lane.entrance, center))
    return (lane.exit, True) if d_ex < d_en else (lane.entrance, False)


@dataclass(frozen=True)
class RoadNetwork:
    sites: tuple[Site, ...]
    roads: Mapping[str, Road]
    connectivity: tuple[tuple[str, str], ...] = ()

    def site(self, site_id: str) -> Site:
        for s in self.sites:
            if s.id == site_id:
                return s
        raise KeyError(site_id)

    def lane(self, lane_id: str) -> Lane:
        for r in self.roads.values():
            for l in r.lanes:
                if l.id == lane_id:
                    return l
        raise KeyError(lane_id)


# ---------------------------------------------------------------------------
# parsing

def _point(raw: Any, what: str) -> geo.Point:
    try:
        x, y = raw
        return (float(x), float(y))
    except (TypeError, ValueError):
        raise SchemaError(f"{what} must be an [x, y] pair, got {raw!r}") from None


def _parse_road(doc: Mapping[str, Any]) -> Road:
    try:
        rid = str(doc["id"])
        raw_lanes = doc["lanes"]
        speed = float(doc["speed_limit_mps"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad road entry: {exc}") from None
    if not isinstance(raw_lanes, list) or not raw_lanes:
        raise GeometryError(f"road {rid} has no lanes")
    lanes = []
    for ld in raw_lanes:
        try:
            lane = Lane(
                id=str(ld["id"]),
                index=int(ld["index"]),
                width=float(ld["width_m"]),
                entrance=_point(ld["entrance"], "entrance"),
                exit=_point(ld["exit"], "exit"),
                road_id=rid,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad lane in road {rid}: {exc}") from None
        if lane.width <= 0:
            raise GeometryError(f"lane {lane.id} has non-positive width {lane.width}")
        if geo.norm(geo.sub(lane.exit, lane.entrance)) <= 1e-9:
            raise GeometryError(f"lane {lane.id} has entrance == exit")
        lanes.append(lane)
    lanes.sort(key=lambda l: l.index)
    if len({l.index for l in lanes}) != len(lanes):
        raise GeometryError(f"road {rid} has duplicate lane indices")
    d0 = lanes[0].direction
    for lane in lanes[1:]:
        if geo.angle_between(d0, lane.direction) > PARALLEL_TOL:
            raise GeometryError(f"lanes of road {rid} are not parallel")
    label = parse_direction(doc["direction"]) if doc.get("direction") else compass_of(d0)
    return Road(rid, tuple(lanes), label, speed)


def _infer_site_type(site: Site) -> RoadType:
    if site.junction_polygon:
        n = len(site.arms)
        if n == 4:
            return RoadType.INTERSECTION
        if n == 3:
            return RoadType.TJUNCTION
        raise GeometryError(f"site {site.id}: junction with {n} arms is neither crossing nor T")
    roads = site.approach_roads
    if len(roads) == 2 and geo.dot(roads[0].direction, roads[1].direction) < -math.cos(PARALLEL_TOL):
        return RoadType.STRAIGHT_ROAD
    raise GeometryError(f"site {site.id}: straight road needs two opposite-direction roads")


def network_from_dict(doc: Mapping[str, Any]) -> RoadNetwork:
    if not isinstance(doc, Mapping) or not isinstance(doc.get("roads"), list) \
            or not isinstance(doc.get("sites"), list):
        raise SchemaError("map must be an object with 'roads' and 'sites' lists")
    roads: dict[str, Road] = {}
    for rd in doc["roads"]:
        road = _parse_road(rd)
        if road.id in roads:
            raise SchemaError(f"duplicate road id {road.id}")
        roads[road.id] = road
    sites = []
    for sd in doc["sites"]:
        try:
            sid = str(sd["id"])
            legs = tuple(str(r) for r in sd["legs"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad site entry: {exc}") from None
        for r in legs:
            if r not in roads:
                raise ConnectivityError(f"site {sid} references unknown road {r}")
        poly_raw = sd.get("junction_polygon") or []
        poly = geo.ensure_ccw([_point(p, "junction_polygon vertex") for p in poly_raw]) if poly_raw else ()
        if poly and (not geo.is_convex(poly) or geo.area(poly) <= 1e-9):
            raise GeometryError(f"site {sid}: junction polygon must be convex and non-degenerate")
        provisional = Site(sid, RoadType.STRAIGHT_ROAD, legs, poly, roads)
        inferred = _infer_site_type(provisional)
        if sd.get("type") is not None and parse_road_type(sd["type"]) is not inferred:
            raise SchemaError(f"site {sid} declared {sd['type']} but geometry is {inferred.value}")
        sites.append(Site(sid, inferred, legs, poly, roads))
    conn = []
    for pair in doc.get("connectivity", []) or []:
        try:
            a, b = (str(pair[0]), str(pair[1]))
        except (TypeError, IndexError):
            raise SchemaError(f"bad connectivity entry {pair!r}") from None
        for r in (a, b):
            if r not in roads:
                raise ConnectivityError(f"connectivity references unknown road {r}")
        conn.append((a, b))
    return RoadNetwork(tuple(sites), roads, tuple(conn))


def parse_map(text: str) -> RoadNetwork:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"map is not valid JSON: {exc}") from None
    return network_from_dict(doc)


def load_map(path) -> RoadNetwork:
    with open(path, encoding="utf-8") as fh:
        return parse_map(fh.read())


def network_to_dict(network: RoadNetwork) -> dict[str, Any]:
    return {
        "sites": [
            {
                "id": s.id,
                "type": s.type.value,
                "legs": list(s.road_ids),
                "junction_polygon": [list(p) for p in s.junction_polygon],
            }
            for s in network.sites
        ],
        "roads": [
            {
                "id": r.id,
                "direction": r.direction_label.value,
                "speed_limit_mps": r.speed_limit,
                "lanes": [
                    {"id": l.id, "index": l.index, "width_m": l.width,
                     "entrance": list(l.entrance), "exit": list(l.exit)}
                    for l in r.lanes
                ],
            }
            for r in network.roads.values()
        ],
        "connectivity": [list(p) for p in network.connectivity],
    }


def serialize_map(network: RoadNetwork) -> str:
    return json.dumps(network_to_dict(network), indent=1) + "\n"


# ---------------------------------------------------------------------------
# candidate enumeration (Alg. 1 lines 4-7)

def enumerate_candidates(network: RoadNetwork, location_type: RoadType, required_lanes: int) -> list[Site]:
    if required_lanes < 1:
        raise ValueError("required_lanes must be >= 1")
    return [s for s in network.sites if s.type is location_type and s.min_lanes >= required_lanes]


def cal_max_lanes(abstract: AccidentAbstract) -> int:
    """Highest lane index any participant occupies while moving.

    Every ChangeLane shifts one lane to the right, so the demand is the running
    lane plus the number of lane changes.
    """
    return max(p.running_lane + sum(a is DrivingAction.CHANGE_LANE for a in p.actions)
               for p in abstract.participants)


# ---------------------------------------------------------------------------
# direction / lane remapping (Alg. 1 lines 8-11)

@dataclass(frozen=True)
class ActionBinding:
    """Road geometry one action is bound to."""

    action: DrivingAction
    road: Road
    lane: Lane
    heading: geo.Point
    target_road: Road | None = None
    target_lane: Lane | None = None


@dataclass(frozen=True)
class ParticipantBinding:
    participant_id: str
    direction: Direction
    running_lane: int
    road_id: str
    heading: geo.Point
    actions: tuple[ActionBinding, ...]


@dataclass(frozen=True)
class SiteBinding:
    site: Site
    rotation: float  # radians applied to compass headings
    participants: Mapping[str, ParticipantBinding]

    @property
    def driving_directions(self) -> dict[str, Direction]:
        return {pid: b.direction for pid, b in self.participants.items()}

    @property
    def running_lanes(self) -> dict[str, int]:
        return {pid: b.running_lane for pid, b in self.participants.items()}


def _compass_vec(d: Direction) -> geo.Point:
    a = math.radians(d.angle_deg)
    return (math.cos(a), math.sin(a))


def _match_road(roads: Sequence[Road], heading: geo.Point) -> Road | None:
    best = max(roads, key=lambda r: geo.dot(r.direction, heading), default=None)
    if best is not None and geo.angle_between(best.direction, heading) <= HEADING_MATCH_TOL:
        return best
    return None


def _bind_vehicle(site: Site, p: ParticipantSpec, heading: geo.Point) -> ParticipantBinding:
    road = _match_road(site.incoming_roads, heading)
    if road is None:
        raise UnmappableDirections(f"no approach road heading {p.driving_direction.label} for {p.id}")
    lane_idx = p.running_lane
    if lane_idx > len(road.lanes):
        raise UnmappableDirections(f"{p.id}: road {road.id} has no lane {lane_idx}")
    start_road = road
    bindings = []
    for act in p.actions:
        lane = road.lane(lane_idx)
        if act in (DrivingAction.FOLLOW_LANE, DrivingAction.STOP, DrivingAction.DRIVE_OFF_ROAD,
                   DrivingAction.DRIVE_INTO_ROADS):
            bindings.append(ActionBinding(act, road, lane, road.direction))
        elif act is DrivingAction.CHANGE_LANE:
            if lane_idx + 1 > len(road.lanes):
                raise UnmappableDirections(f"{p.id}: no lane right of lane {lane_idx} on {road.id}")
            target = road.lane(lane_idx + 1)
            bindings.append(ActionBinding(act, road, lane, road.direction, road, target))
            lane_idx += 1
        elif act is DrivingAction.RETROGRADE:
            opp = site.opposing_road(road)
            if opp is None:
                raise UnmappableDirections(f"{p.id}: retrograde needs an opposing road next to {road.id}")
            bindings.append(ActionBinding(act, road, lane, road.direction, opp, opp.lane(1)))
        elif act in (DrivingAction.TURN_LEFT, DrivingAction.TURN_RIGHT, DrivingAction.VEHICLE_CROSS,
                     DrivingAction.UTURN):
            if act is not DrivingAction.UTURN and site.type is RoadType.STRAIGHT_ROAD:
                raise UnmappableDirections(f"{p.id}: {act.value} needs a junction")
            dest = site.destination_road(road, act)
            if dest is None:
                raise UnmappableDirections(f"{p.id}: site {site.id} has no {act.value} exit from {road.id}")
            new_idx = 1 if act is DrivingAction.UTURN else min(lane_idx, len(dest.lanes))
            bindings.append(ActionBinding(act, road, lane, road.direction, dest, dest.lane(new_idx)))
            road, lane_idx = dest, new_idx
        else:
            raise UnmappableDirections(f"{p.id}: vehicle cannot perform {act.value}")
    return ParticipantBinding(p.id, start_road.direction_label, p.running_lane, start_road.id,
                              start_road.direction, tuple(bindings))


def _bind_pedestrian(site: Site, p: ParticipantSpec, heading: geo.Point) -> ParticipantBinding:
    bindings = []
    road_id = ""
    for act in p.actions:
        if act is DrivingAction.PEDESTRIAN_CROSS:
            roads = [r for r in site.approach_roads if abs(geo.dot(r.direction, heading)) < math.sin(HEADING_MATCH_TOL)]
        else:
            roads = [r for r in site.approach_roads if geo.dot(r.direction, heading) > math.cos(HEADING_MATCH_TOL)]
        if not roads:
            raise UnmappableDirections(f"{p.id}: no road to {act.value} heading {p.driving_direction.label}")
        road = roads[0]
        lane_idx = min(p.running_lane, len(road.lanes))
        bindings.append(ActionBinding(act, road, road.lane(lane_idx), heading))
        road_id = road_id or road.id
    return ParticipantBinding(p.id, compass_of(heading), p.running_lane, road_id, heading, tuple(bindings))


def convert_info(abstract: AccidentAbstract, site: Site) -> SiteBinding:
    """Rotate the abstract's compass directions onto the site's legs.

    Every rotation that sends the striker's direction onto an approach road is
    tried, roads already matching the striker's compass direction first and
    the rest in map order; the first rotation under which all participants and
    their actions can be bound wins.
    """
    striker = abstract.striker
    anchor = math.radians(striker.driving_direction.angle_deg)
    striker_vec = _compass_vec(striker.driving_direction)
    roads = sorted(site.incoming_roads,
                   key=lambda r: geo.angle_between(r.direction, striker_vec) > HEADING_MATCH_TOL)
    errors = []
    for road in roads:
        rotation = geo.heading(road.direction) - anchor
        try:
            bound = {}
            for p in abstract.participants:
                h = geo.rotate(_compass_vec(p.driving_direction), rotation)
                bound[p.id] = _bind_vehicle(site, p, h) if p.is_vehicle else _bind_pedestrian(site, p, h)
        except UnmappableDirections as exc:
            errors.append(str(exc))
            continue
        return SiteBinding(site, rotation, bound)
    detail = "; ".join(dict.fromkeys(errors)) or "site has no approach roads"
    raise UnmappableDirections(f"site {site.id}: {detail}")
