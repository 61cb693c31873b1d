"""Layered accident abstract: environment, road network and dynamic objects.

The abstract is the hand-off format between extraction and planning.  All
types are frozen dataclasses; ``parse_abstract``/``serialize_abstract`` map
them to and from the JSON document format::

    {"environment": {"weather", "lighting"},
     "road": {"lane_num", "collision_location", "speed_limit_mph"},
     "dynamic": {"participants": [...], "crash_type"}}
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Mapping

from crashsynth.errors import MissingCore, SchemaError, SemanticError, UnknownAction

MPH_TO_MPS = 0.44704


class Weather(str, Enum):
    CLEAR = "Clear"
    CLOUDY = "Cloudy"
    RAINY = "Rainy"
    FOGGY = "Foggy"
    SNOWY = "Snowy"


class Lighting(str, Enum):
    DAYLIGHT = "Daylight"
    DARK = "Dark"
    DARK_LIGHTED = "DarkLighted"


class RoadType(str, Enum):
    INTERSECTION = "Intersection"
    TJUNCTION = "TJunction"
    STRAIGHT_ROAD = "StraightRoad"


class ParticipantKind(str, Enum):
    VEHICLE = "Vehicle"
    PEDESTRIAN = "Pedestrian"


class Role(str, Enum):
    STRIKER = "Striker"
    VICTIM = "Victim"


class Direction(str, Enum):
    NORTH = "North"
    SOUTH = "South"
    EAST = "East"
    WEST = "West"

    @property
    def angle_deg(self) -> float:
        return {"East": 0.0, "North": 90.0, "West": 180.0, "South": 270.0}[self.value]

    @property
    def label(self) -> str:
        return self.value.lower() + "bound"


class CrashType(str, Enum):
    REAR_END = "RearEnd"
    FRONTAL = "Frontal"
    FRONT_TO_SIDE = "FrontToSide"


class DrivingAction(str, Enum):
    UTURN = "UTurn"
    STOP = "Stop"
    DRIVE_INTO_ROADS = "DriveIntoRoads"
    VEHICLE_CROSS = "VehicleCross"
    TURN_LEFT = "TurnLeft"
    TURN_RIGHT = "TurnRight"
    FOLLOW_LANE = "FollowLane"
    CHANGE_LANE = "ChangeLane"
    DRIVE_OFF_ROAD = "DriveOffRoad"
    RETROGRADE = "Retrograde"
    PEDESTRIAN_CROSS = "PedestrianCross"
    PEDESTRIAN_WALK = "PedestrianWalk"

    @property
    def label(self) -> str:
        return _CANONICAL_LABELS[self]

    @property
    def is_pedestrian(self) -> bool:
        return self in (DrivingAction.PEDESTRIAN_CROSS, DrivingAction.PEDESTRIAN_WALK)


_CANONICAL_LABELS = {
    DrivingAction.UTURN: "u-turn",
    DrivingAction.STOP: "stop",
    DrivingAction.DRIVE_INTO_ROADS: "drive into roads",
    DrivingAction.VEHICLE_CROSS: "vehicle cross",
    DrivingAction.TURN_LEFT: "turn left",
    DrivingAction.TURN_RIGHT: "turn right",
    DrivingAction.FOLLOW_LANE: "follow lane",
    DrivingAction.CHANGE_LANE: "change lane",
    DrivingAction.DRIVE_OFF_ROAD: "drive off road",
    DrivingAction.RETROGRADE: "retrograde",
    DrivingAction.PEDESTRIAN_CROSS: "pedestrian cross",
    DrivingAction.PEDESTRIAN_WALK: "pedestrian walk",
}

_ACTION_ALIASES = {
    "u turn": DrivingAction.UTURN,
    "uturn": DrivingAction.UTURN,
    "stop": DrivingAction.STOP,
    "drive into roads": DrivingAction.DRIVE_INTO_ROADS,
    "drive into road": DrivingAction.DRIVE_INTO_ROADS,
    "vehicle cross": DrivingAction.VEHICLE_CROSS,
    "vehicle across": DrivingAction.VEHICLE_CROSS,
    "turn left": DrivingAction.TURN_LEFT,
    "left turn": DrivingAction.TURN_LEFT,
    "turn right": DrivingAction.TURN_RIGHT,
    "right turn": DrivingAction.TURN_RIGHT,
    "follow lane": DrivingAction.FOLLOW_LANE,
    "change lane": DrivingAction.CHANGE_LANE,
    "lane change": DrivingAction.CHANGE_LANE,
    "drive off road": DrivingAction.DRIVE_OFF_ROAD,
    "driving off the road": DrivingAction.DRIVE_OFF_ROAD,
    "drive off the road": DrivingAction.DRIVE_OFF_ROAD,
    "retrograde": DrivingAction.RETROGRADE,
    "pedestrian cross": DrivingAction.PEDESTRIAN_CROSS,
    "pedestrian walk": DrivingAction.PEDESTRIAN_WALK,
}

VEHICLE_ACTIONS = frozenset(a for a in DrivingAction if not a.is_pedestrian)
PEDESTRIAN_ACTIONS = frozenset(a for a in DrivingAction if a.is_pedestrian)

# Intersection and T-junction ~30 mph, straight road ~50 mph.
DEFAULT_SPEED_LIMITS = {
    RoadType.INTERSECTION: 13.4,
    RoadType.TJUNCTION: 13.4,
    RoadType.STRAIGHT_ROAD: 22.4,
}


def _squash(label: str) -> str:
    label = re.sub(r"(?<=[a-z])(?=[A-Z])", " ", label.strip())
    label = re.sub(r"[-_]+", " ", label.lower())
    return re.sub(r"\s+", " ", label).strip()


def normalize_action(label: str) -> DrivingAction:
    """Map a free-text action label onto the closed vocabulary."""
    if isinstance(label, DrivingAction):
        return label
    key = _squash(str(label))
    try:
        return _ACTION_ALIASES[key]
    except KeyError:
        raise UnknownAction(str(label)) from None


def _enum_lookup(enum_cls, raw: Any, aliases: Mapping[str, Any] = {}):
    if isinstance(raw, enum_cls):
        return raw
    key = _squash(str(raw)).replace(" ", "")
    for member in enum_cls:
        if member.value.lower() == key:
            return member
    if key in aliases:
        return aliases[key]
    raise SchemaError(f"{raw!r} is not a valid {enum_cls.__name__}")


_LIGHTING_ALIASES = {"darklit": Lighting.DARK_LIGHTED, "darkbutlighted": Lighting.DARK_LIGHTED,
                     "day": Lighting.DAYLIGHT, "light": Lighting.DAYLIGHT}
_ROAD_ALIASES = {"tjunction": RoadType.TJUNCTION, "straight": RoadType.STRAIGHT_ROAD,
                 "crossroad": RoadType.INTERSECTION, "crossroads": RoadType.INTERSECTION}
_CRASH_ALIASES = {"rearend": CrashType.REAR_END, "headon": CrashType.FRONTAL,
                  "fronttofront": CrashType.FRONTAL, "sideswipe": CrashType.FRONT_TO_SIDE,
                  "angle": CrashType.FRONT_TO_SIDE}
_DIRECTION_ALIASES = {f"{d.value.lower()}bound": d for d in Direction} | {
    d.value.lower()[0]: d for d in Direction}
_WEATHER_ALIASES = {"rain": Weather.RAINY, "fog": Weather.FOGGY, "snow": Weather.SNOWY,
                    "sunny": Weather.CLEAR, "cloud": Weather.CLOUDY}

parse_weather = lambda raw: _enum_lookup(Weather, raw, _WEATHER_ALIASES)  # noqa: E731
parse_lighting = lambda raw: _enum_lookup(Lighting, raw, _LIGHTING_ALIASES)  # noqa: E731
parse_road_type = lambda raw: _enum_lookup(RoadType, raw, _ROAD_ALIASES)  # noqa: E731
parse_crash_type = lambda raw: _enum_lookup(CrashType, raw, _CRASH_ALIASES)  # noqa: E731
parse_direction = lambda raw: _enum_lookup(Direction, raw, _DIRECTION_ALIASES)  # noqa: E731


@dataclass(frozen=True)
class ParticipantSpec:
    id: str
    kind: ParticipantKind
    role: Role
    driving_direction: Direction
    running_lane: int
    actions: tuple[DrivingAction, ...]

    @property
    def is_vehicle(self) -> bool:
        return self.kind is ParticipantKind.VEHICLE


@dataclass(frozen=True)
class CrashSpec:
    crash_type: CrashType | None
    striker_id: str
    victim_ids: tuple[str, ...]


@dataclass(frozen=True)
class AccidentAbstract:
    """One crash, three layers.  ``None`` marks a field that may still be defaulted."""

    collision_location: RoadType | None
    participants: tuple[ParticipantSpec, ...]
    crash_type: CrashType | None
    weather: Weather | None = None
    lighting: Lighting | None = None
    lane_num: int | None = None
    speed_limit: float | None = None  # m/s
    participants_number: int | None = None

    @property
    def crash(self) -> CrashSpec:
        strikers = [p.id for p in self.participants if p.role is Role.STRIKER]
        victims = tuple(p.id for p in self.participants if p.role is Role.VICTIM)
        return CrashSpec(self.crash_type, strikers[0] if strikers else "", victims)

    @property
    def striker(self) -> ParticipantSpec:
        return next(p for p in self.participants if p.role is Role.STRIKER)

    @property
    def victims(self) -> list[ParticipantSpec]:
        return [p for p in self.participants if p.role is Role.VICTIM]

    def participant(self, pid: str) -> ParticipantSpec:
        for p in self.participants:
            if p.id == pid:
                return p
        raise KeyError(pid)

    @property
    def is_complete(self) -> bool:
        return None not in (self.weather, self.lighting, self.lane_num, self.speed_limit,
                            self.collision_location, self.crash_type)


def validate_abstract(abstract: AccidentAbstract, *, require_complete: bool = True) -> AccidentAbstract:
    """Check every type invariant, raising SemanticError on the first violation."""
    parts = abstract.participants
    if not parts:
        raise SemanticError("abstract has no participants")
    ids = [p.id for p in parts]
    if len(set(ids)) != len(ids):
        raise SemanticError(f"duplicate participant ids: {ids}")
    if abstract.participants_number is not None and abstract.participants_number != len(parts):
        raise SemanticError(
            f"ParticipantsNumber={abstract.participants_number} but {len(parts)} participants listed")
    if abstract.lane_num is not None and abstract.lane_num < 1:
        raise SemanticError("lane_num must be positive")
    if abstract.speed_limit is not None and not abstract.speed_limit > 0:
        raise SemanticError("speed_limit must be positive")
    for p in parts:
        if not p.actions:
            raise SemanticError(f"participant {p.id} has no actions")
        if p.running_lane < 1:
            raise SemanticError(f"participant {p.id}: running_lane must be >= 1")
        if abstract.lane_num is not None and p.running_lane > abstract.lane_num:
            raise SemanticError(
                f"participant {p.id}: running_lane {p.running_lane} > lane_num {abstract.lane_num}")
        allowed = VEHICLE_ACTIONS if p.is_vehicle else PEDESTRIAN_ACTIONS
        bad = [a.value for a in p.actions if a not in allowed]
        if bad:
            raise SemanticError(f"participant {p.id} ({p.kind.value}) cannot perform {bad}")
        if not p.is_vehicle and p.role is not Role.VICTIM:
            raise SemanticError(f"pedestrian {p.id} must be a victim")
    strikers = [p for p in parts if p.role is Role.STRIKER]
    if len(strikers) != 1:
        raise SemanticError(f"expected exactly one striker, found {len(strikers)}")
    if not any(p.role is Role.VICTIM for p in parts):
        raise SemanticError("expected at least one victim")
    if require_complete:
        missing = [name for name in ("weather", "lighting", "lane_num", "speed_limit",
                                     "collision_location", "crash_type")
                   if getattr(abstract, name) is None]
        if missing:
            raise SemanticError(f"abstract is missing {missing}")
    return abstract


def apply_defaults(partial: AccidentAbstract, speed_limits: Mapping[RoadType, float] | None = None
                   ) -> AccidentAbstract:
    if not partial.participants:
        raise MissingCore("participants are required and cannot be defaulted")
    if partial.collision_location is None:
        raise MissingCore("collision_location is required and cannot be defaulted")
    limits = {**DEFAULT_SPEED_LIMITS, **(speed_limits or {})}
    filled = replace(
        partial,
        weather=partial.weather or Weather.CLEAR,
        lighting=partial.lighting or Lighting.DAYLIGHT,
        lane_num=partial.lane_num or max(p.running_lane for p in partial.participants),
        speed_limit=partial.speed_limit or limits[partial.collision_location],
        participants_number=(partial.participants_number
                             if partial.participants_number is not None else len(partial.participants)),
    )
    return validate_abstract(filled)


# ---------------------------------------------------------------------------
# JSON document <-> AccidentAbstract

def _positive_int(raw: Any, what: str) -> int:
    try:
        value = int(str(raw).strip())
    except (TypeError, ValueError):
        raise SchemaError(f"{what} must be an integer, got {raw!r}") from None
    return value


def _participant_from_doc(doc: Mapping[str, Any]) -> ParticipantSpec:
    if not isinstance(doc, Mapping):
        raise SchemaError("participant entries must be objects")
    try:
        pid = str(doc["id"])
        raw_actions = doc["actions"]
    except KeyError as exc:
        raise SchemaError(f"participant missing key {exc}") from None
    if isinstance(raw_actions, str) or not isinstance(raw_actions, (list, tuple)):
        raise SchemaError(f"participant {pid}: actions must be a list")
    actions = tuple(normalize_action(a) for a in raw_actions)
    kind_raw = doc.get("kind")
    if kind_raw is None:
        kind = ParticipantKind.PEDESTRIAN if actions and all(a.is_pedestrian for a in actions) \
            else ParticipantKind.VEHICLE
    else:
        kind = _enum_lookup(ParticipantKind, kind_raw)
    for key in ("role", "driving_direction", "running_lane"):
        if key not in doc:
            raise SchemaError(f"participant {pid} missing key {key!r}")
    return ParticipantSpec(
        id=pid,
        kind=kind,
        role=_enum_lookup(Role, doc["role"]),
        driving_direction=parse_direction(doc["driving_direction"]),
        running_lane=_positive_int(doc["running_lane"], "running_lane"),
        actions=actions,
    )


def abstract_from_dict(doc: Mapping[str, Any], *, fill_defaults: bool = True) -> AccidentAbstract:
    if not isinstance(doc, Mapping):
        raise SchemaError("abstract document must be a JSON object")
    env = doc.get("environment", {}) or {}
    road = doc.get("road", {}) or {}
    dyn = doc.get("dynamic")
    if not isinstance(env, Mapping) or not isinstance(road, Mapping):
        raise SchemaError("environment and road must be objects")
    if not isinstance(dyn, Mapping):
        raise SchemaError("missing 'dynamic' object")
    raw_parts = dyn.get("participants", [])
    if not isinstance(raw_parts, list):
        raise SchemaError("dynamic.participants must be a list")

    speed = None
    if road.get("speed_limit_mps") is not None:
        speed = float(road["speed_limit_mps"])
    elif road.get("speed_limit_mph") is not None:
        try:
            speed = float(road["speed_limit_mph"]) * MPH_TO_MPS
        except (TypeError, ValueError):
            raise SchemaError(f"bad speed_limit_mph {road['speed_limit_mph']!r}") from None

    def opt(value, parser):
        return None if value in (None, "") else parser(value)

    abstract = AccidentAbstract(
        collision_location=opt(road.get("collision_location"), parse_road_type),
        participants=tuple(_participant_from_doc(p) for p in raw_parts),
        crash_type=opt(dyn.get("crash_type"), parse_crash_type),
        weather=opt(env.get("weather"), parse_weather),
        lighting=opt(env.get("lighting"), parse_lighting),
        lane_num=opt(road.get("lane_num"), lambda v: _positive_int(v, "lane_num")),
        speed_limit=speed,
        participants_number=opt(dyn.get("participants_number"),
                                lambda v: _positive_int(v, "participants_number")),
    )
    if fill_defaults:
        return apply_defaults(abstract)
    return validate_abstract(abstract, require_complete=False)


def parse_abstract(text: str, *, fill_defaults: bool = True) -> AccidentAbstract:
    """Parse an abstract JSON document.

    Missing defaultable fields are filled unless ``fill_defaults`` is false, in
    which case a partial (but otherwise valid) abstract is returned.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"abstract is not valid JSON: {exc}") from None
    return abstract_from_dict(doc, fill_defaults=fill_defaults)


def abstract_to_dict(abstract: AccidentAbstract) -> dict[str, Any]:
    val = lambda e: None if e is None else e.value  # noqa: E731
    road: dict[str, Any] = {
        "lane_num": abstract.lane_num,
        "collision_location": val(abstract.collision_location),
        "speed_limit_mph": None if abstract.speed_limit is None else abstract.speed_limit / MPH_TO_MPS,
        "speed_limit_mps": abstract.speed_limit,
    }
    return {
        "environment": {"weather": val(abstract.weather), "lighting": val(abstract.lighting)},
        "road": road,
        "dynamic": {
            "participants_number": abstract.participants_number,
            "participants": [
                {
                    "id": p.id,
                    "kind": p.kind.value,
                    "role": p.role.value,
                    "driving_direction": p.driving_direction.value,
                    "running_lane": p.running_lane,
                    "actions": [a.label for a in p.actions],
                }
                for p in abstract.participants
            ],
            "crash_type": val(abstract.crash_type),
        },
    }


def serialize_abstract(abstract: AccidentAbstract) -> str:
    return json.dumps(abstract_to_dict(abstract), indent=2) + "\n"
