"""Kinematic replay, the SIM validity predicate, SRR and ADS test-case generation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from crashsynth import geometry as geo
from crashsynth.constraints.plan import DEFAULT_HEADING_BANDS, ParticipantPlan
from crashsynth.errors import EmptyInput, MissingEgoChannel
from crashsynth.model import CrashType, DrivingAction, ParticipantKind
from crashsynth.roadmap import Lane, Site

VEHICLE_LENGTH = 4.5
VEHICLE_WIDTH = 1.8
PEDESTRIAN_SIZE = 0.6

CROSSING_EXEMPT = frozenset({DrivingAction.CHANGE_LANE, DrivingAction.RETROGRADE, DrivingAction.DRIVE_OFF_ROAD,
                             DrivingAction.DRIVE_INTO_ROADS, DrivingAction.UTURN})


@dataclass(frozen=True)
class State:
    t: float
    x: float
    y: float
    v: float
    heading: float  # radians
    action_index: int = 0


@dataclass(frozen=True)
class ReplayTrace:
    dt: float
    states: Mapping[str, tuple[State, ...]]
    kinds: Mapping[str, ParticipantKind] = field(default_factory=dict)

    def final(self, pid: str) -> State:
        return self.states[pid][-1]


def _segments(plan: ParticipantPlan):
    """Yield (t0, t1, p0, p1, action_index) over every segment of a plan."""
    t = 0.0
    for k, traj in enumerate(plan.trajectories):
        for i, dt in enumerate(traj.durations):
            yield t, t + dt, traj.waypoints[i].pos, traj.waypoints[i + 1].pos, k
            t += dt


def replay_plan(plan: ParticipantPlan, dt: float = 0.05) -> tuple[State, ...]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    segs = [s for s in _segments(plan) if s[1] > s[0]]
    if not segs:
        return ()
    end = segs[-1][1]
    n = int(math.floor(end / dt + 1e-9))
    times = [round(k * dt, 9) for k in range(n + 1)]
    if end - times[-1] > 1e-9:
        times.append(end)
    out = []
    j = 0
    last_heading = 0.0
    for t in times:
        while j < len(segs) - 1 and t > segs[j][1] + 1e-12:
            j += 1
        t0, t1, p0, p1, k = segs[j]
        f = min(1.0, max(0.0, (t - t0) / (t1 - t0)))
        d = geo.sub(p1, p0)
        length = geo.norm(d)
        if length > 1e-12:
            last_heading = geo.heading(d)
        out.append(State(t, p0[0] + f * d[0], p0[1] + f * d[1], length / (t1 - t0), last_heading, k))
    return tuple(out)


def replay(scenario, network=None, dt: float = 0.05) -> ReplayTrace:
    """Sample every participant's plan at a fixed tick.

    Positions interpolate the waypoints linearly in time, speed is the
    segment's length over its duration and heading its direction.
    """
    del network  # geometry comes from the scenario's own site binding
    kinds = {p.id: p.kind for p in scenario.abstract.participants}
    return ReplayTrace(dt, {pid: replay_plan(plan, dt) for pid, plan in scenario.plans.items()}, kinds)


# ---------------------------------------------------------------------------
# SIM predicate

@dataclass(frozen=True)
class SimTolerances:
    dt: float = 0.05
    vehicle_width: float = VEHICLE_WIDTH
    simultaneity: float = 0.5
    offset: float = 1e-6
    heading_bands: Mapping[CrashType, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_HEADING_BANDS))


@dataclass(frozen=True)
class SimVerdict:
    no_illegal_crossing: bool
    angle_match: bool
    simultaneity: bool
    diagnostics: tuple[dict, ...] = ()

    @property
    def overall(self) -> bool:
        return self.no_illegal_crossing and self.angle_match and self.simultaneity

    def to_dict(self) -> dict[str, Any]:
        return {"no_illegal_crossing": self.no_illegal_crossing, "angle_match": self.angle_match,
                "simultaneity": self.simultaneity, "overall": self.overall,
                "diagnostics": list(self.diagnostics)}


def _within_lane(p: geo.Point, lane: Lane, vehicle_width: float, tol: float) -> bool:
    station = lane.station(p)
    if station < -tol or station > lane.length + tol:
        return False
    return abs(lane.lateral_offset(p)) <= (lane.width - vehicle_width) / 2 + tol


def _allowed_lanes(binding) -> list[Lane]:
    lanes = [binding.lane]
    if binding.action in (DrivingAction.TURN_LEFT, DrivingAction.TURN_RIGHT, DrivingAction.VEHICLE_CROSS):
        lanes += list(binding.target_road.lanes)
    elif binding.target_lane is not None:
        lanes.append(binding.target_lane)
    return lanes


def _final_heading(plan: ParticipantPlan) -> geo.Point:
    wps = plan.trajectories[-1].waypoints
    return geo.sub(wps[-1].pos, wps[-2].pos)


def check_sim(scenario, network=None, tolerances: SimTolerances | None = None) -> SimVerdict:
    tol = tolerances or SimTolerances()
    trace = replay(scenario, network, tol.dt)
    site: Site = scenario.binding.site
    diags: list[dict] = []
    crossing_ok = True
    for p in scenario.abstract.participants:
        if p.kind is not ParticipantKind.VEHICLE:
            continue
        bindings = scenario.binding.participants[p.id].actions
        for st in trace.states[p.id]:
            b = bindings[st.action_index]
            if b.action in CROSSING_EXEMPT:
                continue
            pos = (st.x, st.y)
            if site.junction_polygon and geo.point_in_convex(pos, site.junction_polygon, 1e-9):
                continue
            if any(_within_lane(pos, lane, tol.vehicle_width, tol.offset) for lane in _allowed_lanes(b)):
                continue
            crossing_ok = False
            diags.append({"check": "crossing", "participant": p.id, "action": b.action.value,
                          "t": round(st.t, 6), "x": st.x, "y": st.y})
            break

    lo, hi = tol.heading_bands[scenario.abstract.crash_type]
    striker = scenario.abstract.striker.id
    angle_ok = True
    simul_ok = True
    s_plan = scenario.plans[striker]
    for v in scenario.abstract.victims:
        v_plan = scenario.plans[v.id]
        ang = math.degrees(geo.angle_between(_final_heading(s_plan), _final_heading(v_plan)))
        if not (lo - 1e-6 <= ang <= hi + 1e-6):
            angle_ok = False
            diags.append({"check": "angle", "participant": v.id, "relative_heading_deg": ang, "band": [lo, hi]})
        gap = abs(trace.final(striker).t - trace.final(v.id).t) if trace.states[striker] and trace.states[v.id] \
            else abs(s_plan.total_time - v_plan.total_time)
        if gap > tol.simultaneity:
            simul_ok = False
            diags.append({"check": "simultaneity", "participant": v.id, "gap_s": gap})
    return SimVerdict(crossing_ok, angle_ok, simul_ok, tuple(diags))


def failure_category(verdict: SimVerdict) -> str | None:
    """Fault bucket of a failed verdict: angle problems first, then line crossings."""
    if verdict.overall:
        return None
    if not verdict.angle_match:
        return "crash_type_mismatch"
    if not verdict.no_illegal_crossing:
        return "crossing"
    return "trajectory_planning"


def compute_srr(per_report_results: Sequence[tuple[Any, Sequence[Any]]]) -> float:
    """Fraction of reports whose every trajectory passes SIM.

    Each entry is ``(report, verdicts)`` where verdicts are SimVerdicts or
    booleans.  A report with no reconstructed trajectory counts as failed.
    """
    if not per_report_results:
        raise EmptyInput("SRR needs at least one report")
    passed = 0
    for _, verdicts in per_report_results:
        flags = [v.overall if isinstance(v, SimVerdict) else bool(v) for v in verdicts]
        passed += bool(flags) and all(flags)
    return passed / len(per_report_results)


def srr_table(rows: Iterable[tuple[str, Any, Sequence[Any]]]) -> dict[str, dict[str, float]]:
    """Per road type: report count, fully passing count and SRR (rows are (road_type, report, verdicts))."""
    grouped: dict[str, list] = {}
    for road_type, report, verdicts in rows:
        grouped.setdefault(road_type, []).append((report, verdicts))
    table = {}
    for road_type in sorted(grouped):
        res = grouped[road_type]
        srr = compute_srr(res)
        table[road_type] = {"reports": len(res), "passed": round(srr * len(res)), "srr": srr}
    return table


# ---------------------------------------------------------------------------
# action semantics (road generalization check)

def _direction_class(ref: geo.Point, d: geo.Point) -> str:
    ang = math.degrees(geo.signed_angle(ref, d))
    if abs(ang) <= 30:
        return "same"
    if abs(ang) >= 150:
        return "opposite"
    return "left" if ang > 0 else "right"


def _lanes_at(site: Site, p: geo.Point) -> list[Lane]:
    # strict interior: a point on the outer lane line already counts as roadside
    return [l for r in site.approach_roads for l in r.lanes
            if -1e-6 <= l.station(p) <= l.length + 1e-6 and abs(l.lateral_offset(p)) < l.width / 2 - 1e-6]


EXPECTED_END = {
    DrivingAction.FOLLOW_LANE: {"same"},
    DrivingAction.STOP: {"same"},
    DrivingAction.CHANGE_LANE: {"same"},
    DrivingAction.DRIVE_INTO_ROADS: {"same"},
    DrivingAction.TURN_LEFT: {"left", "junction"},
    DrivingAction.TURN_RIGHT: {"right", "junction"},
    DrivingAction.VEHICLE_CROSS: {"same", "junction"},
    DrivingAction.UTURN: {"opposite", "junction"},
    DrivingAction.RETROGRADE: {"opposite"},
    DrivingAction.DRIVE_OFF_ROAD: {"offroad"},
}


def action_semantics(scenario) -> list[tuple[str, str, str, bool]]:
    """(participant, action, turn sense, destination ok) for every action.

    Turn sense is the sign of the heading change across a turning action.
    Destination ok means the action ends in the junction or in a lane whose
    direction class (relative to the road it started on) fits the action,
    e.g. a left turn never ends in an opposing lane.
    """
    site = scenario.binding.site
    labels = []
    for p in scenario.abstract.participants:
        plan = scenario.plans[p.id]
        bindings = scenario.binding.participants[p.id].actions
        for traj, b in zip(plan.trajectories, bindings):
            pts = [w.pos for w in traj.waypoints]
            sense = "none"
            if b.action in (DrivingAction.TURN_LEFT, DrivingAction.TURN_RIGHT, DrivingAction.UTURN):
                total = sum(geo.signed_angle(geo.sub(pts[i + 1], pts[i]), geo.sub(pts[i + 2], pts[i + 1]))
                            for i in range(len(pts) - 2))
                sense = "left" if total > 0 else "right" if total < 0 else "straight"
            end = pts[-1]
            if b.action.is_pedestrian:
                ok = True
            else:
                classes = {_direction_class(b.road.direction, l.direction) for l in _lanes_at(site, end)}
                if site.junction_polygon and geo.point_in_convex(end, site.junction_polygon, 1e-9):
                    classes.add("junction")
                if not classes:
                    classes.add("offroad")
                expected = EXPECTED_END[b.action]
                ok = bool(classes & expected) and not (classes & {"opposite"} and "opposite" not in expected)
            labels.append((p.id, b.action.value, sense, ok))
    return labels


# ---------------------------------------------------------------------------
# test generation and the collision oracle

@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class despite the name

    ego_id: str
    start_pose: tuple[float, float, float]  # x, y, heading (radians)
    destination: tuple[float, float]
    npcs: Mapping[str, tuple[tuple[float, float, float, float], ...]]  # id -> (t, x, y, v)
    npc_kinds: Mapping[str, str] = field(default_factory=dict)
    v_min: float = 0.5
    environment: Mapping[str, Any] = field(default_factory=dict)
    ego_speed: float = 0.0  # planned mean speed, used by the stub agent

    def to_dict(self) -> dict[str, Any]:
        return {
            "ego": {"id": self.ego_id, "start_pose": list(self.start_pose), "destination": list(self.destination)},
            "npcs": [{"id": pid, "kind": self.npc_kinds.get(pid, "Vehicle"),
                      "schedule": [{"t": t, "x": x, "y": y, "v": v} for t, x, y, v in sched]}
                     for pid, sched in self.npcs.items()],
            "oracle": {"type": "collision_moving_ego", "v_min_mps": self.v_min},
            "environment": dict(self.environment),
            "ego_speed_mps": self.ego_speed,
        }


def test_case_from_dict(doc: Mapping[str, Any]) -> TestCase:
    ego = doc["ego"]
    npcs = {n["id"]: tuple((float(s["t"]), float(s["x"]), float(s["y"]), float(s["v"])) for s in n["schedule"])
            for n in doc.get("npcs", [])}
    kinds = {n["id"]: n.get("kind", "Vehicle") for n in doc.get("npcs", [])}
    return TestCase(str(ego["id"]), tuple(float(v) for v in ego["start_pose"]),
                    tuple(float(v) for v in ego["destination"]), npcs, kinds,
                    float(doc.get("oracle", {}).get("v_min_mps", 0.5)), doc.get("environment", {}),
                    float(doc.get("ego_speed_mps", 0.0)))


test_case_from_dict.__test__ = False


def _schedule(plan: ParticipantPlan) -> tuple[tuple[float, float, float, float], ...]:
    return tuple((t, wp.x, wp.y, wp.v) for _, wp, t in plan.timed_waypoints())


def generate_tests(scenario, v_min: float = 0.5) -> list[TestCase]:
    """One test per vehicle participant acting as ego; everyone else follows its plan verbatim."""
    cases = []
    kinds = {p.id: p.kind for p in scenario.abstract.participants}
    for p in scenario.abstract.participants:
        if p.kind is not ParticipantKind.VEHICLE:
            continue
        plan = scenario.plans[p.id]
        first = plan.trajectories[0].waypoints
        heading = geo.heading(geo.sub(first[1].pos, first[0].pos))
        dist = sum(geo.norm(geo.sub(b.pos, a.pos)) for traj in plan.trajectories
                   for a, b in zip(traj.waypoints, traj.waypoints[1:]))
        npcs = {q: _schedule(scenario.plans[q]) for q in scenario.plans if q != p.id}
        cases.append(TestCase(
            p.id, (first[0].x, first[0].y, heading), plan.final_position, npcs,
            {q: kinds[q].value for q in npcs}, v_min, scenario.environment,
            dist / plan.total_time if plan.total_time > 0 else 0.0))
    return cases


@dataclass(frozen=True)
class OracleVerdict:
    kind: str  # Collision | PassiveCollision | NoCollision
    t: float | None = None
    other: str | None = None
    ego_speed: float | None = None

    @property
    def counted(self) -> bool:
        return self.kind == "Collision"

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": self.kind, "t": self.t, "other": self.other, "ego_speed_mps": self.ego_speed}


def _interp_schedule(sched, t):
    if t <= sched[0][0]:
        return sched[0][1], sched[0][2], 0.0, None
    for (t0, x0, y0, _), (t1, x1, y1, _) in zip(sched, sched[1:]):
        if t0 <= t <= t1 and t1 > t0:
            f = (t - t0) / (t1 - t0)
            d = (x1 - x0, y1 - y0)
            return x0 + f * d[0], y0 + f * d[1], math.hypot(*d) / (t1 - t0), math.atan2(d[1], d[0])
    return sched[-1][1], sched[-1][2], 0.0, None


def stub_agent_trace(test: TestCase, *, speed: float | None = None, dt: float = 0.05,
                     horizon: float | None = None) -> ReplayTrace:
    """Ego drives straight along its start heading at constant speed; NPCs follow their schedules."""
    v = test.ego_speed if speed is None else speed
    end = horizon if horizon is not None else max((s[-1][0] for s in test.npcs.values() if s), default=0.0)
    n = int(math.floor(end / dt + 1e-9))
    times = [round(k * dt, 9) for k in range(n + 1)]
    x0, y0, th = test.start_pose
    ego = tuple(State(t, x0 + v * t * math.cos(th), y0 + v * t * math.sin(th), v, th) for t in times)
    states = {test.ego_id: ego}
    kinds = {test.ego_id: ParticipantKind.VEHICLE}
    for pid, sched in test.npcs.items():
        rows = []
        heading = 0.0
        for t in times:
            x, y, sp, h = _interp_schedule(sched, t)
            heading = h if h is not None else heading
            rows.append(State(t, x, y, sp, heading))
        states[pid] = tuple(rows)
        kinds[pid] = ParticipantKind(test.npc_kinds.get(pid, "Vehicle"))
    return ReplayTrace(dt, states, kinds)


def _footprint(st: State, kind: ParticipantKind) -> geo.Polygon:
    if kind is ParticipantKind.PEDESTRIAN:
        return geo.box_corners((st.x, st.y), st.heading, PEDESTRIAN_SIZE, PEDESTRIAN_SIZE)
    return geo.box_corners((st.x, st.y), st.heading, VEHICLE_LENGTH, VEHICLE_WIDTH)


def collision_oracle(trace: ReplayTrace, ego_id: str, v_min: float = 0.5) -> OracleVerdict:
    """Collision only if footprints overlap while the ego moves at >= ``v_min``."""
    if ego_id not in trace.states or not trace.states[ego_id]:
        raise MissingEgoChannel(f"trace has no states for ego {ego_id!r}")
    ego = trace.states[ego_id]
    passive = None
    for i, st in enumerate(ego):
        ego_box = _footprint(st, trace.kinds.get(ego_id, ParticipantKind.VEHICLE))
        for pid, states in trace.states.items():
            if pid == ego_id or i >= len(states):
                continue
            other = states[i]
            if geo.convex_overlap(ego_box, _footprint(other, trace.kinds.get(pid, ParticipantKind.VEHICLE))):
                if st.v >= v_min:
                    return OracleVerdict("Collision", st.t, pid, st.v)
                if passive is None:
                    passive = OracleVerdict("PassiveCollision", st.t, pid, st.v)
    return passive or OracleVerdict("NoCollision")


def verdict_lines(records: Iterable[Mapping[str, Any]]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
