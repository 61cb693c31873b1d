"""End-to-end trajectory planning over candidate sites of a road network."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from crashsynth import geometry as geo
from crashsynth.constraints import regions
from crashsynth.constraints.builders import build_scenario_constraints, build_skeleton
from crashsynth.constraints.plan import ActionTrajectory, ParticipantPlan, PlanSkeleton, SolverConfig, Waypoint
from crashsynth.constraints.solver import plan_values, solve
from crashsynth.constraints.verify import verify_scenario
from crashsynth.errors import (
    AllSitesInfeasible,
    BackendError,
    DegenerateCollisionArea,
    Infeasible,
    NoCandidateSite,
    NoOverlap,
    SchemaError,
    SolverTimeout,
    UnboundLane,
    UnmappableDirections,
    UnsupportedAction,
)
from crashsynth.model import AccidentAbstract, DrivingAction, abstract_from_dict, abstract_to_dict
from crashsynth.roadmap import ParticipantBinding, RoadNetwork, Site, SiteBinding, cal_max_lanes, convert_info, \
    enumerate_candidates

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    min_collision_area: float = 1.0
    max_scenarios: int = 3
    jobs: int = 1


@dataclass(frozen=True)
class CollisionArea:
    polygon: geo.Polygon
    source: tuple[str, str]

    @property
    def area(self) -> float:
        return geo.area(self.polygon)


@dataclass(frozen=True)
class ReconstructedScenario:
    abstract: AccidentAbstract
    binding: SiteBinding
    plans: dict[str, ParticipantPlan]
    collision_area: CollisionArea
    skeleton: PlanSkeleton
    config: SolverConfig

    @property
    def site(self) -> Site:
        return self.binding.site

    @property
    def environment(self) -> dict[str, str | None]:
        a = self.abstract
        return {"weather": a.weather.value if a.weather else None,
                "lighting": a.lighting.value if a.lighting else None}


@dataclass(frozen=True)
class SiteOutcome:
    site_id: str
    scenario: ReconstructedScenario | None = None
    error: str = ""
    reason: str = ""  # exception class name on failure


def drivable_area(binding: ParticipantBinding, site: Site) -> geo.Polygon:
    """Convex region a participant's last action can reach, from its bound lanes."""
    if not binding.actions:
        raise UnboundLane(f"{binding.participant_id} has no bound actions")
    ab = binding.actions[-1]
    act = ab.action
    if ab.lane is None:
        raise UnboundLane(f"{binding.participant_id}: {act.value} is not bound to a lane")
    if act in (DrivingAction.FOLLOW_LANE, DrivingAction.STOP):
        return geo.ensure_ccw(ab.lane.rect())
    if act is DrivingAction.CHANGE_LANE:
        return regions.hull(ab.lane.rect(), ab.target_lane.rect())
    if act in (DrivingAction.TURN_LEFT, DrivingAction.TURN_RIGHT, DrivingAction.VEHICLE_CROSS):
        return regions.hull(site.junction_polygon, *(l.rect() for l in ab.target_road.lanes))
    if act is DrivingAction.UTURN:
        base = site.junction_polygon or regions.hull(*(l.rect() for l in ab.road.lanes))
        return regions.hull(base, *(l.rect() for l in ab.target_road.lanes))
    if act is DrivingAction.RETROGRADE:
        return geo.ensure_ccw(ab.target_lane.rect())
    if act in (DrivingAction.DRIVE_OFF_ROAD, DrivingAction.DRIVE_INTO_ROADS):
        return regions.hull(ab.road.roadside(), ab.lane.rect())
    if act is DrivingAction.PEDESTRIAN_CROSS:
        return site.crosswalk(ab.road)
    return geo.ensure_ccw(ab.road.roadside())


def compute_collision_area(striker_area: Sequence[geo.Point], victim_area: Sequence[geo.Point], *,
                           min_area: float = 1.0, source: tuple[str, str] = ("striker", "victim")
                           ) -> CollisionArea:
    a, b = geo.ensure_ccw(striker_area), geo.ensure_ccw(victim_area)
    if geo.area(a) <= geo.EPS or geo.area(b) <= geo.EPS:
        raise DegenerateCollisionArea("drivable areas must have positive area")
    clipped = geo.clip_convex(a, b)
    poly = geo.convex_hull(clipped) if len(clipped) >= 3 else ()
    if len(poly) < 3 or geo.area(poly) < min_area:
        raise NoOverlap(f"drivable areas overlap by {geo.area(poly) if poly else 0.0:.3f} m^2 < {min_area}")
    return CollisionArea(geo.ensure_ccw(poly), source)


def _collision_area(abstract: AccidentAbstract, binding: SiteBinding, min_area: float) -> CollisionArea:
    striker = abstract.striker.id
    area = drivable_area(binding.participants[striker], binding.site)
    victims = [v.id for v in abstract.victims]
    poly = area
    for vid in victims:
        ca = compute_collision_area(poly, drivable_area(binding.participants[vid], binding.site),
                                    min_area=min_area, source=(striker, vid))
        poly = ca.polygon
    return CollisionArea(poly, (striker, ",".join(victims)))


def plan_site(abstract: AccidentAbstract, site: Site, config: PlannerConfig) -> ReconstructedScenario:
    """Bind, clip, build, solve and re-verify for one candidate site."""
    binding = convert_info(abstract, site)
    ca = _collision_area(abstract, binding, config.min_collision_area)
    cs = build_scenario_constraints(abstract, binding, ca.polygon, config.solver)
    plans = solve(cs, config.solver)
    # two independent checks: relations re-evaluated numerically, and the geometric re-verifier
    bad = cs.violations(plan_values(plans, cs.skeleton), eq_tol=config.solver.epsilon)
    problems = [str(c) for c in bad]
    problems += [str(v) for v in verify_scenario(
        plans, cs.skeleton, site, ca.polygon, abstract.crash_type,
        config.solver.heading_bands[abstract.crash_type], vehicle_width=config.solver.vehicle_width,
        dt_min=config.solver.dt_min, dt_max=config.solver.dt_max)]
    if problems:
        raise BackendError("solution failed re-verification: " + "; ".join(problems[:5]))
    return ReconstructedScenario(abstract, binding, plans, ca, cs.skeleton, config.solver)


EXPECTED_FAILURES = (UnmappableDirections, NoOverlap, DegenerateCollisionArea, Infeasible, SolverTimeout,
                     BackendError, UnsupportedAction, UnboundLane)


def _attempt(args) -> SiteOutcome:
    abstract, site, config = args
    try:
        return SiteOutcome(site.id, plan_site(abstract, site, config))
    except EXPECTED_FAILURES as exc:
        log.debug("site %s failed: %s", site.id, exc)
        return SiteOutcome(site.id, None, str(exc), type(exc).__name__)


def plan_sites(abstract: AccidentAbstract, network: RoadNetwork, config: PlannerConfig | None = None
               ) -> list[SiteOutcome]:
    """Try every candidate site (map order) until ``max_scenarios`` succeed.

    Raises NoCandidateSite when no site matches the road type and lane demand.
    """
    config = config or PlannerConfig()
    cands = enumerate_candidates(network, abstract.collision_location, cal_max_lanes(abstract))
    if not cands:
        raise NoCandidateSite(
            f"no {abstract.collision_location.value} site with >= {cal_max_lanes(abstract)} lanes per road")
    outcomes: list[SiteOutcome] = []
    if config.jobs > 1 and len(cands) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_attempt, [(abstract, s, config) for s in cands]))
        wins = 0
        for r in results:
            if wins >= config.max_scenarios:
                break
            outcomes.append(r)
            wins += r.scenario is not None
        return outcomes
    wins = 0
    for site in cands:
        r = _attempt((abstract, site, config))
        outcomes.append(r)
        wins += r.scenario is not None
        if wins >= config.max_scenarios:
            break
    return outcomes


def plan_scenario(abstract: AccidentAbstract, network: RoadNetwork, config: PlannerConfig | None = None
                  ) -> list[ReconstructedScenario]:
    outcomes = plan_sites(abstract, network, config)
    found = [o.scenario for o in outcomes if o.scenario is not None]
    if not found:
        raise AllSitesInfeasible({o.site_id: o.error for o in outcomes})
    return found


# ---------------------------------------------------------------------------
# export

def _r(x: float) -> float:
    return float(f"{x:.12g}") if abs(x) >= 1e-12 else 0.0


def scenario_to_dict(scenario: ReconstructedScenario) -> dict[str, Any]:
    parts = []
    for p in scenario.abstract.participants:
        plan = scenario.plans[p.id]
        entries = []
        t0 = 0.0
        for traj in plan.trajectories:
            t = t0
            wps = []
            durations = [_r(d) for d in traj.durations]
            # times accumulate the rounded durations so a reloaded scenario serializes identically
            for i, w in enumerate(traj.waypoints):
                wps.append({"x": _r(w.x), "y": _r(w.y), "v": _r(w.v), "t": _r(t)})
                if i < len(durations):
                    t += durations[i]
            t0 = t
            b = scenario.binding.participants[p.id].actions[len(entries)]
            entries.append({"action": traj.action.value, "lane_id": b.lane.id, "waypoints": wps,
                            "durations": durations})
        parts.append({"id": p.id, "role": p.role.value, "plan": entries})
    return {
        "abstract": abstract_to_dict(scenario.abstract),
        "site_id": scenario.site.id,
        "environment": scenario.environment,
        "participants": parts,
        "collision_area": [[_r(x), _r(y)] for x, y in scenario.collision_area.polygon],
        "collision_area_source": list(scenario.collision_area.source),
    }


def serialize_scenario(scenario: ReconstructedScenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=1) + "\n"


def scenario_from_dict(doc: Mapping[str, Any], network: RoadNetwork,
                       solver: SolverConfig | None = None) -> ReconstructedScenario:
    """Rebuild a scenario written by ``serialize_scenario`` against the map it was planned on."""
    solver = solver or SolverConfig()
    try:
        abstract = abstract_from_dict(doc["abstract"])
        site = network.site(doc["site_id"])
        binding = convert_info(abstract, site)
        plans = {}
        for entry in doc["participants"]:
            trajs = []
            for act in entry["plan"]:
                wps = tuple(Waypoint(float(w["x"]), float(w["y"]), float(w["v"])) for w in act["waypoints"])
                trajs.append(ActionTrajectory(DrivingAction(act["action"]), wps,
                                              tuple(float(d) for d in act["durations"])))
            plans[entry["id"]] = ParticipantPlan(entry["id"], tuple(trajs))
        polygon = tuple((float(x), float(y)) for x, y in doc["collision_area"])
        source = tuple(doc.get("collision_area_source", ("", "")))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed scenario document: {exc!r}") from None
    return ReconstructedScenario(abstract, binding, plans, CollisionArea(polygon, source),
                                 build_skeleton(abstract, binding, solver), solver)


def parse_scenario(text: str, network: RoadNetwork, solver: SolverConfig | None = None) -> ReconstructedScenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scenario is not valid JSON: {exc}") from None
    return scenario_from_dict(doc, network, solver)


__all__ = [
    "CollisionArea", "PlannerConfig", "ReconstructedScenario", "SiteOutcome", "compute_collision_area",
    "drivable_area", "parse_scenario", "plan_scenario", "plan_site", "plan_sites", "scenario_from_dict",
    "scenario_to_dict", "serialize_scenario",
]
