"""Constraint groups for each driving action, action chaining and the crash.

Groups: 1 start/end regions and heading along the lane, 2 path geometry,
3 timing and speed, 4 chaining of consecutive actions, 5 the crash itself.
Relations of actions outside ``PRINTED_ACTIONS`` are this package's own
extension and carry ``extrapolated=True`` in their tags.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

from crashsynth import geometry as geo
from crashsynth.constraints import regions
from crashsynth.constraints.expr import Atom, ConstraintSet, Constraint, Poly, Tag, any_of, eq, ge, gt, le
from crashsynth.constraints.plan import TURNS, ActionVars, PlanSkeleton, SolverConfig
from crashsynth.errors import DegenerateCollisionArea, UnboundLane, UnsupportedAction
from crashsynth.model import AccidentAbstract, CrashType, DrivingAction, RoadType
from crashsynth.roadmap import Lane, SiteBinding, Site

AXIS_TOL = 1e-9
LANE_CONE_DEG = 20.0
LATERAL_CONE_DEG = 45.0
LATERAL_ACTIONS = frozenset({DrivingAction.CHANGE_LANE, DrivingAction.DRIVE_OFF_ROAD,
                             DrivingAction.DRIVE_INTO_ROADS, DrivingAction.RETROGRADE})
CROSS_SWERVE_DEG = 15.0  # max deviation of a crossing segment from the approach heading

PRINTED_ACTIONS = frozenset({DrivingAction.FOLLOW_LANE, DrivingAction.TURN_LEFT, DrivingAction.VEHICLE_CROSS})


def fd(w_i, w_j, lane: Lane) -> bool:
    """True when ``w_j`` is ahead of ``w_i`` along ``lane``.

    Each axis conjunct compares the sign of the waypoint displacement with the
    lane's direction; an axis along which the lane does not move is skipped.
    """
    lx = lane.exit[0] - lane.entrance[0]
    ly = lane.exit[1] - lane.entrance[1]
    scale = math.hypot(lx, ly)
    dx = w_j[0] - w_i[0] if isinstance(w_j, tuple) else w_j.x - w_i.x
    dy = w_j[1] - w_i[1] if isinstance(w_j, tuple) else w_j.y - w_i.y
    ok = True
    if abs(lx) > AXIS_TOL * scale:
        ok = ok and dx * lx > 0
    if abs(ly) > AXIS_TOL * scale:
        ok = ok and dy * ly > 0
    return ok


def fd_atoms(xi: Poly, yi: Poly, xj: Poly, yj: Poly, direction: geo.Point) -> list[Atom]:
    lx, ly = direction
    scale = math.hypot(lx, ly)
    # Dividing by the unit component keeps the sign test and makes the backend's
    # strict margin mean progress along the lane, whatever the lane's angle to the axis.
    atoms = []
    if abs(lx) > AXIS_TOL * scale:
        atoms.append(gt((xj - xi) * (scale / lx)))
    if abs(ly) > AXIS_TOL * scale:
        atoms.append(gt((yj - yi) * (scale / ly)))
    return atoms


def inside(x: Poly, y: Poly, poly: Sequence[geo.Point]) -> list[Atom]:
    """Half-plane form of point-in-convex-polygon (boundary inclusive)."""
    poly = geo.ensure_ccw(poly)
    out = []
    n = len(poly)
    for i in range(n):
        (ax, ay), (bx, by) = poly[i], poly[(i + 1) % n]
        out.append(ge((bx - ax) * (y - ay) - (by - ay) * (x - ax)))
    return out


def cross_atom(x0, y0, x1, y1, x2, y2, sign: int) -> Atom:
    c = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    return gt(c * sign)


def _lane_vec(lane: Lane) -> geo.Point:
    return geo.sub(lane.exit, lane.entrance)


class _Emitter:
    def __init__(self, pid: str, action: DrivingAction):
        self.pid = pid
        self.action = action
        self.extrapolated = action not in PRINTED_ACTIONS
        self.items: list[Constraint] = []

    def add(self, group: int, atoms: Iterable, note: str = "", implied: bool = False):
        tag = Tag(group, self.pid, self.action.value, note, self.extrapolated, implied)
        for a in atoms:
            self.items.append(Constraint(a, tag))


SPEED_POLYGON_SIDES = 16
TURN_RAY_STEP_DEG = 5.0
SEPARATION = 1e-3  # metres a segment must clear a separating ray by


def _duration(av: ActionVars, T: list[Poly]) -> Poly:
    total = sum(T[1:], T[0])
    if av.action is DrivingAction.STOP:
        total = total - T[-1] * 0.5  # speed ramps to zero over the last segment
    return total


def _speed_atoms(av: ActionVars, X, Y, T) -> tuple[list[Atom], list[Atom]]:
    """(exact relations, linear relations the solver uses instead).

    |D| <= limit * T is replaced by the inscribed regular polygon, which is a
    slightly stronger condition; positivity of the speed follows from the
    strict heading relations every action carries.
    """
    dx, dy = X[-1] - X[0], Y[-1] - Y[0]
    t_eff = _duration(av, T)
    sq = dx * dx + dy * dy
    lim = av.speed_limit
    exact = [gt(sq), le(sq, t_eff * t_eff * (lim * lim))]
    k = SPEED_POLYGON_SIDES
    r = lim * math.cos(math.pi / k)
    linear = [le(dx * math.cos(2 * math.pi * i / k) + dy * math.sin(2 * math.pi * i / k), t_eff * r)
              for i in range(k)]
    return exact, linear


def _nominal_direction(b) -> geo.Point | None:
    act = b.action
    if act in TURNS:
        return geo.add(b.road.direction, b.target_road.direction)
    if act is DrivingAction.UTURN:
        return None
    if act is DrivingAction.RETROGRADE:
        return geo.scale(b.target_lane.direction, -1.0)
    if act.is_pedestrian:
        return b.heading
    return b.road.direction


def _progress_share(act: DrivingAction) -> float:
    # a turn that ends early still points mostly along its approach road
    return math.cos(math.radians(45.0)) if act in TURNS else 1.0


def _separated_pairs(X, Y, start: geo.Point, sign: int, span_deg: float) -> list:
    """Consecutive segments split by a ray rotated from ``start``: the heading turns monotonically.

    Segment i lies strictly clockwise (for ``sign=1``) of some ray and segment
    i+1 strictly counter-clockwise of it.  With all segments inside one cone
    narrower than 180 degrees this implies the curvature sign relation.
    """
    rays = []
    a = TURN_RAY_STEP_DEG
    while a < span_deg - 1e-9:
        rays.append(geo.rotate(start, math.radians(sign * a)))
        a += TURN_RAY_STEP_DEG
    out = []
    for i in range(len(X) - 2):
        s0 = (X[i + 1] - X[i], Y[i + 1] - Y[i])
        s1 = (X[i + 2] - X[i + 1], Y[i + 2] - Y[i + 1])
        options = []
        for r in rays:
            c0 = s0[1] * r[0] - s0[0] * r[1]  # cross(r, s0)
            c1 = s1[1] * r[0] - s1[0] * r[1]
            options.append([le(c0 * sign, -SEPARATION), ge(c1 * sign, SEPARATION)])
        out.append(any_of(options))
    return out


def build_action_constraints(av: ActionVars, site: Site, *, collision_bound: bool,
                             collision_area: Sequence[geo.Point] | None, config: SolverConfig) -> ConstraintSet:
    b = av.binding
    act = b.action
    X = [Poly.var(v) for v in av.xs]
    Y = [Poly.var(v) for v in av.ys]
    T = [Poly.var(v) for v in av.dts]
    e = len(X)
    em = _Emitter(av.participant_id, act)
    vw = config.vehicle_width
    if collision_bound and not collision_area:
        raise DegenerateCollisionArea("collision-bound action needs a collision area")
    ca = collision_area or ()
    if act in TURNS and e < 3:
        raise ValueError("turns need at least three waypoints")

    def pt(i):
        return X[i], Y[i]

    def region(i, poly):
        return inside(X[i], Y[i], poly)

    def ahead(i, j, direction):
        return fd_atoms(X[i], Y[i], X[j], Y[j], direction)

    def consecutive(direction, group=2):
        for i in range(e - 1):
            em.add(group, ahead(i, i + 1, direction), "consecutive heading")
        half = LATERAL_CONE_DEG if act in LATERAL_ACTIONS else LANE_CONE_DEG
        for i in range(e - 1):
            em.add(group, _cone(X[i + 1] - X[i], Y[i + 1] - Y[i], geo.heading(direction), math.radians(half)),
                   "segment roughly along travel direction")

    if b.lane is None:
        raise UnboundLane(f"{av.participant_id}: {act.value} has no lane binding")

    if act in (DrivingAction.FOLLOW_LANE, DrivingAction.STOP):
        band = regions.lane_band(b.lane, vw)
        d = _lane_vec(b.lane)
        em.add(1, region(0, band) + region(e - 1, band), "start and end on lane")
        em.add(1, ahead(0, e - 1, d), "moves along lane")
        for i in range(1, e - 1):
            em.add(2, region(i, band), "stays on lane")
        consecutive(d)
        if collision_bound:
            em.add(1, region(e - 1, ca), "ends in collision area")

    elif act is DrivingAction.CHANGE_LANE:
        if b.target_lane is None:
            raise UnboundLane(f"{av.participant_id}: lane change without a target lane")
        src, dst = regions.lane_band(b.lane, vw), regions.lane_band(b.target_lane, vw)
        d = _lane_vec(b.lane)
        em.add(1, region(0, src) + region(e - 1, dst), "adjacent lanes")
        em.add(1, ahead(0, e - 1, d), "moves along lane")
        both = regions.hull(src, dst)
        for i in range(1, e - 1):
            em.add(2, region(i, both), "between the two lanes")
        consecutive(d)
        if collision_bound:
            em.add(1, region(e - 1, ca), "ends in collision area")

    elif act in TURNS or act is DrivingAction.VEHICLE_CROSS:
        if site.type is RoadType.STRAIGHT_ROAD or not site.junction_polygon:
            raise UnsupportedAction(f"{act.value} needs a junction site")
        if b.target_road is None or b.target_lane is None:
            raise UnboundLane(f"{av.participant_id}: {act.value} has no destination")
        junc = site.junction_polygon
        d_in, d_out = b.road.direction, b.target_road.direction
        em.add(1, region(0, regions.lane_band(b.lane, vw)), "starts on approach lane")
        em.add(2, region(1, junc) + region(1, regions.extended_band(b.lane, vw)), "enters junction from its lane")
        em.add(2, ahead(0, 1, d_in), "enters forward")
        for i in range(2, e - 1):
            em.add(2, region(i, junc), "inside junction")
        if collision_bound:
            options = [inside(X[e - 1], Y[e - 1], junc) + inside(X[e - 1], Y[e - 1], ca)]
            for lane in b.target_road.lanes:
                options.append(
                    inside(X[e - 1], Y[e - 1], regions.lane_band(lane, vw))
                    + inside(X[e - 1], Y[e - 1], ca)
                    + inside(X[e - 2], Y[e - 2], regions.extended_band(lane, vw))
                    + ahead(e - 2, e - 1, d_out))
            em.add(1, [any_of(options)], "ends in collision area")
        else:
            dst = b.target_lane
            em.add(1, region(e - 1, regions.lane_band(dst, vw)), "ends on destination lane")
            em.add(2, region(e - 2, regions.extended_band(dst, vw)), "leaves junction along its lane")
            em.add(2, ahead(e - 2, e - 1, d_out), "leaves forward")
        for i in range(e - 1):
            sx, sy = X[i + 1] - X[i], Y[i + 1] - Y[i]
            if act in TURNS:
                em.add(2, [ge(sx * d_in[0] + sy * d_in[1]), ge(sx * d_out[0] + sy * d_out[1])],
                       "heading between approach and exit")
            else:
                em.add(2, _cone(sx, sy, geo.heading(d_in), math.radians(CROSS_SWERVE_DEG)),
                       "keeps going forward")
        dot = geo.dot(d_in, d_out)
        if act in TURNS:
            sign = 1 if act is DrivingAction.TURN_LEFT else -1
            for i in range(e - 2):
                em.add(2, [cross_atom(*pt(i), *pt(i + 1), *pt(i + 2), sign)], "curvature sign", implied=True)
            em.add(2, _separated_pairs(X, Y, d_in, sign, 90.0), "heading turns monotonically")
            tol = math.sin(math.radians(2.0))
            em.add(2, [le(Poly.const(dot), tol), ge(Poly.const(dot), -tol)], "roads perpendicular")
        else:
            em.add(2, [gt(Poly.const(dot))], "roads at an acute angle")

    elif act is DrivingAction.UTURN:
        if b.target_lane is None:
            raise UnboundLane(f"{av.participant_id}: U-turn without an opposing lane")
        src, dst = regions.lane_band(b.lane, vw), regions.lane_band(b.target_lane, vw)
        if site.junction_polygon:
            area = site.junction_polygon
            em.add(2, region(1, regions.extended_band(b.lane, vw)), "enters junction from its lane")
        else:
            area = regions.carriageway(b.road, site, vw)
        em.add(1, region(0, src), "starts on own lane")
        em.add(2, ahead(0, 1, _lane_vec(b.lane)), "starts forward")
        for i in range(1, e - 1):
            em.add(2, region(i, area), "turning area")
        for i in range(e - 2):
            em.add(2, [cross_atom(*pt(i), *pt(i + 1), *pt(i + 2), 1)], "turns left throughout", implied=True)
        d_in = b.road.direction
        for i in range(e - 1):
            em.add(2, [ge((X[i + 1] - X[i]) * -d_in[1] + (Y[i + 1] - Y[i]) * d_in[0])], "turns to the left side")
        em.add(2, _separated_pairs(X, Y, d_in, 1, 180.0), "heading turns monotonically")
        back = _lane_vec(b.target_lane)
        if collision_bound:
            em.add(1, [any_of([inside(X[e - 1], Y[e - 1], area) + inside(X[e - 1], Y[e - 1], ca),
                               inside(X[e - 1], Y[e - 1], dst) + inside(X[e - 1], Y[e - 1], ca)
                               + ahead(e - 2, e - 1, back)])], "ends in collision area")
        else:
            em.add(1, region(e - 1, dst) + ahead(e - 2, e - 1, back), "ends on opposing lane")

    elif act is DrivingAction.RETROGRADE:
        if b.target_lane is None:
            raise UnboundLane(f"{av.participant_id}: retrograde without an opposing lane")
        own, opp = regions.lane_band(b.lane, vw), regions.lane_band(b.target_lane, vw)
        against = geo.scale(_lane_vec(b.target_lane), -1.0)
        em.add(1, [any_of([inside(X[0], Y[0], own), inside(X[0], Y[0], opp)])], "starts on own or opposing lane")
        em.add(1, region(e - 1, opp), "ends on opposing lane")
        em.add(1, ahead(0, e - 1, against), "drives against opposing traffic")
        for i in range(1, e - 1):
            em.add(2, region(i, opp), "on opposing lane")
        consecutive(against)
        if collision_bound:
            em.add(1, region(e - 1, ca), "ends in collision area")

    elif act in (DrivingAction.DRIVE_OFF_ROAD, DrivingAction.DRIVE_INTO_ROADS):
        band = regions.lane_band(b.lane, vw)
        side = b.road.roadside()
        first, last = (band, side) if act is DrivingAction.DRIVE_OFF_ROAD else (side, band)
        d = _lane_vec(b.lane)
        em.add(1, region(0, first) + region(e - 1, last),
               "lane to roadside" if act is DrivingAction.DRIVE_OFF_ROAD else "roadside to lane")
        em.add(1, ahead(0, e - 1, d), "moves along lane")
        both = regions.hull(band, side)
        for i in range(1, e - 1):
            em.add(2, region(i, both), "between lane and roadside")
        consecutive(d)
        if collision_bound:
            em.add(1, region(e - 1, ca), "ends in collision area")

    elif act is DrivingAction.PEDESTRIAN_CROSS:
        walk, start, end = regions.crossing_zones(b.road, site, b.heading)
        along = b.road.direction
        em.add(1, region(0, start), "starts at the kerb")
        if collision_bound:
            em.add(1, region(e - 1, ca), "ends in collision area")
        else:
            em.add(1, region(e - 1, end), "reaches the far kerb")
        em.add(1, ahead(0, e - 1, b.heading), "walks across")
        for i in range(1, e):
            em.add(2, region(i, walk), "inside crosswalk")
            em.add(2, [eq((X[i] - X[0]) * along[0] + (Y[i] - Y[0]) * along[1])], "straight across")
        consecutive(b.heading)

    elif act is DrivingAction.PEDESTRIAN_WALK:
        strip = b.road.roadside()
        em.add(1, region(0, strip) + region(e - 1, strip), "on the sidewalk")
        em.add(1, ahead(0, e - 1, b.heading), "walks forward")
        for i in range(1, e - 1):
            em.add(2, region(i, strip), "on the sidewalk")
        consecutive(b.heading)
        if collision_bound:
            em.add(1, region(e - 1, ca), "ends in collision area")

    else:  # pragma: no cover - the enum is closed
        raise UnsupportedAction(act.value)

    em.add(3, [ge(t, config.dt_min) for t in T] + [le(t, config.dt_max) for t in T], "segment durations")
    nominal = _nominal_direction(b)
    if nominal is not None:
        floor = config.min_pedestrian_speed if act.is_pedestrian else config.min_vehicle_speed
        u = geo.unit(nominal)
        em.add(3, [ge((X[-1] - X[0]) * u[0] + (Y[-1] - Y[0]) * u[1], _duration(av, T) * _progress_share(act) * floor)],
               "minimum progress")
    exact, linear = _speed_atoms(av, X, Y, T)
    em.add(3, exact, "positive constant speed within limit", implied=True)
    em.add(3, linear, "displacement within limit times duration")
    return ConstraintSet(av.names, tuple(em.items))


def build_chain_constraints(skeleton: PlanSkeleton | dict) -> ConstraintSet:
    parts = skeleton.participants if isinstance(skeleton, PlanSkeleton) else skeleton
    items = []
    names: list[str] = []
    for pid, actions in parts.items():
        for prev, cur in zip(actions, actions[1:]):
            tag = Tag(4, pid, cur.action.value, f"joins action {prev.index}")
            items.append(Constraint(eq(Poly.var(cur.xs[0]), Poly.var(prev.xs[-1])), tag))
            items.append(Constraint(eq(Poly.var(cur.ys[0]), Poly.var(prev.ys[-1])), tag))
            names += [cur.xs[0], prev.xs[-1], cur.ys[0], prev.ys[-1]]
    return ConstraintSet(tuple(dict.fromkeys(names)), tuple(items))


def _cone(vx: Poly, vy: Poly, phi: float, half: float) -> list[Atom]:
    r1 = (math.cos(phi - half), math.sin(phi - half))
    r2 = (math.cos(phi + half), math.sin(phi + half))
    return [ge(vy * r1[0] - vx * r1[1]), ge(vx * r2[1] - vy * r2[0]),
            gt(vx * math.cos(phi) + vy * math.sin(phi))]


def final_heading_range(b) -> tuple[float, float] | None:
    """(centre, half width) in radians that the final segment heading of an action is confined to."""
    act = b.action
    if act is DrivingAction.UTURN:
        return geo.heading(geo.left_normal(b.road.direction)), math.pi / 2
    if act in TURNS:
        return geo.heading(geo.add(b.road.direction, b.target_road.direction)), math.pi / 4
    if act is DrivingAction.VEHICLE_CROSS:
        return geo.heading(b.road.direction), math.radians(CROSS_SWERVE_DEG)
    if act is DrivingAction.PEDESTRIAN_CROSS:
        return geo.heading(b.heading), math.radians(1.0)
    direction = _nominal_direction(b)
    half = LATERAL_CONE_DEG if act in LATERAL_ACTIONS else LANE_CONE_DEG
    return geo.heading(direction), math.radians(half)


def _reachable(rng, phi: float, half: float) -> bool:
    if rng is None:
        return True
    centre, width = rng
    gap = abs((phi - centre + math.pi) % (2 * math.pi) - math.pi)
    return gap <= width + half + 1e-9


# Cones are narrowed slightly so rounding in exported files cannot push a
# relative heading that sits exactly on a band edge outside the band.
HEADING_MARGIN_DEG = 0.5


def heading_band_options(band: tuple[float, float]) -> tuple[list[float], float]:
    """Cone centres (relative heading, degrees) and per-participant half width."""
    lo, hi = band
    if lo <= 0.0:
        return [0.0], hi / 2
    if hi >= 180.0:
        return [180.0], (180.0 - lo) / 2
    mid = (lo + hi) / 2
    return [mid, -mid], (hi - lo) / 4


def build_crash_constraints(striker: Sequence[ActionVars], victim: Sequence[ActionVars],
                            collision_area: Sequence[geo.Point], crash_type: CrashType,
                            config: SolverConfig) -> ConstraintSet:
    if not collision_area or geo.area(collision_area) <= geo.EPS:
        raise DegenerateCollisionArea("collision area has no interior")
    s_last, v_last = striker[-1], victim[-1]
    pid = v_last.participant_id
    tag = lambda note: Tag(5, pid, v_last.action.value, note)  # noqa: E731
    sx, sy = Poly.var(s_last.xs[-1]), Poly.var(s_last.ys[-1])
    vx, vy = Poly.var(v_last.xs[-1]), Poly.var(v_last.ys[-1])
    items = [Constraint(eq(sx, vx), tag("shared crash point")),
             Constraint(eq(sy, vy), tag("shared crash point"))]
    items += [Constraint(a, tag("striker in collision area")) for a in inside(sx, sy, collision_area)]
    items += [Constraint(a, tag("victim in collision area")) for a in inside(vx, vy, collision_area)]
    s_total = sum((Poly.var(t) for a in striker for t in a.dts), Poly())
    v_total = sum((Poly.var(t) for a in victim for t in a.dts), Poly())
    items.append(Constraint(eq(s_total, v_total), tag("simultaneous arrival")))

    svx = sx - Poly.var(s_last.xs[-2])
    svy = sy - Poly.var(s_last.ys[-2])
    vvx = vx - Poly.var(v_last.xs[-2])
    vvy = vy - Poly.var(v_last.ys[-2])
    centres, half = heading_band_options(config.heading_bands[crash_type])
    half_r = math.radians(half - HEADING_MARGIN_DEG)
    s_range = final_heading_range(s_last.binding)
    v_range = final_heading_range(v_last.binding)
    options = []
    for k in range(config.heading_grid):
        phi = 2 * math.pi * k / config.heading_grid
        for c in centres:
            psi = phi + math.radians(c)
            # skip reference headings the actions' own heading cones already rule out
            if not (_reachable(s_range, phi, half_r) and _reachable(v_range, psi, half_r)):
                continue
            options.append(_cone(svx, svy, phi, half_r) + _cone(vvx, vvy, psi, half_r))
    items.append(Constraint(any_of(options), tag(f"{crash_type.value} heading band")))
    names = [n for a in list(striker) + list(victim) for n in a.names]
    return ConstraintSet(tuple(dict.fromkeys(names)), tuple(items))


def build_skeleton(abstract: AccidentAbstract, binding: SiteBinding, config: SolverConfig) -> PlanSkeleton:
    limit = abstract.speed_limit
    parts = {}
    for p in abstract.participants:
        pb = binding.participants[p.id]
        acts = []
        for k, ab in enumerate(pb.actions):
            lim = ab.road.speed_limit if limit is None else limit
            if ab.action.is_pedestrian:
                lim = min(lim, config.pedestrian_speed)
            acts.append(ActionVars.make(p.id, k, ab, config.waypoint_count(ab.action), lim))
        parts[p.id] = tuple(acts)
    crash = abstract.crash
    return PlanSkeleton(parts, crash.striker_id, crash.victim_ids)


def build_scenario_constraints(abstract: AccidentAbstract, binding: SiteBinding,
                               collision_area: Sequence[geo.Point], config: SolverConfig) -> ConstraintSet:
    """Groups 1-5 for every participant of ``abstract`` at the bound site."""
    skeleton = build_skeleton(abstract, binding, config)
    involved = {skeleton.striker_id, *skeleton.victim_ids}
    cs = ConstraintSet(skeleton=skeleton)
    for pid, acts in skeleton.participants.items():
        for k, av in enumerate(acts):
            final = k == len(acts) - 1 and pid in involved
            cs = cs + build_action_constraints(av, binding.site, collision_bound=final,
                                               collision_area=collision_area, config=config)
    cs = cs + build_chain_constraints(skeleton)
    striker = skeleton.participants[skeleton.striker_id]
    for vid in skeleton.victim_ids:
        cs = cs + build_crash_constraints(striker, skeleton.participants[vid], collision_area,
                                          abstract.crash_type, config)
    return cs
