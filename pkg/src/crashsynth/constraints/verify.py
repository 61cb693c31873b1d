"""Independent re-verification of solved plans.

Works only from the map geometry, the action bindings and the numeric plan:
it re-derives every region test, heading test and timing test with its own
arithmetic instead of evaluating the relations handed to the solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from crashsynth.model import CrashType, DrivingAction

EQ_TOL = 1e-6
POS_TOL = 1e-7


@dataclass(frozen=True)
class Violation:
    group: int
    participant: str
    action: str
    message: str

    def __str__(self) -> str:
        return f"group{self.group} participant{self.participant} action{self.action}: {self.message}"


def _lane_frame(lane):
    ex, ey = lane.exit[0] - lane.entrance[0], lane.exit[1] - lane.entrance[1]
    length = math.sqrt(ex * ex + ey * ey)
    return lane.entrance, (ex / length, ey / length), length


def _offsets(p, lane):
    (ox, oy), (ux, uy), length = _lane_frame(lane)
    rx, ry = p[0] - ox, p[1] - oy
    return rx * ux + ry * uy, ux * ry - uy * rx, length  # station, left-positive lateral, length


def on_band(p, lane, vehicle_width, *, extended=False) -> bool:
    station, lateral, length = _offsets(p, lane)
    half = max(lane.width - vehicle_width, 0.0) / 2
    if abs(lateral) > half + POS_TOL:
        return False
    return extended or (-POS_TOL <= station <= length + POS_TOL)


def on_roadside(p, road, width=3.0) -> bool:
    outer = max(road.lanes, key=lambda l: l.index)
    station, lateral, length = _offsets(p, outer)
    right = -lateral  # distance to the right of the outer lane's centre line
    return (outer.width / 2 - POS_TOL <= right <= outer.width / 2 + width + POS_TOL
            and -POS_TOL <= station <= length + POS_TOL)


def in_polygon(p, poly: Sequence) -> bool:
    """Boundary-inclusive winding-sign test for a convex polygon of either orientation."""
    n = len(poly)
    signs = set()
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        c = (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax)
        scale = math.hypot(bx - ax, by - ay)
        if c > POS_TOL * max(scale, 1.0):
            signs.add(1)
        elif c < -POS_TOL * max(scale, 1.0):
            signs.add(-1)
    return len(signs) <= 1


def ahead(a, b, direction) -> bool:
    """Sign-product test per axis; an axis the direction does not move along is skipped."""
    lx, ly = direction
    size = math.hypot(lx, ly)
    ok = True
    if abs(lx) > 1e-9 * size:
        ok &= (b[0] - a[0]) * lx > 1e-9
    if abs(ly) > 1e-9 * size:
        ok &= (b[1] - a[1]) * ly > 1e-9
    return ok


def _vec(lane):
    return (lane.exit[0] - lane.entrance[0], lane.exit[1] - lane.entrance[1])


def _turn_sign(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _angle_deg(u, v) -> float:
    nu, nv = math.hypot(*u), math.hypot(*v)
    if nu == 0 or nv == 0:
        return float("nan")
    c = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def _check_action(traj, ab, site, final, area, vw, out, pid):
    act = ab.action
    pts = [w.pos for w in traj.waypoints]
    e = len(pts)

    def bad(group, msg):
        out.append(Violation(group, pid, act.value, msg))

    def all_consecutive(direction):
        for i in range(e - 1):
            if not ahead(pts[i], pts[i + 1], direction):
                bad(2, f"waypoint {i + 1} is not ahead of waypoint {i}")

    if final and not in_polygon(pts[-1], area):
        bad(1, "final waypoint outside collision area")

    if act in (DrivingAction.FOLLOW_LANE, DrivingAction.STOP):
        for i, p in enumerate(pts):
            if not on_band(p, ab.lane, vw):
                bad(1 if i in (0, e - 1) else 2, f"waypoint {i} off lane {ab.lane.id}")
        if not ahead(pts[0], pts[-1], _vec(ab.lane)):
            bad(1, "end not ahead of start")
        all_consecutive(_vec(ab.lane))
    elif act is DrivingAction.CHANGE_LANE:
        if not on_band(pts[0], ab.lane, vw) or not on_band(pts[-1], ab.target_lane, vw):
            bad(1, "does not go from its lane to the adjacent lane")
        all_consecutive(_vec(ab.lane))
    elif act in (DrivingAction.TURN_LEFT, DrivingAction.TURN_RIGHT, DrivingAction.VEHICLE_CROSS):
        junc = site.junction_polygon
        if not on_band(pts[0], ab.lane, vw):
            bad(1, "does not start on its approach lane")
        if not on_band(pts[1], ab.lane, vw, extended=True) or not ahead(pts[0], pts[1], _vec(ab.lane)):
            bad(2, "does not enter the junction from its lane")
        for i in range(1, e - 1):
            if not in_polygon(pts[i], junc):
                bad(2, f"waypoint {i} outside the junction")
        if final:
            ok = in_polygon(pts[-1], junc) or any(
                on_band(pts[-1], l, vw) and on_band(pts[-2], l, vw, extended=True)
                for l in ab.target_road.lanes)
            if not ok:
                bad(1, "final waypoint neither in junction nor on a destination lane")
        elif not on_band(pts[-1], ab.target_lane, vw):
            bad(1, f"does not end on destination lane {ab.target_lane.id}")
        d_in, d_out = ab.road.direction, ab.target_road.direction
        if act is DrivingAction.VEHICLE_CROSS:
            if _angle_deg(d_in, d_out) >= 90:
                bad(2, "crossing into a road at an obtuse angle")
        else:
            want = 1 if act is DrivingAction.TURN_LEFT else -1
            for i in range(e - 2):
                if _turn_sign(pts[i], pts[i + 1], pts[i + 2]) * want <= 1e-9:
                    bad(2, f"curvature flips at waypoint {i}")
            if abs(_angle_deg(d_in, d_out) - 90) > 2.0:
                bad(2, "roads are not perpendicular")
    elif act is DrivingAction.UTURN:
        if not on_band(pts[0], ab.lane, vw):
            bad(1, "does not start on its lane")
        for i in range(e - 2):
            if _turn_sign(pts[i], pts[i + 1], pts[i + 2]) <= 1e-9:
                bad(2, f"U-turn curvature flips at waypoint {i}")
        if not final and not on_band(pts[-1], ab.target_lane, vw):
            bad(1, "does not end on the opposing lane")
    elif act is DrivingAction.RETROGRADE:
        if not (on_band(pts[0], ab.lane, vw) or on_band(pts[0], ab.target_lane, vw)):
            bad(1, "does not start on its own or the opposing lane")
        for i in range(1, e):
            if not on_band(pts[i], ab.target_lane, vw):
                bad(1 if i == e - 1 else 2, f"waypoint {i} not on the opposing lane")
        v = _vec(ab.target_lane)
        all_consecutive((-v[0], -v[1]))
    elif act in (DrivingAction.DRIVE_OFF_ROAD, DrivingAction.DRIVE_INTO_ROADS):
        first_on_lane = act is DrivingAction.DRIVE_OFF_ROAD
        start_ok = on_band(pts[0], ab.lane, vw) if first_on_lane else on_roadside(pts[0], ab.road)
        end_ok = on_roadside(pts[-1], ab.road) if first_on_lane else on_band(pts[-1], ab.lane, vw)
        if not (start_ok and end_ok):
            bad(1, "wrong start or end side of the road edge")
        all_consecutive(_vec(ab.lane))
    elif act is DrivingAction.PEDESTRIAN_CROSS:
        walk = site.crosswalk(ab.road)
        d = ab.road.direction
        for i, p in enumerate(pts):
            if not in_polygon(p, walk):
                bad(2, f"waypoint {i} outside the crosswalk")
            along = (p[0] - pts[0][0]) * d[0] + (p[1] - pts[0][1]) * d[1]
            if abs(along) > EQ_TOL:
                bad(2, f"waypoint {i} leaves the straight crossing line")
        all_consecutive(ab.heading)
    elif act is DrivingAction.PEDESTRIAN_WALK:
        for i, p in enumerate(pts):
            if not on_roadside(p, ab.road):
                bad(2, f"waypoint {i} off the sidewalk")
        all_consecutive(ab.heading)


def _check_kinematics(traj, limit, dt_min, dt_max, out, pid):
    act = traj.action
    wps = traj.waypoints

    def bad(msg):
        out.append(Violation(3, pid, act.value, msg))

    for i, dt in enumerate(traj.durations):
        if not (dt_min - EQ_TOL <= dt <= dt_max + EQ_TOL):
            bad(f"segment {i} duration {dt} outside [{dt_min}, {dt_max}]")
    # displacement equals trapezoidal integral of velocity, per axis
    ix = iy = 0.0
    for c, dt in enumerate(traj.durations):
        ix += (traj.velocities[c][0] + traj.velocities[c + 1][0]) / 2 * dt
        iy += (traj.velocities[c][1] + traj.velocities[c + 1][1]) / 2 * dt
    if abs((wps[-1].x - wps[0].x) - ix) > EQ_TOL or abs((wps[-1].y - wps[0].y) - iy) > EQ_TOL:
        bad("displacement does not match the integrated velocity")
    moving = wps[:-1] if act is DrivingAction.STOP else wps
    spd = moving[0].v
    for w, vel in zip(wps, traj.velocities):
        if abs(math.hypot(*vel) - w.v) > EQ_TOL:
            bad("velocity vector magnitude differs from waypoint speed")
            break
    if any(abs(w.v - spd) > EQ_TOL for w in moving):
        bad("speed is not constant within the action")
    if not (spd > 0):
        bad("speed is not positive")
    if spd > limit + EQ_TOL:
        bad(f"speed {spd:.3f} exceeds limit {limit:.3f}")
    if act is DrivingAction.STOP and wps[-1].v != 0.0:
        bad("stop does not end at rest")


def verify_scenario(plans: Mapping, skeleton, site, collision_area: Sequence, crash_type: CrashType,
                    heading_band: tuple[float, float], *, vehicle_width: float = 1.8,
                    dt_min: float = 0.1, dt_max: float = 10.0) -> list[Violation]:
    """Every Group 1-5 relation re-checked on the numeric plans; empty list means valid."""
    out: list[Violation] = []
    involved = {skeleton.striker_id, *skeleton.victim_ids}
    for pid, acts in skeleton.participants.items():
        plan = plans[pid]
        if len(plan.trajectories) != len(acts):
            out.append(Violation(4, pid, "-", "plan length differs from action list"))
            continue
        for k, (av, traj) in enumerate(zip(acts, plan.trajectories)):
            final = k == len(acts) - 1 and pid in involved
            _check_action(traj, av.binding, site, final, collision_area, vehicle_width, out, pid)
            _check_kinematics(traj, av.speed_limit, dt_min, dt_max, out, pid)
        for k in range(1, len(plan.trajectories)):
            a = plan.trajectories[k - 1].waypoints[-1]
            b = plan.trajectories[k].waypoints[0]
            if math.hypot(a.x - b.x, a.y - b.y) > EQ_TOL:
                out.append(Violation(4, pid, acts[k].action.value, "gap between consecutive actions"))
    striker = plans[skeleton.striker_id]
    s_traj = striker.trajectories[-1]
    for vid in skeleton.victim_ids:
        victim = plans[vid]
        v_traj = victim.trajectories[-1]
        sp, vp = s_traj.waypoints[-1], v_traj.waypoints[-1]
        act = v_traj.action.value
        if math.hypot(sp.x - vp.x, sp.y - vp.y) > EQ_TOL:
            out.append(Violation(5, vid, act, "striker and victim do not meet"))
        if not (in_polygon(sp.pos, collision_area) and in_polygon(vp.pos, collision_area)):
            out.append(Violation(5, vid, act, "crash point outside collision area"))
        if abs(striker.total_time - victim.total_time) > EQ_TOL:
            out.append(Violation(5, vid, act, "arrival times differ"))
        hs = (sp.x - s_traj.waypoints[-2].x, sp.y - s_traj.waypoints[-2].y)
        hv = (vp.x - v_traj.waypoints[-2].x, vp.y - v_traj.waypoints[-2].y)
        ang = _angle_deg(hs, hv)
        lo, hi = heading_band
        if not (lo - 1e-6 <= ang <= hi + 1e-6):
            out.append(Violation(5, vid, act, f"relative heading {ang:.2f} deg outside {crash_type.value} band"))
    return out
