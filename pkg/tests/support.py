"""Shared fixtures-in-code for the test suite: micro maps, corpus runs, independent checkers."""
from __future__ import annotations

import functools
import math
from fractions import Fraction
import time
from dataclasses import dataclass

import numpy as np

from crashsynth import data, geometry as geo
from crashsynth.constraints.builders import build_action_constraints
from crashsynth.constraints.expr import AnyOf, Atom, ConstraintSet
from crashsynth.constraints.plan import ActionVars, PlanSkeleton, SolverConfig
from crashsynth.model import DrivingAction, parse_abstract
from crashsynth.planner import PlannerConfig, plan_sites
from crashsynth.roadmap import ActionBinding, load_map, network_from_dict

# ---------------------------------------------------------------------------
# micro maps


def straight_lane_network(start, end, *, width=3.5, limit=13.4, lanes=1):
    """One carriageway whose forward road runs from ``start`` to ``end`` (lane 1 centreline)."""
    d = geo.unit(geo.sub(end, start))
    right = geo.right_normal(d)
    fwd, rev = [], []
    for k in range(lanes):
        off = geo.scale(right, k * width)
        fwd.append({"id": f"f{k + 1}", "index": k + 1, "width_m": width,
                    "entrance": list(geo.add(start, off)), "exit": list(geo.add(end, off))})
        back = geo.scale(right, -(k + 1) * width)
        rev.append({"id": f"r{k + 1}", "index": k + 1, "width_m": width,
                    "entrance": list(geo.add(end, back)), "exit": list(geo.add(start, back))})
    doc = {"sites": [{"id": "M", "type": "StraightRoad", "legs": ["fwd", "rev"], "junction_polygon": []}],
           "roads": [{"id": "fwd", "direction": "East", "speed_limit_mps": limit, "lanes": fwd},
                     {"id": "rev", "direction": "West", "speed_limit_mps": limit, "lanes": rev}],
           "connectivity": []}
    return network_from_dict(doc)


def single_action_problem(site, binding: ActionBinding, limit: float, config: SolverConfig,
                          count: int | None = None) -> ConstraintSet:
    """Constraints of one action on its own (no chaining, no crash), ready for ``solve``."""
    n = count or config.waypoint_count(binding.action)
    av = ActionVars.make("P1", 0, binding, n, limit)
    cs = build_action_constraints(av, site, collision_bound=False, collision_area=None, config=config)
    return ConstraintSet(cs.variables, cs.constraints, PlanSkeleton({"P1": (av,)}, "P1", ()))


# ---------------------------------------------------------------------------
# relation evaluation over numpy grids (no solver involved)


def _poly_values(poly, values):
    total = 0.0
    for mono, coeff in poly.terms.items():
        term = coeff
        for name in mono:
            term = term * values[name]
        total = total + term
    return total


def _atom_mask(atom: Atom, values, tol=1e-9):
    r = _poly_values(atom.poly, values)
    if atom.op == "==":
        return np.abs(r) <= 1e-6
    if atom.op == ">":
        return r > tol
    return r >= -tol


def relation_mask(rel, values):
    if isinstance(rel, AnyOf):
        out = False
        for conj in rel.options:
            m = True
            for a in conj:
                m = m & _atom_mask(a, values)
            out = out | m
        return out
    return _atom_mask(rel, values)


def grid_feasible(cs: ConstraintSet, lane, *, dt_min: float, dt_max: float,
                  cells: int = 40, dt_points: int = 12) -> bool:
    """Brute-force feasibility of a single three-waypoint FollowLane problem.

    Grid: start station in {0, 1 m}, two segment lengths from a uniform grid
    over the lane merged with a geometric series down to 5 cm (so short, fast
    segments are represented), and both durations on a grid spanning [dt_min, dt_max]
    (endpoints included); speed follows as length over time.  Waypoints sit on
    the centreline, which loses nothing on a straight lane: lateral drift only
    adds distance without progress.
    """
    length = lane.length
    seg = np.unique(np.concatenate([np.arange(1, cells + 1) * (length / cells),
                                    np.geomspace(min(0.05, length / cells), length, cells)]))
    durations = np.unique(np.linspace(dt_min, dt_max, dt_points))
    starts = np.array([0.0, min(1.0, length / 4)])
    s0, l0, l1, dt0, dt1 = np.meshgrid(starts, seg, seg, durations, durations, indexing="ij")
    s0, l0, l1, dt0, dt1 = (a.ravel() for a in (s0, l0, l1, dt0, dt1))
    keep = s0 + l0 + l1 <= length + 1e-9
    s0, l0, l1, dt0, dt1 = s0[keep], l0[keep], l1[keep], dt0[keep], dt1[keep]
    (ex, ey), (ux, uy) = lane.entrance, lane.direction
    values = {"P1.a0.dt0": dt0, "P1.a0.dt1": dt1}
    for i, s in enumerate((s0, s0 + l0, s0 + l0 + l1)):
        values[f"P1.a0.x{i}"] = ex + s * ux
        values[f"P1.a0.y{i}"] = ey + s * uy
    mask = np.ones(s0.shape, dtype=bool)
    for c in cs.constraints:
        mask &= np.broadcast_to(relation_mask(c.relation, values), mask.shape)
        if not mask.any():
            return False
    return bool(mask.any())


# ---------------------------------------------------------------------------
# independent per-action checks


def displacement_gap(traj) -> float:
    """Largest per-axis gap between endpoint displacement and the trapezoidal velocity integral."""
    ix = iy = 0.0
    for c, dt in enumerate(traj.durations):
        (ax, ay), (bx, by) = traj.velocities[c], traj.velocities[c + 1]
        ix += 0.5 * (ax + bx) * dt
        iy += 0.5 * (ay + by) * dt
    first, last = traj.waypoints[0], traj.waypoints[-1]
    return max(abs(last.x - first.x - ix), abs(last.y - first.y - iy))


def speed_problems(traj, limit: float, tol: float = 1e-6) -> list[str]:
    moving = traj.waypoints[:-1] if traj.action is DrivingAction.STOP else traj.waypoints
    speeds = [w.v for w in moving]
    out = []
    if max(speeds) - min(speeds) > tol:
        out.append("speed varies within the action")
    if speeds[0] <= 0:
        out.append("speed not positive")
    if speeds[0] > limit + tol:
        out.append("speed above limit")
    if traj.action is DrivingAction.STOP and traj.waypoints[-1].v != 0:
        out.append("stop does not end at rest")
    return out


def turn_cross_products(traj) -> list[float]:
    """(s_{i+1} - s_i) x (s_{i+2} - s_i) for every interior index."""
    p = [w.pos for w in traj.waypoints]
    return [geo.cross(geo.sub(p[i + 1], p[i]), geo.sub(p[i + 2], p[i])) for i in range(len(p) - 2)]


# ---------------------------------------------------------------------------
# exact convex overlap (rational arithmetic, no clipping)


def _xcross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _exact_hull(points):
    pts = sorted(set(points))
    if len(pts) < 3:
        return pts

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _xcross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out[:-1]

    return chain(pts) + chain(reversed(pts))


def _exact_inside(p, poly):
    return all(_xcross(poly[i], poly[(i + 1) % len(poly)], p) >= 0 for i in range(len(poly)))


def _segment_hits(p, q, r, s):
    # proper crossings only; touching endpoints are caught by the inside tests
    d1, d2 = _xcross(r, s, p), _xcross(r, s, q)
    d3, d4 = _xcross(p, q, r), _xcross(p, q, s)
    if d1 * d2 >= 0 or d3 * d4 >= 0:
        return []
    t = d1 / (d1 - d2)
    return [(p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))]


def exact_overlap_area(a, b) -> float:
    """Area of two convex polygons' intersection, computed exactly.

    The overlap is the hull of every vertex of one polygon inside the other
    plus every edge crossing; all arithmetic is on Fractions, so near-degenerate
    slivers come out right where floating-point overlay can fail.
    """
    pa = _exact_hull([(Fraction(x), Fraction(y)) for x, y in a])
    pb = _exact_hull([(Fraction(x), Fraction(y)) for x, y in b])
    if len(pa) < 3 or len(pb) < 3:
        return 0.0
    pts = [p for p in pa if _exact_inside(p, pb)] + [p for p in pb if _exact_inside(p, pa)]
    for i in range(len(pa)):
        for j in range(len(pb)):
            pts += _segment_hits(pa[i], pa[(i + 1) % len(pa)], pb[j], pb[(j + 1) % len(pb)])
    hull = _exact_hull(pts)
    if len(hull) < 3:
        return 0.0
    twice = sum(hull[i][0] * hull[(i + 1) % len(hull)][1] - hull[(i + 1) % len(hull)][0] * hull[i][1]
                for i in range(len(hull)))
    return float(twice / 2)


# ---------------------------------------------------------------------------
# corpus runs shared by several test modules


@dataclass
class CorpusRun:
    outcomes: dict  # (abstract name, map name) -> SiteOutcome
    abstracts: dict  # abstract name -> AccidentAbstract
    seconds: float


@functools.lru_cache(maxsize=None)
def corpus_abstracts():
    return {p.stem: parse_abstract(p.read_text()) for p in data.corpus_paths()}


@functools.lru_cache(maxsize=None)
def srr_network(name: str):
    return load_map(data.map_path(name))


@functools.lru_cache(maxsize=None)
def corpus_run(doubled: bool = False) -> CorpusRun:
    """Every corpus abstract planned on the three maps of its road type."""
    abstracts = corpus_abstracts()
    outcomes = {}
    started = time.perf_counter()
    config = PlannerConfig(max_scenarios=1)
    for name, ab in abstracts.items():
        for map_name in data.srr_map_names(ab.collision_location.value, doubled=doubled):
            (outcome,) = plan_sites(ab, srr_network(map_name), config)
            outcomes[(name, map_name)] = outcome
    return CorpusRun(outcomes, abstracts, time.perf_counter() - started)


def solved_scenarios(doubled: bool = False):
    return [o.scenario for o in corpus_run(doubled).outcomes.values() if o.scenario is not None]
