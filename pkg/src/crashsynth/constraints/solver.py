"""Solving a ConstraintSet: the Z3 backend and plan recovery.

The backend decides waypoint positions and segment durations.  Speeds and
velocity vectors follow in closed form from each action's displacement and
duration, so the displacement integral and the constant-speed rule hold
exactly on every output.
"""
from __future__ import annotations

import math
import time
from fractions import Fraction
from typing import Mapping, Protocol

import z3
from scipy.optimize import brentq

from crashsynth.constraints.expr import AnyOf, Atom, ConstraintSet, Poly
from crashsynth.constraints.plan import ActionTrajectory, ActionVars, ParticipantPlan, SolverConfig, Waypoint
from crashsynth.errors import BackendError, Infeasible, SolverTimeout
from crashsynth.model import DrivingAction


class Backend(Protocol):
    def solve(self, constraints: ConstraintSet, config: SolverConfig) -> dict[str, float]:
        """Return one satisfying assignment or raise Infeasible / SolverTimeout / BackendError."""


def _to_float(val) -> float:
    if z3.is_rational_value(val):
        return float(Fraction(val.numerator_as_long(), val.denominator_as_long()))
    if z3.is_algebraic_value(val):
        return float(val.approx(20).as_fraction())
    raise BackendError(f"cannot convert solver value {val}")


class Z3Backend:
    def _term(self, poly: Poly, vars_: Mapping[str, z3.ArithRef]):
        ctx = next(iter(vars_.values())).ctx if vars_ else None
        terms = []
        for mono, coeff in poly.terms.items():
            c = z3.RealVal(Fraction(coeff), ctx)
            if not mono:
                terms.append(c)
                continue
            prod = vars_[mono[0]]
            for v in mono[1:]:
                prod = prod * vars_[v]
            terms.append(prod if coeff == 1 else c * prod)
        return z3.Sum(terms) if terms else z3.RealVal(0, ctx)

    def _atom(self, atom: Atom, vars_, margin: float):
        t = self._term(atom.poly, vars_)
        if atom.op == "==":
            return t == 0
        if atom.op == ">":
            return t >= z3.RealVal(Fraction(margin), t.ctx)
        return t >= 0

    def _relation(self, rel, vars_, margin):
        if isinstance(rel, Atom):
            return self._atom(rel, vars_, margin)
        if isinstance(rel, AnyOf):
            ctx = next(iter(vars_.values())).ctx
            return z3.Or([z3.And([self._atom(a, vars_, margin) for a in conj] or [z3.BoolVal(True, ctx)])
                          for conj in rel.options])
        raise BackendError(f"unknown relation type {type(rel).__name__}")

    def solve(self, constraints: ConstraintSet, config: SolverConfig) -> dict[str, float]:
        # a private context per call keeps repeated solves in one process identical
        ctx = z3.Context()
        vars_ = {name: z3.Real(name, ctx) for name in constraints.variables}
        solver = z3.Solver(ctx=ctx)
        solver.set("timeout", max(1, int(config.timeout * 1000)))
        solver.set("random_seed", int(config.seed))
        solver.set("unsat_core", True)
        grouped: dict[str, list] = {}
        for c in constraints.constraints:
            if c.tag.implied:
                continue
            key = f"group{c.tag.group}:{c.tag.participant}:{c.tag.action}"
            grouped.setdefault(key, []).append(self._relation(c.relation, vars_, config.strict_margin))
        trackers = {}
        for key, exprs in grouped.items():
            flag = z3.Bool(key, ctx)
            trackers[str(flag)] = key
            solver.assert_and_track(z3.And(exprs), flag)
        started = time.monotonic()
        try:
            verdict = solver.check()
        except z3.Z3Exception as exc:  # pragma: no cover - defensive
            raise BackendError(str(exc)) from exc
        if verdict == z3.unsat:
            core = tuple(sorted(trackers[str(b)] for b in solver.unsat_core()))
            raise Infeasible("constraints are unsatisfiable", core)
        if verdict == z3.unknown:
            reason = solver.reason_unknown()
            if "timeout" in reason or "canceled" in reason or time.monotonic() - started >= config.timeout:
                raise SolverTimeout(f"no answer within {config.timeout} s ({reason})")
            raise BackendError(f"solver gave up: {reason}")
        model = solver.model()
        return {name: _to_float(model.eval(v, model_completion=True)) for name, v in vars_.items()}


def _redistribute(lengths: list[float], total: float, lo: float, hi: float) -> list[float]:
    """Segment durations proportional to length, clipped to [lo, hi], summing to ``total``."""
    n = len(lengths)
    if sum(lengths) <= 0:
        return [total / n] * n
    top = sum(hi if s > 0 else lo for s in lengths)
    slack = 1e-9 * max(1.0, total)
    if not n * lo - slack <= total <= top + slack:
        raise ValueError(f"total duration {total} is outside the reachable range [{n * lo}, {top}]")

    def excess(k):
        return sum(min(hi, max(lo, k * s)) for s in lengths) - total

    if excess(0.0) >= 0:  # every segment at the lower bound, up to float residue
        return [total / n] * n
    if total >= top:
        return [hi if s > 0 else lo for s in lengths]
    k_hi = 1.0
    while excess(k_hi) < 0:
        k_hi *= 2.0
    k = brentq(excess, 0.0, k_hi, xtol=1e-15, rtol=1e-15)
    dts = [min(hi, max(lo, k * s)) for s in lengths]
    drift = total - sum(dts)
    # put float residue on the longest free segment so the total is exact
    free = [i for i, d in enumerate(dts) if lo < d + drift < hi]
    if free:
        i = max(free, key=lambda j: dts[j])
        dts[i] += drift
    return dts


def recover_trajectory(av: ActionVars, values: Mapping[str, float], config: SolverConfig) -> ActionTrajectory:
    xs = [values[v] for v in av.xs]
    ys = [values[v] for v in av.ys]
    dts = [values[v] for v in av.dts]
    stop = av.action is DrivingAction.STOP
    dx, dy = xs[-1] - xs[0], ys[-1] - ys[0]
    if not stop:
        seg = [math.hypot(xs[i + 1] - xs[i], ys[i + 1] - ys[i]) for i in range(len(xs) - 1)]
        dts = _redistribute(seg, sum(dts), config.dt_min, config.dt_max)
    t_eff = sum(dts) - (dts[-1] / 2 if stop else 0.0)
    dist = math.hypot(dx, dy)
    speed = min(dist / t_eff, av.speed_limit)
    ux, uy = (dx / dist, dy / dist) if dist > 0 else (0.0, 0.0)
    vel = [(speed * ux, speed * uy)] * len(xs)
    speeds = [speed] * len(xs)
    if stop:
        vel[-1] = (0.0, 0.0)
        speeds[-1] = 0.0
    wps = tuple(Waypoint(x, y, v) for x, y, v in zip(xs, ys, speeds))
    return ActionTrajectory(av.action, wps, tuple(dts), tuple(vel))


def solve(constraints: ConstraintSet, config: SolverConfig | None = None,
          backend: Backend | None = None) -> dict[str, ParticipantPlan]:
    """Solve and return one plan per participant, keyed by participant id."""
    config = config or SolverConfig()
    skeleton = constraints.skeleton
    if skeleton is None:
        raise BackendError("constraint set has no plan skeleton to recover trajectories from")
    values = (backend or Z3Backend()).solve(constraints, config)
    return {
        pid: ParticipantPlan(pid, tuple(recover_trajectory(av, values, config) for av in acts))
        for pid, acts in skeleton.participants.items()
    }


def plan_values(plans: Mapping[str, ParticipantPlan], skeleton) -> dict[str, float]:
    """Map recovered plans back onto solver variable names (for re-evaluating relations)."""
    out = {}
    for pid, acts in skeleton.participants.items():
        for av, traj in zip(acts, plans[pid].trajectories):
            for name, wp in zip(av.xs, traj.waypoints):
                out[name] = wp.x
            for name, wp in zip(av.ys, traj.waypoints):
                out[name] = wp.y
            for name, dt in zip(av.dts, traj.durations):
                out[name] = dt
    return out
