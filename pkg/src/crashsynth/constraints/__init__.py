"""Trajectory constraints over waypoint variables and their solution."""
from crashsynth.constraints.builders import (
    build_action_constraints,
    build_chain_constraints,
    build_crash_constraints,
    build_scenario_constraints,
    build_skeleton,
    fd,
)
from crashsynth.constraints.expr import ConstraintSet
from crashsynth.constraints.plan import (
    ActionTrajectory,
    ParticipantPlan,
    PlanSkeleton,
    SolverConfig,
    Waypoint,
)
from crashsynth.constraints.solver import Z3Backend, solve
from crashsynth.constraints.verify import verify_scenario

__all__ = [
    "ActionTrajectory", "ConstraintSet", "ParticipantPlan", "PlanSkeleton", "SolverConfig", "Waypoint",
    "Z3Backend", "build_action_constraints", "build_chain_constraints", "build_crash_constraints",
    "build_scenario_constraints", "build_skeleton", "fd", "solve", "verify_scenario",
]
