"""Plan data types, solver configuration and the per-action variable layout."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from crashsynth.model import CrashType, DrivingAction
from crashsynth.roadmap import ActionBinding

DEFAULT_HEADING_BANDS = {
    CrashType.REAR_END: (0.0, 30.0),
    CrashType.FRONTAL: (150.0, 180.0),
    CrashType.FRONT_TO_SIDE: (60.0, 120.0),
}

TURNS = (DrivingAction.TURN_LEFT, DrivingAction.TURN_RIGHT)


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.v)):
            raise ValueError("waypoint coordinates must be finite")
        if self.v < 0:
            raise ValueError("waypoint speed must be non-negative")

    @property
    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class ActionTrajectory:
    action: DrivingAction
    waypoints: tuple[Waypoint, ...]
    durations: tuple[float, ...]
    # velocity vector at each waypoint; magnitudes equal ``Waypoint.v``
    velocities: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("an action needs at least two waypoints")
        if len(self.durations) != len(self.waypoints) - 1:
            raise ValueError("need exactly one duration per segment")

    @property
    def duration(self) -> float:
        return sum(self.durations)


@dataclass(frozen=True)
class ParticipantPlan:
    participant_id: str
    trajectories: tuple[ActionTrajectory, ...]

    @property
    def total_time(self) -> float:
        return sum(t.duration for t in self.trajectories)

    @property
    def final_position(self) -> tuple[float, float]:
        return self.trajectories[-1].waypoints[-1].pos

    def timed_waypoints(self):
        """Yield ``(action_index, Waypoint, t)`` with ``t`` cumulative from plan start."""
        t0 = 0.0
        for k, traj in enumerate(self.trajectories):
            t = t0
            for i, wp in enumerate(traj.waypoints):
                yield k, wp, t
                if i < len(traj.durations):
                    t += traj.durations[i]
            t0 += traj.duration


@dataclass(frozen=True)
class SolverConfig:
    waypoints_per_action: int = 5
    follow_lane_waypoints: int = 3
    dt_min: float = 0.1
    dt_max: float = 10.0
    timeout: float = 30.0
    seed: int = 0
    epsilon: float = 1e-6
    strict_margin: float = 1e-3
    vehicle_width: float = 1.8
    pedestrian_speed: float = 2.0
    min_vehicle_speed: float = 2.0
    min_pedestrian_speed: float = 0.5
    heading_grid: int = 72
    heading_bands: dict = field(default_factory=lambda: dict(DEFAULT_HEADING_BANDS))

    def __post_init__(self):
        if self.waypoints_per_action < 3 or self.follow_lane_waypoints < 2:
            raise ValueError("need e >= 3 per action (turns) and e >= 2 for FollowLane")
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    def waypoint_count(self, action: DrivingAction) -> int:
        return self.follow_lane_waypoints if action is DrivingAction.FOLLOW_LANE else self.waypoints_per_action


@dataclass(frozen=True)
class ActionVars:
    """Solver variable names for one action of one participant."""

    participant_id: str
    index: int
    binding: ActionBinding
    xs: tuple[str, ...]
    ys: tuple[str, ...]
    dts: tuple[str, ...]
    speed_limit: float

    @property
    def action(self) -> DrivingAction:
        return self.binding.action

    @property
    def names(self) -> tuple[str, ...]:
        return self.xs + self.ys + self.dts

    @classmethod
    def make(cls, participant_id: str, index: int, binding: ActionBinding, count: int,
             speed_limit: float) -> "ActionVars":
        base = f"{participant_id}.a{index}"
        return cls(participant_id, index, binding,
                   tuple(f"{base}.x{i}" for i in range(count)),
                   tuple(f"{base}.y{i}" for i in range(count)),
                   tuple(f"{base}.dt{i}" for i in range(count - 1)),
                   speed_limit)


@dataclass(frozen=True)
class PlanSkeleton:
    participants: dict  # participant id -> tuple[ActionVars, ...], in abstract order
    striker_id: str
    victim_ids: tuple[str, ...]
