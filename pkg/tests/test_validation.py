import json
import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from crashsynth import data, geometry as geo
from crashsynth.constraints import ActionTrajectory, ParticipantPlan, Waypoint
from crashsynth.errors import EmptyInput, MissingEgoChannel
from crashsynth.model import DrivingAction
from crashsynth.planner import PlannerConfig, plan_scenario
from crashsynth.validation import (
    SimTolerances,
    SimVerdict,
    check_sim,
    collision_oracle,
    compute_srr,
    failure_category,
    generate_tests,
    replay,
    replay_plan,
    srr_table,
    stub_agent_trace,
    test_case_from_dict,
    verdict_lines,
)

from support import corpus_abstracts, srr_network


def straight_plan(points, durations, action=DrivingAction.FOLLOW_LANE, pid="P1"):
    speeds = [geo.norm(geo.sub(b, a)) / dt for a, b, dt in zip(points, points[1:], durations)]
    wps = tuple(Waypoint(x, y, speeds[min(i, len(speeds) - 1)]) for i, (x, y) in enumerate(points))
    return ParticipantPlan(pid, (ActionTrajectory(action, wps, tuple(durations)),))


def oracle_case(name):
    return test_case_from_dict(json.loads(data.oracle_case_path(name).read_text()))


# ---------------------------------------------------------------------------
# replay


def test_midpoint_of_a_two_second_segment():
    states = replay_plan(straight_plan([(0, 0), (20, 0)], [2.0]), dt=0.5)
    at_one = next(s for s in states if s.t == 1.0)
    assert (at_one.x, at_one.y) == pytest.approx((10.0, 0.0))
    assert at_one.v == pytest.approx(10.0)
    assert states[-1].t == pytest.approx(2.0)
    assert (states[-1].x, states[-1].y) == pytest.approx((20.0, 0.0))


def test_empty_plan_replays_to_nothing():
    assert replay_plan(ParticipantPlan("P1", ())) == ()


def test_trailing_partial_tick_is_kept():
    states = replay_plan(straight_plan([(0, 0), (7, 0)], [0.7]), dt=0.5)
    assert [s.t for s in states] == [0.0, 0.5, 0.7]


def test_replay_tick_must_be_positive():
    with pytest.raises(ValueError):
        replay_plan(straight_plan([(0, 0), (1, 0)], [1.0]), dt=0)


def test_heading_follows_segment_direction():
    states = replay_plan(straight_plan([(0, 0), (0, 10), (-10, 10)], [1.0, 1.0]), dt=0.25)
    assert states[1].heading == pytest.approx(math.pi / 2)
    assert states[-1].heading == pytest.approx(math.pi)
    assert states[-1].action_index == 0


# ---------------------------------------------------------------------------
# SIM


@pytest.fixture(scope="module")
def rear_end():
    """Stopped-vehicle rear-end case planned on the 3 m straight road."""
    (sc,) = plan_scenario(corpus_abstracts()["s01_stopped_vehicle"], srr_network("straight_w30"),
                          PlannerConfig(max_scenarios=1))
    return sc


def shifted(plan, offset):
    trajs = tuple(replace(t, waypoints=tuple(Waypoint(w.x + offset[0], w.y + offset[1], w.v) for w in t.waypoints))
                  for t in plan.trajectories)
    return replace(plan, trajectories=trajs)


def test_planned_rear_end_passes(rear_end):
    verdict = check_sim(rear_end)
    assert verdict.overall, verdict.diagnostics
    assert failure_category(verdict) is None


def test_two_metre_offset_on_a_three_metre_lane_crosses(rear_end):
    lane = rear_end.binding.participants["P1"].actions[0].lane
    assert lane.width == pytest.approx(3.0)
    offset = geo.scale(geo.right_normal(lane.direction), 2.0)
    bad = replace(rear_end, plans={**rear_end.plans, "P1": shifted(rear_end.plans["P1"], offset)})
    verdict = check_sim(bad)
    assert not verdict.no_illegal_crossing
    assert verdict.angle_match
    assert failure_category(verdict) == "crossing"
    assert verdict.diagnostics[0]["participant"] == "P1"


def test_rear_end_at_a_right_angle_fails_the_angle_check(rear_end):
    plan = rear_end.plans["P2"]
    last = plan.trajectories[-1]
    wps = list(last.waypoints)
    before = wps[-2]
    d = geo.sub(wps[-1].pos, before.pos)
    turned = geo.add(before.pos, geo.rotate(d, math.pi / 2))
    wps[-1] = Waypoint(turned[0], turned[1], wps[-1].v)
    bent = replace(plan, trajectories=plan.trajectories[:-1] + (replace(last, waypoints=tuple(wps)),))
    verdict = check_sim(replace(rear_end, plans={**rear_end.plans, "P2": bent}))
    assert not verdict.angle_match
    assert failure_category(verdict) == "crash_type_mismatch"
    assert verdict.diagnostics[-1]["relative_heading_deg"] == pytest.approx(90.0, abs=1e-6)


def test_late_arrival_breaks_simultaneity(rear_end):
    plan = rear_end.plans["P2"]
    slow = replace(plan, trajectories=tuple(replace(t, durations=tuple(d * 3 for d in t.durations))
                                            for t in plan.trajectories))
    verdict = check_sim(replace(rear_end, plans={**rear_end.plans, "P2": slow}))
    assert not verdict.simultaneity
    assert failure_category(verdict) == "trajectory_planning"


def test_wider_tolerance_bands_are_honoured(rear_end):
    tight = SimTolerances(heading_bands={rear_end.abstract.crash_type: (170.0, 180.0)})
    assert not check_sim(rear_end, tolerances=tight).angle_match


def test_replay_covers_every_participant(rear_end):
    trace = replay(rear_end)
    assert set(trace.states) == {"P1", "P2"}
    gap = abs(trace.final("P1").t - trace.final("P2").t)
    assert gap <= 0.5


# ---------------------------------------------------------------------------
# SRR


def test_forty_seven_of_fifty():
    rows = [(i, [True]) for i in range(47)] + [(i, [False]) for i in range(3)]
    assert compute_srr(rows) == pytest.approx(0.94)


def test_all_passing():
    assert compute_srr([("a", [True, True]), ("b", [True])]) == 1.0


def test_every_trajectory_of_a_report_must_pass():
    assert compute_srr([("a", [True, False]), ("b", [True])]) == 0.5


def test_report_without_trajectories_fails():
    assert compute_srr([("a", []), ("b", [True])]) == 0.5


def test_sim_verdicts_are_accepted():
    ok = SimVerdict(True, True, True)
    bad = SimVerdict(True, False, True)
    assert compute_srr([("a", [ok]), ("b", [ok, bad])]) == 0.5


def test_srr_needs_input():
    with pytest.raises(EmptyInput):
        compute_srr([])


def test_srr_table_groups_by_road_type():
    rows = [("Intersection", "a", [True]), ("Intersection", "b", [False]), ("StraightRoad", "c", [True])]
    table = srr_table(rows)
    assert table == {"Intersection": {"reports": 2, "passed": 1, "srr": 0.5},
                     "StraightRoad": {"reports": 1, "passed": 1, "srr": 1.0}}


# ---------------------------------------------------------------------------
# test generation


def test_two_vehicles_give_two_tests(rear_end):
    cases = generate_tests(rear_end)
    assert [c.ego_id for c in cases] == ["P1", "P2"]
    for case in cases:
        assert case.ego_id not in case.npcs
        other = "P2" if case.ego_id == "P1" else "P1"
        expected = tuple((t, w.x, w.y, w.v) for _, w, t in rear_end.plans[other].timed_waypoints())
        assert case.npcs[other] == expected
        assert case.destination == rear_end.plans[case.ego_id].final_position


def test_pedestrian_is_never_ego():
    (sc,) = plan_scenario(corpus_abstracts()["s07_mid_block_pedestrian"], srr_network("straight_w35"),
                          PlannerConfig(max_scenarios=1))
    (case,) = generate_tests(sc)
    assert case.ego_id == "P1"
    assert case.npc_kinds == {"P2": "Pedestrian"}


def test_test_case_document_round_trip(rear_end):
    for case in generate_tests(rear_end, v_min=0.7):
        again = test_case_from_dict(json.loads(json.dumps(case.to_dict())))
        assert again == case
        assert case.to_dict()["oracle"]["v_min_mps"] == 0.7


# ---------------------------------------------------------------------------
# collision oracle


def test_parked_ego_hit_from_behind_is_passive():
    verdict = collision_oracle(stub_agent_trace(oracle_case("parked_ego")), "EGO")
    assert verdict.kind == "PassiveCollision"
    assert not verdict.counted


def test_moving_ego_collision_is_counted():
    case = oracle_case("moving_ego")
    verdict = collision_oracle(stub_agent_trace(case), "EGO", case.v_min)
    assert verdict.kind == "Collision" and verdict.counted
    assert verdict.other == "NPC1"
    assert verdict.ego_speed >= 0.5


def test_ego_that_never_meets_the_npc():
    case = oracle_case("moving_ego")
    verdict = collision_oracle(stub_agent_trace(case, speed=2.0), "EGO")
    assert verdict.kind == "NoCollision"


def test_trace_without_ego():
    trace = stub_agent_trace(oracle_case("moving_ego"))
    with pytest.raises(MissingEgoChannel):
        collision_oracle(trace, "SOMEONE_ELSE")


@settings(max_examples=300)
@given(st.floats(0, 20), st.floats(0, 15), st.floats(0, 15))
def test_raising_v_min_never_creates_a_collision(speed, a, b):
    lo, hi = sorted((a, b))
    trace = stub_agent_trace(oracle_case("moving_ego"), speed=speed)
    strict = collision_oracle(trace, "EGO", hi)
    loose = collision_oracle(trace, "EGO", lo)
    if strict.counted:
        assert loose.counted
    assert (strict.kind == "NoCollision") == (loose.kind == "NoCollision")


def test_verdict_lines_are_sorted_json():
    text = verdict_lines([{"b": 1, "a": 2}, {"verdict": "Collision"}])
    assert text.splitlines() == ['{"a": 2, "b": 1}', '{"verdict": "Collision"}']
