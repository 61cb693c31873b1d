import json
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from crashsynth import data
from crashsynth.errors import MissingCore, SchemaError, SemanticError, UnknownAction
from crashsynth.model import (
    MPH_TO_MPS,
    CrashType,
    Direction,
    DrivingAction,
    Lighting,
    ParticipantKind,
    RoadType,
    Weather,
    abstract_from_dict,
    apply_defaults,
    normalize_action,
    parse_abstract,
    serialize_abstract,
    validate_abstract,
)


def two_vehicle_doc(**road):
    return {
        "environment": {"weather": "Cloudy", "lighting": "Dark"},
        "road": {"lane_num": "4", "collision_location": "Intersection", "speed_limit_mph": "60", **road},
        "dynamic": {
            "participants_number": "2",
            "participants": [
                {"id": "P1", "kind": "Vehicle", "role": "Striker", "driving_direction": "North",
                 "running_lane": 1, "actions": ["follow lane", "turn left"]},
                {"id": "P2", "kind": "Vehicle", "role": "Victim", "driving_direction": "South",
                 "running_lane": 2, "actions": ["follow lane", "vehicle cross"]},
            ],
            "crash_type": "Frontal",
        },
    }


def test_table_one_values_parse():
    ab = abstract_from_dict(two_vehicle_doc())
    assert ab.weather is Weather.CLOUDY
    assert ab.lighting is Lighting.DARK
    assert ab.lane_num == 4
    assert ab.participants_number == 2
    assert ab.collision_location is RoadType.INTERSECTION
    assert ab.speed_limit == pytest.approx(60 * MPH_TO_MPS)
    assert ab.crash.striker_id == "P1" and ab.crash.victim_ids == ("P2",)
    assert ab.participants[0].actions == (DrivingAction.FOLLOW_LANE, DrivingAction.TURN_LEFT)


def test_participant_count_mismatch_is_semantic_error():
    doc = two_vehicle_doc()
    doc["dynamic"]["participants_number"] = "3"
    with pytest.raises(SemanticError):
        abstract_from_dict(doc)


def test_unknown_action_label():
    doc = two_vehicle_doc()
    doc["dynamic"]["participants"][0]["actions"] = ["merge"]
    with pytest.raises(UnknownAction):
        abstract_from_dict(doc)


def test_running_lane_above_lane_num():
    doc = two_vehicle_doc(lane_num=1)
    with pytest.raises(SemanticError):
        abstract_from_dict(doc)


@pytest.mark.parametrize("mutate", [
    lambda d: d["dynamic"]["participants"][1].update(role="Striker"),
    lambda d: d["dynamic"]["participants"][1].update(kind="Pedestrian"),
    lambda d: d["dynamic"]["participants"][0].update(actions=[]),
    lambda d: d["dynamic"]["participants"][1].update(id="P1"),
])
def test_type_invariants_rejected(mutate):
    doc = two_vehicle_doc()
    mutate(doc)
    with pytest.raises(SemanticError):
        abstract_from_dict(doc)


@pytest.mark.parametrize("text", ["not json", "[1, 2]", '{"environment": {}}'])
def test_malformed_documents(text):
    with pytest.raises(SchemaError):
        parse_abstract(text)


def test_invalid_enum_value_is_schema_error():
    doc = two_vehicle_doc()
    doc["environment"]["weather"] = "Hailstorm"
    with pytest.raises(SchemaError):
        abstract_from_dict(doc)


def test_missing_weather_defaults_to_clear():
    doc = two_vehicle_doc()
    del doc["environment"]["weather"]
    assert abstract_from_dict(doc).weather is Weather.CLEAR


def test_missing_lane_num_is_max_running_lane():
    doc = two_vehicle_doc()
    del doc["road"]["lane_num"]
    assert abstract_from_dict(doc).lane_num == 2


@pytest.mark.parametrize("road_type, limit", [("Intersection", 13.4), ("TJunction", 13.4), ("StraightRoad", 22.4)])
def test_speed_limit_defaults_per_road_type(road_type, limit):
    doc = two_vehicle_doc(collision_location=road_type)
    del doc["road"]["speed_limit_mph"]
    assert abstract_from_dict(doc).speed_limit == limit


def test_missing_participants_cannot_be_defaulted():
    doc = two_vehicle_doc()
    doc["dynamic"]["participants"] = []
    doc["dynamic"]["participants_number"] = None
    with pytest.raises(MissingCore):
        abstract_from_dict(doc)


def test_missing_collision_location_cannot_be_defaulted():
    doc = two_vehicle_doc()
    del doc["road"]["collision_location"]
    partial = abstract_from_dict(doc, fill_defaults=False)
    with pytest.raises(MissingCore):
        apply_defaults(partial)


@pytest.mark.parametrize("label, expected", [
    ("turn left", DrivingAction.TURN_LEFT),
    ("Follow Lane", DrivingAction.FOLLOW_LANE),
    ("  FOLLOW   lane ", DrivingAction.FOLLOW_LANE),
    ("U-Turn", DrivingAction.UTURN),
    ("VehicleCross", DrivingAction.VEHICLE_CROSS),
    ("pedestrian_walk", DrivingAction.PEDESTRIAN_WALK),
])
def test_normalize_action(label, expected):
    assert normalize_action(label) is expected


def test_normalize_unknown():
    with pytest.raises(UnknownAction):
        normalize_action("teleport")


def test_every_canonical_label_normalizes_to_itself():
    for action in DrivingAction:
        assert normalize_action(action.label) is action
        assert normalize_action(action.value) is action


def test_corpus_abstracts_validate_and_span_the_vocabulary():
    actions, types = set(), set()
    for path in data.corpus_paths():
        ab = parse_abstract(path.read_text())
        validate_abstract(ab)
        types.add(ab.collision_location)
        actions.update(a for p in ab.participants for a in p.actions)
    assert len(data.corpus_paths()) >= 30
    assert types == set(RoadType)
    assert actions == set(DrivingAction)


# ---------------------------------------------------------------------------
# generated abstracts

vehicle_actions = st.sampled_from(sorted(a for a in DrivingAction if not a.is_pedestrian))
pedestrian_actions = st.sampled_from([DrivingAction.PEDESTRIAN_CROSS, DrivingAction.PEDESTRIAN_WALK])


@st.composite
def abstract_docs(draw, *, complete=True):
    n = draw(st.integers(2, 4))
    lanes = draw(st.integers(1, 4))
    parts = []
    for i in range(n):
        pedestrian = i > 0 and draw(st.booleans())
        acts = draw(st.lists(pedestrian_actions if pedestrian else vehicle_actions, min_size=1, max_size=3))
        parts.append({
            "id": f"P{i + 1}",
            "kind": "Pedestrian" if pedestrian else "Vehicle",
            "role": "Striker" if i == 0 else "Victim",
            "driving_direction": draw(st.sampled_from([d.value for d in Direction])),
            "running_lane": draw(st.integers(1, lanes)),
            "actions": [a.label for a in acts],
        })
    optional = (lambda s: st.one_of(st.none(), s)) if not complete else (lambda s: s)
    return {
        "environment": {"weather": draw(optional(st.sampled_from([w.value for w in Weather]))),
                        "lighting": draw(optional(st.sampled_from([x.value for x in Lighting])))},
        "road": {"lane_num": draw(optional(st.just(lanes))),
                 "collision_location": draw(st.sampled_from([r.value for r in RoadType])),
                 "speed_limit_mph": draw(optional(st.integers(10, 80)))},
        "dynamic": {"participants_number": n, "participants": parts,
                    "crash_type": draw(st.sampled_from([c.value for c in CrashType]))},
    }


@settings(max_examples=300)
@given(abstract_docs())
def test_serialize_parse_round_trip(doc):
    ab = abstract_from_dict(doc)
    again = parse_abstract(serialize_abstract(ab))
    assert again == ab
    assert serialize_abstract(again) == serialize_abstract(ab)


@settings(max_examples=300)
@given(abstract_docs(complete=False))
def test_apply_defaults_idempotent_and_valid(doc):
    partial = abstract_from_dict(doc, fill_defaults=False)
    once = apply_defaults(partial)
    assert apply_defaults(once) == once
    validate_abstract(once)
    assert all(1 <= p.running_lane <= once.lane_num for p in once.participants)
    assert once.participants_number == len(once.participants)
    pedestrians = [p for p in once.participants if p.kind is ParticipantKind.PEDESTRIAN]
    assert all(a.is_pedestrian for p in pedestrians for a in p.actions)


def test_replace_keeps_frozen_semantics():
    ab = abstract_from_dict(two_vehicle_doc())
    other = replace(ab, weather=Weather.SNOWY)
    assert ab.weather is Weather.CLOUDY and other.weather is Weather.SNOWY
    assert json.loads(serialize_abstract(other))["environment"]["weather"] == "Snowy"
