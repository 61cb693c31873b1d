import csv
import io
import json
from importlib import resources
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from crashsynth import data
from crashsynth.errors import ClientError, EmptyReport, LengthMismatch, MissingCore, ParseError
from crashsynth.extraction import (
    ACCURACY_LAYOUT,
    FailingClient,
    GoldEchoClient,
    LAYER_ATTRIBUTES,
    Layer,
    LiveClient,
    MockClient,
    ScriptedClient,
    accuracy_csv,
    build_prompt,
    default_patterns,
    evaluate_accuracy,
    extract_abstract,
    extract_layer,
    load_pattern,
    parse_response,
    render_answer,
)
from crashsynth.extraction.patterns import pattern_from_toml
from crashsynth.model import (CrashType, Direction, DrivingAction, Lighting, RoadType, Weather,
                              abstract_from_dict)

TEMPLATE_NAMES = {Layer.ENVIRONMENT: "environment.toml", Layer.ROAD_NETWORK: "road_network.toml",
                  Layer.DYNAMIC_OBJECTS: "dynamic_objects.toml"}

REPORT = "It was a cloudy night. V1 was northbound in lane one and turned left into the path of V2."


def no_sleep(_):
    pass


def fixture_pairs():
    out = []
    for d in data.report_dirs():
        text = (d / "report.txt").read_text()
        doc = json.loads((d / "gold.json").read_text())
        out.append((d.name, text, doc))
    return out


# ---------------------------------------------------------------------------
# prompts


def test_environment_prompt_names_its_tags_first():
    prompt = build_prompt(load_pattern(Layer.ENVIRONMENT), REPORT)
    first = prompt.splitlines()[0]
    assert "<Weather>" in first and "<Lighting>" in first
    assert first.startswith("You should help me extract environmental conditions")


def test_dynamic_prompt_names_all_five_attributes():
    prompt = build_prompt(load_pattern(Layer.DYNAMIC_OBJECTS), REPORT)
    for tag in LAYER_ATTRIBUTES[Layer.DYNAMIC_OBJECTS]:
        assert f"<{tag}>" in prompt.splitlines()[0]


def test_prompt_section_order():
    pattern = load_pattern(Layer.ENVIRONMENT)
    prompt = build_prompt(pattern, REPORT)
    positions = [
        prompt.index(pattern.task),
        prompt.index("it means the weather conditions when the accident happened"),
        prompt.index(pattern.heuristic_rules[0]),
        prompt.index(pattern.few_shot_examples[0][0]),
        prompt.index("Accident report:"),
        prompt.index(REPORT),
    ]
    assert positions == sorted(positions)
    assert prompt.rstrip().endswith("Answer:")


def test_intended_action_rule_is_in_the_dynamic_prompt():
    prompt = build_prompt(load_pattern(Layer.DYNAMIC_OBJECTS), REPORT)
    assert "this intended action must not be added" in prompt


@pytest.mark.parametrize("report", ["", "   \n\t"])
def test_empty_report(report):
    with pytest.raises(EmptyReport):
        build_prompt(load_pattern(Layer.ENVIRONMENT), report)


@settings(max_examples=200)
@given(st.text(min_size=1).filter(lambda s: s.strip()), st.sampled_from(list(Layer)))
def test_prompt_is_deterministic(report, layer):
    a = build_prompt(load_pattern(layer), report)
    template = resources.files("crashsynth.extraction") / "templates" / TEMPLATE_NAMES[layer]
    b = build_prompt(pattern_from_toml(template.read_text()), report)
    assert a == b


def test_patterns_cover_exactly_their_layer_attributes():
    for pattern in default_patterns():
        names = {n for n, _ in pattern.attribute_definitions}
        assert set(LAYER_ATTRIBUTES[pattern.layer]) <= names
        assert pattern.few_shot_examples


def test_pattern_rejects_wrong_attribute_set():
    with pytest.raises(ValueError):
        pattern_from_toml('layer = "Environment"\ntask = "t"\n[[attributes]]\nname = "Weather"\n'
                          'explanation = "e"\n[[examples]]\nreport = "r"\nanswer = "a"\n')


# ---------------------------------------------------------------------------
# layer extraction


def test_canned_table_values():
    pattern = load_pattern(Layer.ENVIRONMENT)
    client = MockClient({(REPORT, Layer.ENVIRONMENT): "<Weather>cloudy</Weather><Lighting>Dark</Lighting>"})
    result = extract_layer(client, pattern, REPORT, sleep=no_sleep)
    assert result.values == {"Weather": Weather.CLOUDY, "Lighting": Lighting.DARK}


def test_empty_answer_marks_everything_missing():
    pattern = load_pattern(Layer.ROAD_NETWORK)
    result = extract_layer(ScriptedClient([""]), pattern, REPORT, sleep=no_sleep)
    assert set(result.missing) == set(LAYER_ATTRIBUTES[Layer.ROAD_NETWORK])


def test_malformed_twice_is_parse_error():
    client = ScriptedClient(["I think it was raining", "still no tags"])
    with pytest.raises(ParseError):
        extract_layer(client, load_pattern(Layer.ENVIRONMENT), REPORT, sleep=no_sleep)
    assert len(client.prompts) == 2


def test_malformed_then_valid_recovers_on_reprompt():
    client = ScriptedClient(["no tags here", "<Weather>rainy</Weather><Lighting>Daylight</Lighting>"])
    result = extract_layer(client, load_pattern(Layer.ENVIRONMENT), REPORT, sleep=no_sleep)
    assert result.values["Weather"] is Weather.RAINY
    assert client.prompts[1].startswith(client.prompts[0])


def test_hallucinated_enum_values_are_rejected_not_guessed():
    result = parse_response(Layer.ENVIRONMENT, "<Weather>volcanic ash</Weather><Lighting>dusk</Lighting>")
    assert result.values == {"Weather": None, "Lighting": None}
    assert result.rejected == {"Weather": "volcanic ash", "Lighting": "dusk"}


def test_dynamic_answer_parses_per_participant():
    answer = ("<ParticipantsNumber>2</ParticipantsNumber><CrashType>front-to-side</CrashType>"
              "<DrivingDirections>P1:northbound; P2:westbound</DrivingDirections>"
              "<RunningLanes>P1:1; P2:2</RunningLanes>"
              "<DrivingActions>P1:[follow lane, turn left]; P2:[follow lane]</DrivingActions>")
    values = parse_response(Layer.DYNAMIC_OBJECTS, answer).values
    assert values["CrashType"] is CrashType.FRONT_TO_SIDE
    assert values["DrivingDirections"] == {"P1": Direction.NORTH, "P2": Direction.WEST}
    assert values["RunningLanes"] == {"P1": 1, "P2": 2}
    assert values["DrivingActions"]["P1"] == (DrivingAction.FOLLOW_LANE, DrivingAction.TURN_LEFT)


def test_transport_failure_retries_then_raises():
    client = FailingClient()
    waits = []
    with pytest.raises(ClientError):
        extract_layer(client, load_pattern(Layer.ENVIRONMENT), REPORT, sleep=waits.append)
    assert client.calls == 3
    assert waits == [0.5, 1.0]


def test_extract_abstract_transport_failure():
    with pytest.raises(ClientError):
        extract_abstract(FailingClient(), REPORT, sleep=no_sleep)


def test_live_client_needs_an_endpoint(monkeypatch):
    monkeypatch.delenv("CRASHSYNTH_LLM_ENDPOINT", raising=False)
    with pytest.raises(ClientError):
        LiveClient()


def test_live_client_parses_completion_bodies():
    seen = []

    class Response(io.BytesIO):
        def __enter__(self):
            return self

        def __exit__(self, *exc):
            return False

    def opener(req, timeout):
        seen.append((req.full_url, req.get_header("Authorization"), json.loads(req.data)))
        return Response(json.dumps({"choices": [{"message": {"content": "<Weather>clear</Weather>"}}]}).encode())

    client = LiveClient("http://example.invalid/complete", "secret", opener=opener)
    assert client.complete("hi") == "<Weather>clear</Weather>"
    assert seen == [("http://example.invalid/complete", "Bearer secret", {"prompt": "hi"})]


# ---------------------------------------------------------------------------
# end-to-end against the annotated fixtures


@pytest.mark.parametrize("name, text, gold_doc", fixture_pairs(), ids=[p[0] for p in fixture_pairs()])
def test_mock_extraction_reproduces_gold(name, text, gold_doc):
    client = GoldEchoClient({text: abstract_from_dict(gold_doc, fill_defaults=False)})
    assert extract_abstract(client, text, sleep=no_sleep) == abstract_from_dict(gold_doc)


def test_report_without_weather_defaults_to_clear():
    gold = abstract_from_dict(fixture_pairs()[0][2], fill_defaults=False)
    partial = replace(gold, weather=None)
    text = "V1 turned left in front of V2."
    out = extract_abstract(GoldEchoClient({text: partial}), text, sleep=no_sleep)
    assert out.weather is Weather.CLEAR


def test_unknown_report_has_no_participants():
    with pytest.raises(MissingCore):
        extract_abstract(GoldEchoClient({}), "A report nobody annotated.", sleep=no_sleep)


def test_answer_rendering_round_trips_through_the_parser():
    for _, _, doc in fixture_pairs():
        gold = abstract_from_dict(doc)
        for layer in Layer:
            values = parse_response(layer, render_answer(layer, gold)).values
            assert all(v is not None for k, v in values.items()), layer


# ---------------------------------------------------------------------------
# accuracy


def gold_abstracts():
    return [abstract_from_dict(doc) for _, _, doc in fixture_pairs()]


def test_identity_predictions_score_one():
    gold = gold_abstracts()
    assert set(evaluate_accuracy(gold, gold).values()) == {1.0}


def test_three_of_four_weather_is_75_percent():
    gold = gold_abstracts()[:4]
    preds = list(gold)
    wrong = Weather.SNOWY if gold[2].weather is not Weather.SNOWY else Weather.FOGGY
    preds[2] = replace(gold[2], weather=wrong)
    table = evaluate_accuracy(preds, gold)
    assert table["Weather"] == 0.75
    assert all(v == 1.0 for k, v in table.items() if k != "Weather")


def test_list_attributes_average_over_participants():
    gold = gold_abstracts()[:2]
    first = gold[0]
    bad = replace(first.participants[1], running_lane=first.participants[1].running_lane + 1)
    preds = [replace(first, participants=(first.participants[0], bad) + first.participants[2:]), gold[1]]
    table = evaluate_accuracy(preds, gold)
    expected = (1 - 1 / len(first.participants) + 1.0) / 2
    assert table["RunningLanes"] == pytest.approx(expected)


def test_length_mismatch():
    gold = gold_abstracts()
    with pytest.raises(LengthMismatch):
        evaluate_accuracy(gold[:2], gold[:3])


def test_accuracy_csv_layout():
    gold = gold_abstracts()
    rows = list(csv.reader(io.StringIO(accuracy_csv(evaluate_accuracy(gold, gold)))))
    assert len(rows) == 3
    assert rows[0][0] == "Attributes"
    assert [c for c in rows[0][1:] if c] == [layer for layer, _ in ACCURACY_LAYOUT]
    assert rows[1][1:] == ["Weather", "Light", "LaneNum", "SpeedLimit", "CollisionLocation", "DrivingActions",
                           "CrashType", "DrivingDirections", "RunningLanes", "ParticipantsNumber"]
    assert rows[2][1:] == ["100.00%"] * 10


def test_gold_fixtures_cover_all_road_types():
    assert {g.collision_location for g in gold_abstracts()} == set(RoadType)
