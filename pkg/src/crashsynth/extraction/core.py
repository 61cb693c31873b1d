"""Layer-by-layer extraction of an accident abstract and the accuracy reporter."""
from __future__ import annotations

import csv
import io
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from crashsynth.errors import (ClientError, EmptyReport, LengthMismatch, MissingCore,
                               ParseError, SchemaError, UnknownAction)
from crashsynth.extraction.clients import REPORT_HEADER, ExtractionClient
from crashsynth.extraction.patterns import EXTRA_TAGS, LAYER_ATTRIBUTES, Layer, PromptPattern, default_patterns
from crashsynth.model import (MPH_TO_MPS, AccidentAbstract, ParticipantKind, ParticipantSpec, Role,
                              apply_defaults, normalize_action, parse_crash_type, parse_direction,
                              parse_lighting, parse_road_type, parse_weather)

TRANSPORT_RETRIES = 3
BACKOFF_BASE_S = 0.5

_TAG_RE = re.compile(r"<([A-Za-z]+)>(.*?)</\1>", re.S)
_ENTRY_RE = re.compile(r"(P\d+)\s*:\s*(\[[^\]]*\]|[^;,\[\]]+)", re.I)


def build_prompt(pattern: PromptPattern, report: str) -> str:
    if not report or not report.strip():
        raise EmptyReport("report text is empty")
    lines = [pattern.task, ""]
    lines += [explanation for _, explanation in pattern.attribute_definitions]
    lines.append("")
    lines += pattern.heuristic_rules
    lines.append("")
    for k, (excerpt, answer) in enumerate(pattern.few_shot_examples, 1):
        lines += [f"Example {k} report: {excerpt}", f"Example {k} answer:", answer, ""]
    lines += [REPORT_HEADER, report.strip(), "", "Answer:"]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LayerResult:
    layer: Layer
    values: Mapping[str, Any]  # attribute -> parsed value, None when missing
    rejected: Mapping[str, str] = field(default_factory=dict)  # attribute -> raw text we refused
    response: str = ""

    @property
    def missing(self) -> tuple[str, ...]:
        return tuple(k for k, v in self.values.items() if v is None)


def _per_participant(raw: str) -> dict[str, str]:
    return {pid.upper(): val.strip() for pid, val in _ENTRY_RE.findall(raw)}


def _parse_actions(raw: str):
    out = {}
    for pid, val in _per_participant(raw).items():
        labels = [s.strip() for s in val.strip("[] ").split(",") if s.strip()]
        out[pid] = tuple(normalize_action(s) for s in labels)
    if not out:
        raise ValueError("no participant entries")
    return out


def _parse_int(raw: str) -> int:
    value = int(re.fullmatch(r"\s*(\d+)\s*", raw).group(1))
    if value < 1:
        raise ValueError("must be positive")
    return value


def _parse_speed(raw: str) -> float:
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*(mph|miles per hour)?\s*", raw, re.I)
    value = float(m.group(1)) * MPH_TO_MPS
    if value <= 0:
        raise ValueError("speed must be positive")
    return value


def _parse_mapping(parser):
    def parse(raw: str):
        out = {pid: parser(v) for pid, v in _per_participant(raw).items()}
        if not out:
            raise ValueError("no participant entries")
        return out
    return parse


_PARSERS: dict[str, Callable[[str], Any]] = {
    "Weather": parse_weather,
    "Lighting": parse_lighting,
    "CollisionLocation": parse_road_type,
    "LaneNum": _parse_int,
    "SpeedLimit": _parse_speed,
    "ParticipantsNumber": _parse_int,
    "CrashType": parse_crash_type,
    "DrivingDirections": _parse_mapping(parse_direction),
    "RunningLanes": _parse_mapping(_parse_int),
    "DrivingActions": _parse_actions,
    "Striker": lambda raw: re.fullmatch(r"\s*(P\d+)\s*", raw, re.I).group(1).upper(),
}


def parse_response(layer: Layer, response: str) -> LayerResult:
    """Parse a tagged answer.  Values outside the closed vocabularies are rejected, never guessed.

    A blank response means every attribute is missing; a non-blank response
    carrying none of the layer's tags is malformed.
    """
    tags = LAYER_ATTRIBUTES[layer] + EXTRA_TAGS.get(layer, ())
    found = {name: raw for name, raw in _TAG_RE.findall(response) if name in tags}
    if response.strip() and not found:
        raise ParseError(f"{layer.value} answer has none of the expected tags")
    values: dict[str, Any] = {}
    rejected: dict[str, str] = {}
    for name in tags:
        raw = found.get(name, "").strip()
        if not raw:
            values[name] = None
            continue
        try:
            values[name] = _PARSERS[name](raw)
        except (SchemaError, UnknownAction, ValueError, AttributeError):
            values[name] = None
            rejected[name] = raw
    return LayerResult(layer, values, rejected, response)


def _complete(client: ExtractionClient, prompt: str, sleep: Callable[[float], None]) -> str:
    for attempt in range(TRANSPORT_RETRIES):
        try:
            return client.complete(prompt)
        except (ConnectionError, TimeoutError, OSError) as exc:
            if attempt == TRANSPORT_RETRIES - 1:
                raise ClientError(f"transport failed after {TRANSPORT_RETRIES} attempts: {exc}") from exc
            sleep(BACKOFF_BASE_S * 2 ** attempt)
    raise AssertionError("unreachable")


REPROMPT_SUFFIX = "\nYour previous answer was not in the required format. Reply only with the tags.\nAnswer:\n"


def extract_layer(client: ExtractionClient, pattern: PromptPattern, report: str, *,
                  sleep: Callable[[float], None] = time.sleep) -> LayerResult:
    prompt = build_prompt(pattern, report)
    response = _complete(client, prompt, sleep)
    try:
        return parse_response(pattern.layer, response)
    except ParseError:
        response = _complete(client, prompt + REPROMPT_SUFFIX, sleep)
        return parse_response(pattern.layer, response)


def _participants(dyn: Mapping[str, Any]) -> tuple[ParticipantSpec, ...]:
    actions = dyn.get("DrivingActions") or {}
    if not actions:
        raise MissingCore("no participant actions were extracted")
    directions = dyn.get("DrivingDirections") or {}
    lanes = dyn.get("RunningLanes") or {}
    striker = dyn.get("Striker")
    if striker not in actions:
        striker = next(iter(actions))  # reports usually introduce the striking unit first
    parts = []
    for pid, acts in actions.items():
        if pid not in directions:
            raise MissingCore(f"no travel direction extracted for {pid}")
        kind = ParticipantKind.PEDESTRIAN if all(a.is_pedestrian for a in acts) else ParticipantKind.VEHICLE
        parts.append(ParticipantSpec(pid, kind, Role.STRIKER if pid == striker else Role.VICTIM,
                                     directions[pid], lanes.get(pid, 1), acts))
    return tuple(parts)


def extract_abstract(client: ExtractionClient, report: str,
                     patterns: Sequence[PromptPattern] | None = None, *,
                     sleep: Callable[[float], None] = time.sleep) -> AccidentAbstract:
    merged: dict[str, Any] = {}
    for pattern in patterns or default_patterns():
        merged.update(extract_layer(client, pattern, report, sleep=sleep).values)
    partial = AccidentAbstract(
        collision_location=merged.get("CollisionLocation"),
        participants=_participants(merged),
        crash_type=merged.get("CrashType"),
        weather=merged.get("Weather"),
        lighting=merged.get("Lighting"),
        lane_num=merged.get("LaneNum"),
        speed_limit=merged.get("SpeedLimit"),
        participants_number=merged.get("ParticipantsNumber"),
    )
    return apply_defaults(partial)


# ---------------------------------------------------------------------------
# accuracy

ACCURACY_LAYOUT: tuple[tuple[str, tuple[tuple[str, str], ...]], ...] = (
    ("Environment Conditions", (("Weather", "Weather"), ("Lighting", "Light"))),
    ("RoadNetwork and Traffic Guidance", (("LaneNum", "LaneNum"), ("SpeedLimit", "SpeedLimit"),
                                          ("CollisionLocation", "CollisionLocation"))),
    ("Dynamic Objects", (("DrivingActions", "DrivingActions"), ("CrashType", "CrashType"),
                         ("DrivingDirections", "DrivingDirections"), ("RunningLanes", "RunningLanes"),
                         ("ParticipantsNumber", "ParticipantsNumber"))),
)

_SCALAR = {
    "Weather": lambda a: a.weather,
    "Lighting": lambda a: a.lighting,
    "LaneNum": lambda a: a.lane_num,
    "SpeedLimit": lambda a: None if a.speed_limit is None else round(a.speed_limit, 6),
    "CollisionLocation": lambda a: a.collision_location,
    "CrashType": lambda a: a.crash_type,
    "ParticipantsNumber": lambda a: len(a.participants),
}
_PER_PARTICIPANT = {
    "DrivingActions": lambda p: p.actions,
    "DrivingDirections": lambda p: p.driving_direction,
    "RunningLanes": lambda p: p.running_lane,
}


def evaluate_accuracy(predictions: Sequence[AccidentAbstract], gold: Sequence[AccidentAbstract]
                      ) -> dict[str, float]:
    """Per-attribute exact-match accuracy.

    List-valued attributes score each report as the fraction of its gold
    participants whose value matches the prediction's participant of the same
    id; those fractions are then averaged over reports.
    """
    if len(predictions) != len(gold):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(gold)} gold abstracts")
    if not gold:
        raise LengthMismatch("nothing to score")
    table = {}
    for name, get in _SCALAR.items():
        table[name] = sum(get(p) == get(g) for p, g in zip(predictions, gold)) / len(gold)
    for name, get in _PER_PARTICIPANT.items():
        total = 0.0
        for pred, g in zip(predictions, gold):
            by_id = {p.id: p for p in pred.participants}
            hits = sum(p.id in by_id and get(by_id[p.id]) == get(p) for p in g.participants)
            total += hits / len(g.participants)
        table[name] = total / len(gold)
    return {name: table[name] for _, attrs in ACCURACY_LAYOUT for name, _ in attrs}


def accuracy_csv(table: Mapping[str, float], label: str = "crashsynth") -> str:
    """Three-row CSV: layer header, attribute header, percentages."""
    layer_row, attr_row, value_row = ["Attributes"], [""], [label]
    for layer, attrs in ACCURACY_LAYOUT:
        for i, (name, header) in enumerate(attrs):
            layer_row.append(layer if i == 0 else "")
            attr_row.append(header)
            value_row.append(f"{100 * table[name]:.2f}%")
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows([layer_row, attr_row, value_row])
    return buf.getvalue()
