"""Prompt patterns for the three abstract layers, loaded from the bundled TOML templates."""
from __future__ import annotations

import sys
from dataclasses import dataclass
from enum import Enum
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class Layer(str, Enum):
    ENVIRONMENT = "Environment"
    ROAD_NETWORK = "RoadNetwork"
    DYNAMIC_OBJECTS = "DynamicObjects"


LAYER_ATTRIBUTES: dict[Layer, tuple[str, ...]] = {
    Layer.ENVIRONMENT: ("Weather", "Lighting"),
    Layer.ROAD_NETWORK: ("CollisionLocation", "LaneNum", "SpeedLimit"),
    Layer.DYNAMIC_OBJECTS: ("ParticipantsNumber", "CrashType", "DrivingDirections", "RunningLanes",
                            "DrivingActions"),
}
# Tags the parser accepts beyond the table attributes.
EXTRA_TAGS: dict[Layer, tuple[str, ...]] = {Layer.DYNAMIC_OBJECTS: ("Striker",)}

_TEMPLATE_FILES = {
    Layer.ENVIRONMENT: "environment.toml",
    Layer.ROAD_NETWORK: "road_network.toml",
    Layer.DYNAMIC_OBJECTS: "dynamic_objects.toml",
}


@dataclass(frozen=True)
class PromptPattern:
    layer: Layer
    task: str
    attribute_definitions: tuple[tuple[str, str], ...]
    heuristic_rules: tuple[str, ...]
    few_shot_examples: tuple[tuple[str, str], ...]

    def __post_init__(self):
        defined = {name for name, _ in self.attribute_definitions}
        required = set(LAYER_ATTRIBUTES[self.layer])
        allowed = required | set(EXTRA_TAGS.get(self.layer, ()))
        if not required <= defined or not defined <= allowed:
            raise ValueError(f"{self.layer.value} pattern must define exactly {sorted(required)}")
        if not self.few_shot_examples:
            raise ValueError("a pattern needs at least one few-shot example")

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attribute_definitions)


def pattern_from_toml(text: str) -> PromptPattern:
    doc = tomllib.loads(text)
    return PromptPattern(
        layer=Layer(doc["layer"]),
        task=doc["task"],
        attribute_definitions=tuple((a["name"], a["explanation"]) for a in doc["attributes"]),
        heuristic_rules=tuple(r["text"] for r in doc.get("rules", [])),
        few_shot_examples=tuple((e["report"], e["answer"]) for e in doc.get("examples", [])),
    )


def load_pattern(layer: Layer) -> PromptPattern:
    path = resources.files("crashsynth.extraction") / "templates" / _TEMPLATE_FILES[Layer(layer)]
    return pattern_from_toml(path.read_text(encoding="utf-8"))


def default_patterns() -> tuple[PromptPattern, ...]:
    return tuple(load_pattern(layer) for layer in Layer)
