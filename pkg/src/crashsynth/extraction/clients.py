"""Text-completion clients.  Every test runs against the deterministic ones."""
from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
from typing import Callable, Iterable, Mapping, Protocol

from crashsynth.errors import ClientError
from crashsynth.extraction.patterns import Layer, default_patterns
from crashsynth.model import AccidentAbstract, Role

REPORT_HEADER = "Accident report:"

ENDPOINT_ENV = "CRASHSYNTH_LLM_ENDPOINT"
KEY_ENV = "CRASHSYNTH_LLM_KEY"


class ExtractionClient(Protocol):
    def complete(self, prompt: str) -> str: ...


def prompt_layer(prompt: str) -> Layer:
    """Recover which layer a prompt built by ``build_prompt`` asks for."""
    for pattern in default_patterns():
        if prompt.startswith(pattern.task):
            return pattern.layer
    raise ClientError("prompt does not start with a known layer task statement")


def prompt_report(prompt: str) -> str:
    idx = prompt.rfind(REPORT_HEADER)
    if idx < 0:
        raise ClientError("prompt carries no report section")
    return prompt[idx + len(REPORT_HEADER):].split("\nAnswer:")[0].strip()


def render_answer(layer: Layer, abstract: AccidentAbstract) -> str:
    """The tagged answer a perfect extractor would give for ``abstract``."""
    val = lambda v: "" if v is None else str(v)  # noqa: E731
    parts = abstract.participants
    if layer is Layer.ENVIRONMENT:
        tags = {"Weather": val(abstract.weather and abstract.weather.value.lower()),
                "Lighting": val(abstract.lighting and abstract.lighting.value)}
    elif layer is Layer.ROAD_NETWORK:
        speed = "" if abstract.speed_limit is None else f"{abstract.speed_limit / 0.44704:.12g}"
        tags = {"CollisionLocation": val(abstract.collision_location and abstract.collision_location.value),
                "LaneNum": val(abstract.lane_num), "SpeedLimit": speed}
    else:
        tags = {
            "ParticipantsNumber": str(len(parts)),
            "CrashType": val(abstract.crash_type and abstract.crash_type.value),
            "DrivingDirections": "; ".join(f"{p.id}:{p.driving_direction.label}" for p in parts),
            "RunningLanes": "; ".join(f"{p.id}:{p.running_lane}" for p in parts),
            "DrivingActions": "; ".join(f"{p.id}:[{', '.join(a.label for a in p.actions)}]" for p in parts),
            "Striker": next((p.id for p in parts if p.role is Role.STRIKER), ""),
        }
    return "\n".join(f"<{k}>{v}</{k}>" for k, v in tags.items())


class MockClient:
    """Canned answers keyed by (report text, layer); unknown keys give an empty answer."""

    def __init__(self, answers: Mapping[tuple[str, Layer], str]):
        self._answers = {(r.strip(), Layer(l)): a for (r, l), a in answers.items()}

    def complete(self, prompt: str) -> str:
        return self._answers.get((prompt_report(prompt), prompt_layer(prompt)), "")


class GoldEchoClient:
    """Answers every prompt from the gold abstract of the matching report."""

    def __init__(self, gold: Mapping[str, AccidentAbstract]):
        self._gold = {text.strip(): abstract for text, abstract in gold.items()}

    def complete(self, prompt: str) -> str:
        report = prompt_report(prompt)
        if report not in self._gold:
            return ""
        return render_answer(prompt_layer(prompt), self._gold[report])


class ScriptedClient:
    """Returns the scripted responses in order, then repeats the last one."""

    def __init__(self, responses: Iterable[str]):
        self._responses = list(responses)
        self.prompts: list[str] = []

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        idx = min(len(self.prompts), len(self._responses)) - 1
        return self._responses[idx]


class FailingClient:
    """Always fails at the transport level."""

    def __init__(self):
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        raise ConnectionError("endpoint unreachable")


class LiveClient:
    """POSTs ``{"prompt": ...}`` as JSON to the configured endpoint.

    Accepts either ``{"completion": text}``, ``{"text": text}`` or a chat-style
    ``{"choices": [{"message": {"content": text}}]}`` body.
    """

    def __init__(self, endpoint: str | None = None, key: str | None = None, timeout: float = 60.0,
                 opener: Callable = urllib.request.urlopen):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        self.key = key or os.environ.get(KEY_ENV)
        if not self.endpoint:
            raise ClientError(f"set {ENDPOINT_ENV} to use the live client")
        self.timeout = timeout
        self._open = opener

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        req = urllib.request.Request(self.endpoint, json.dumps({"prompt": prompt}).encode(), headers)
        try:
            with self._open(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError) as exc:
            raise ConnectionError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ClientError(f"endpoint returned non-JSON body: {exc}") from None
        for getter in (lambda b: b["completion"], lambda b: b["text"],
                       lambda b: b["choices"][0]["message"]["content"]):
            try:
                return str(getter(body))
            except (KeyError, IndexError, TypeError):
                continue
        raise ClientError("endpoint response has no completion text")
