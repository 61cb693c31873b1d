from crashsynth.extraction.clients import (ExtractionClient, FailingClient, GoldEchoClient, LiveClient, MockClient,
                                           ScriptedClient, render_answer)
from crashsynth.extraction.core import (ACCURACY_LAYOUT, LayerResult, accuracy_csv, build_prompt,
                                        evaluate_accuracy, extract_abstract, extract_layer, parse_response)
from crashsynth.extraction.patterns import LAYER_ATTRIBUTES, Layer, PromptPattern, default_patterns, load_pattern

__all__ = [
    "ACCURACY_LAYOUT", "ExtractionClient", "FailingClient", "GoldEchoClient", "LAYER_ATTRIBUTES", "Layer",
    "LayerResult", "LiveClient", "MockClient", "PromptPattern", "ScriptedClient", "accuracy_csv",
    "build_prompt", "default_patterns", "evaluate_accuracy", "extract_abstract", "extract_layer",
    "load_pattern", "parse_response", "render_answer",
]
