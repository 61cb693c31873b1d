"""Reconstruct road-generalizable crash scenarios from accident abstracts."""

from crashsynth.model import (
    AccidentAbstract,
    CrashType,
    DrivingAction,
    ParticipantSpec,
    parse_abstract,
    serialize_abstract,
)

__version__ = "0.1.0"

__all__ = [
    "AccidentAbstract",
    "CrashType",
    "DrivingAction",
    "ParticipantSpec",
    "parse_abstract",
    "serialize_abstract",
]
