from __future__ import annotations


class CrashSynthError(Exception):
    """Base class for every error raised by the package."""


# abstracts
class SchemaError(CrashSynthError):
    pass


class SemanticError(CrashSynthError):
    pass


class UnknownAction(CrashSynthError):
    def __init__(self, label: str):
        super().__init__(f"unknown driving action {label!r}")
        self.label = label


class MissingCore(CrashSynthError):
    pass


# extraction
class EmptyReport(CrashSynthError):
    pass


class ClientError(CrashSynthError):
    pass


class ParseError(CrashSynthError):
    pass


class LengthMismatch(CrashSynthError):
    pass


# maps
class GeometryError(CrashSynthError):
    pass


class ConnectivityError(CrashSynthError):
    pass


class UnmappableDirections(CrashSynthError):
    pass


# constraints / solving
class UnsupportedAction(CrashSynthError):
    pass


class UnboundLane(CrashSynthError):
    pass


class DegenerateCollisionArea(CrashSynthError):
    pass


class Infeasible(CrashSynthError):
    def __init__(self, message: str = "constraints are unsatisfiable", core: tuple[str, ...] = ()):
        super().__init__(message if not core else f"{message}; conflicting groups: {', '.join(core)}")
        self.core = core


class SolverTimeout(CrashSynthError):
    pass


class BackendError(CrashSynthError):
    pass


# planning
class NoOverlap(CrashSynthError):
    pass


class NoCandidateSite(CrashSynthError):
    pass


class AllSitesInfeasible(CrashSynthError):
    def __init__(self, failures):
        super().__init__(f"every candidate site failed ({len(failures)} sites)")
        self.failures = failures


# validation
class EmptyInput(CrashSynthError):
    pass


class MissingEgoChannel(CrashSynthError):
    pass
