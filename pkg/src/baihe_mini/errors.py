"""Exception hierarchy for the engine.

Every error raised by engine components derives from EngineError so the
command loop can report it and keep the session alive.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine-level errors."""


# --- catalog / storage ---------------------------------------------------


class DuplicateTableError(EngineError):
    pass


class InvalidSchemaError(EngineError):
    pass


class TableNotFoundError(EngineError):
    pass


class UnknownColumnError(EngineError):
    pass


class CsvTypeError(EngineError):
    """A CSV field did not parse to the column's kind. Carries the 1-based line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


# --- SQL frontend --------------------------------------------------------


class ParseError(EngineError):
    """Syntax error with a 1-based line/column position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class UnsupportedFeatureError(EngineError):
    pass


class UnboundColumnError(EngineError):
    pass


class TypeMismatchError(EngineError):
    pass


# --- planner -------------------------------------------------------------


class PlanningError(EngineError):
    pass


class DirectiveError(EngineError):
    pass


# --- executor ------------------------------------------------------------


class RuntimeTypeError(EngineError):
    pass


# --- data collection -----------------------------------------------------


class DuplicateCollectorError(EngineError):
    pass


class EmptyFilterError(EngineError):
    pass


class UnknownCollectorError(EngineError):
    pass


class AlreadyRunningError(EngineError):
    pass


class UnknownDatasetError(EngineError):
    pass


class AmbiguousDatasetError(EngineError):
    pass


# --- model registry / IPC ------------------------------------------------


class DuplicateModelError(EngineError):
    pass


class BadManifestError(EngineError):
    pass


class TaskMismatchError(EngineError):
    pass


class UnknownModelError(EngineError):
    pass


class SpawnError(EngineError):
    pass


class HandshakeTimeoutError(EngineError):
    pass


class TransportError(EngineError):
    """Inference transport failure.

    kind is one of "timeout", "crashed", "protocol", "model" ("model" marks a
    well-formed response with ok=false).
    """

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
