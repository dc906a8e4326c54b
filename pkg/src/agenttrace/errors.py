"""Exception taxonomy shared by all modules.

Two bases matter for the CLI: ``DataError`` maps to exit code 2
(data/validation problems) and ``IoError`` to exit code 3 (filesystem
problems). Usage errors are handled by the argument parser itself.
"""

from __future__ import annotations


class AgentTraceError(Exception):
    """Base class for every error raised by this package."""


class DataError(AgentTraceError):
    """Input data violates a documented contract."""


class IoError(AgentTraceError):
    """Filesystem-level failure (missing or unwritable paths)."""


class MalformedDocument(DataError):
    """Trace file is not a JSON array of span objects."""

    def __init__(self, message: str, index: int | None = None) -> None:
        super().__init__(message if index is None else f"element {index}: {message}")
        self.index = index


class FieldTypeError(DataError):
    """A span field holds a value of the wrong JSON type."""

    def __init__(self, index: int, key: str, message: str) -> None:
        super().__init__(f"element {index}, key {key!r}: {message}")
        self.index = index
        self.key = key


class MissingFile(IoError):
    pass


class EmptyTrace(DataError):
    pass


class MultipleRoots(DataError):
    pass


class NoRootSpan(DataError):
    pass


class DuplicateRunId(DataError):
    pass


class NonMonotoneTimestamps(DataError):
    pass


class MalformedRow(DataError):
    pass


class EmptySamples(DataError):
    pass


class NoPairs(DataError):
    pass


class SequenceTooLong(DataError):
    pass


class JudgeUnavailable(AgentTraceError):
    pass


class MalformedJudgeReply(DataError):
    pass


class MismatchedRunSets(DataError):
    pass


class SeedMissing(DataError):
    pass
