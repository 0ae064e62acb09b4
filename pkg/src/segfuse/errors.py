"""Exception hierarchy shared across the toolkit.

Every error carries a machine-readable ``code`` that maps 1:1 onto the
error codes emitted by the HTTP service and the CLI.
"""

from __future__ import annotations


class SegfuseError(Exception):
    """Base class for all domain errors."""

    code = "error"


class ValidationError(SegfuseError):
    """Input violates a documented invariant (bad value, bad dimensions)."""

    code = "validation"


class FormatError(SegfuseError):
    """A byte stream or text record is not a well-formed encoding."""

    code = "format"


class NotFoundError(SegfuseError):
    code = "not_found"


class ConflictError(SegfuseError):
    """Optimistic-concurrency rejection; carries the current version."""

    code = "conflict"

    def __init__(self, message: str, current_version: int | None = None):
        super().__init__(message)
        self.current_version = current_version


class GoneError(SegfuseError):
    """The resource reached a terminal state and rejects mutation."""

    code = "gone"


class PreconditionError(SegfuseError):
    code = "precondition_failed"


class UnresolvedPixelsError(PreconditionError):
    """Finalization attempted while unlabeled sentinel pixels remain."""

    def __init__(self, count: int, first: tuple[int, int]):
        super().__init__(
            f"{count} unlabeled pixel(s) remain; first at (row={first[0]}, col={first[1]})"
        )
        self.count = count
        self.first = first
