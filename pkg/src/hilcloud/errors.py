"""Exception hierarchy shared by every hilcloud module."""

from __future__ import annotations


class HilError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidArgument(HilError, ValueError):
    pass


class ValidationError(HilError, ValueError):
    pass


class ParseError(HilError, ValueError):
    """A file or byte stream could not be decoded.

    ``line`` is 1-based for line-oriented formats; ``offset`` is a byte or
    character offset for whole-document formats.
    """

    def __init__(self, message: str, *, line: int | None = None,
                 field: str | None = None, offset: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
        self.offset = offset


class InsufficientData(HilError):
    pass


class NotFound(HilError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else "not found"


class TransportError(HilError):
    def __init__(self, message: str, attempts: int = 1):
        super().__init__(f"{message} (after {attempts} attempt(s))")
        self.attempts = attempts


class PermissionDenied(HilError):
    pass


class NonFiniteError(HilError, FloatingPointError):
    pass


class SynthesisFailure(HilError):
    """The sequence model did not emit DONE within the step budget."""

    def __init__(self, message: str, partial_sequence: list[int]):
        super().__init__(message)
        self.partial_sequence = list(partial_sequence)


class InfeasibleTask(HilError):
    pass
