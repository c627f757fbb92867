"""Exception hierarchy shared by every credev module."""

from __future__ import annotations


class CredevError(Exception):
    """Base class for all errors raised by credev."""


class ValidationError(CredevError, ValueError):
    """A model violates one or more structural or numerical invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations) or "invalid model")


class InfeasibleError(ValidationError):
    """An interval credal set describes an empty polytope."""


class ResourceLimitError(CredevError):
    """An enumeration would exceed the configured combination cap."""


class InconsistentEvidenceError(CredevError):
    """The evidence has zero probability under the model."""


class InvalidEvidenceError(CredevError, ValueError):
    """Evidence is malformed or revises a state that is impossible in the model."""


class NotShadyError(InvalidEvidenceError):
    """A credal soft evidence was required to be shady but is not."""


class OverlappingEvidenceError(InvalidEvidenceError):
    """Two evidence items target the same variable outside a pooling block."""


class PreconditionError(CredevError):
    """An engine was called on a network it cannot handle exactly."""


class DegeneratePoolError(CredevError):
    """Geometric pooling annihilated every state."""


class DocumentError(CredevError):
    """A JSON document could not be parsed.

    ``path`` is a dotted location inside the document, ``line`` the 1-based
    source line when it could be determined.
    """

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        self.reason = message
        where = path or "<document>"
        if line is not None:
            where = f"{where} (line {line})"
        super().__init__(f"{where}: {message}")
