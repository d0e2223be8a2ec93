"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
2 for invalid input, 3 for numerical failure, 4 for file system trouble.
"""

from __future__ import annotations


class NablaTanError(Exception):
    exit_code = 3


# --- input / validation -------------------------------------------------------


class ExprSyntaxError(NablaTanError, ValueError):
    """Malformed expression source. ``position`` is a 0-based character offset."""

    exit_code = 2

    def __init__(self, message: str, source: str = "", position: int = 0):
        self.source = source
        self.position = position
        if source:
            message = f"{message} at position {position}\n  {source}\n  {' ' * position}^"
        super().__init__(message)


class UnknownVariable(NablaTanError, ValueError):
    exit_code = 2

    def __init__(self, name: str, allowed=()):
        self.name = name
        self.allowed = tuple(allowed)
        super().__init__(f"unknown variable {name!r} (declared: {', '.join(self.allowed) or 'none'})")


class DimensionMismatch(NablaTanError, ValueError):
    exit_code = 2


class MalformedType(NablaTanError, ValueError):
    exit_code = 2


class ParseError(NablaTanError):
    exit_code = 2


class ValidationError(NablaTanError, ValueError):
    exit_code = 2

    def __init__(self, field: str, message: str, line: int | None = None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}{where}: {message}")


# --- numerical ------------------------------------------------------------------


class DomainError(NablaTanError, ArithmeticError):
    """Evaluation outside the domain of an elementary operation."""


class OrderExhausted(NablaTanError):
    """A jet has too few coefficients for the requested derivative."""


class Undetermined(NablaTanError):
    """Every available jet coefficient is negligible, so no order can be read off."""


class DegeneracyMismatch(NablaTanError):
    pass


class StepLimitExceeded(NablaTanError):
    def __init__(self, message: str, partial=None):
        self.partial = partial
        super().__init__(message)


class BlowUp(NablaTanError):
    """State left the configured bound; ``partial`` keeps what was computed."""

    def __init__(self, message: str, partial=None):
        self.partial = partial
        super().__init__(message)


class NearSingularQuotient(NablaTanError):
    pass


class FrameUnavailable(NablaTanError):
    pass


class ResampleLimit(NablaTanError):
    pass


# --- io -----------------------------------------------------------------------------


class IoError(NablaTanError, OSError):
    exit_code = 4
