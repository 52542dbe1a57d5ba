"""
Error hierarchy for the reweighting apps.

Every error carries the process exit code the management commands use when
the error escapes a command.
"""

from typing import Any, Optional


class ExtraError(Exception):
    """Base error for the reweighting apps."""

    exit_code = 1


class InputShapeError(ExtraError, ValueError):
    """Inputs have the wrong dimension, shape or count."""

    exit_code = 2


class DomainError(ExtraError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class SupportViolationError(DomainError):
    """Target mass where the source has none."""

    def __init__(self, message: str, x: Any = None, u: Optional[int] = None):
        super().__init__(message)
        self.x = x
        self.u = u


class NumericRangeError(ExtraError, FloatingPointError):
    """An exponent or reduction left the representable range."""

    exit_code = 3

    def __init__(self, message: str, exponent: Optional[float] = None, row: Optional[int] = None):
        super().__init__(message)
        self.exponent = exponent
        self.row = row


class DivergenceError(ExtraError):
    """Training or fitting produced a non-finite objective."""

    exit_code = 3

    def __init__(self, message: str, trace: Any = None, hint: str = ''):
        super().__init__(f"{message}. {hint}".strip() if hint else message)
        self.trace = trace
        self.hint = hint


class EmptySourceError(ExtraError):
    """An auction stream contains no won auctions."""

    exit_code = 2


class ConfigValidationError(ExtraError):
    """A run config document failed validation."""

    exit_code = 2

    def __init__(self, message: str, errors: Any = None):
        super().__init__(message)
        self.errors = errors or {}


class SchemaError(ExtraError):
    """A CSV or JSON artifact does not match its schema."""

    exit_code = 2

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[str] = None,
    ):
        where = path or '<input>'
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line
        self.column = column

