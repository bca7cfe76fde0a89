"""Exception types shared across the package."""

from __future__ import annotations


class FieldError(ValueError):
    """Invalid field description or non-canonical field element."""


class MalformedInput(ValueError):
    """A file or JSON document does not match its declared format."""


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class AssumptionError(ValueError):
    """A quadratic system violates A1/A2/A3 where a normalized one is required."""


class BudgetExceeded(RuntimeError):
    """An exhaustive search would exceed its configured budget."""
