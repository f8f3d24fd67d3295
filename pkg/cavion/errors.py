"""
cavion Errors
Every failure the package raises derives from CavionError.
"""

from typing import Optional


class CavionError(Exception):
    """Base class for cavion errors."""


class InvalidParameterError(CavionError, ValueError):
    """A precondition on an input value does not hold."""


class InstabilityError(InvalidParameterError):
    """Plano-concave resonator outside its stability range (L >= R)."""


class FitInputError(InvalidParameterError):
    """Data handed to an estimator cannot be fitted."""


class UndefinedEstimateError(CavionError, ArithmeticError):
    """The requested estimate has no finite value for this data."""


class FormatError(CavionError):
    """Corrupt or unsupported time-tag file."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class ConfigError(CavionError):
    """Invalid run configuration; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class UsageError(CavionError):
    """Bad command-line usage."""
