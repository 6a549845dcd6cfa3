"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class AdaptiveSTRError(Exception):
    """Base class for all package errors."""


class DomainError(AdaptiveSTRError, ValueError):
    """An operation was applied outside its mathematical domain (ln of a
    nonpositive value, NaN operands, division by zero, ...)."""


class PrecisionError(AdaptiveSTRError):
    """A trigonometric argument is too large to be reduced in double precision
    and no surrogate policy is enabled."""


class ConsistencyError(AdaptiveSTRError):
    """A quantity that must be positive by construction came out nonpositive."""


class DirectionLostError(AdaptiveSTRError):
    """Every regressor component saturated, so the update direction is unknown."""


class SaturationError(AdaptiveSTRError):
    """A saturated (SAT) value entered an operation whose result is undefined."""


class ValidationError(AdaptiveSTRError, ValueError):
    """Invalid user-supplied parameters."""


class UnsupportedError(AdaptiveSTRError):
    """The input has a shape the operation does not handle."""


class ExprError(AdaptiveSTRError, ValueError):
    """Base class for expression parsing errors; carries a byte offset."""

    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        self.reason = message
        super().__init__(f"{message} at offset {offset}")


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifierError(ExprError):
    pass


class NonConstantExponentError(ExprError):
    pass


class ConfigError(AdaptiveSTRError):
    """Configuration failed to parse or validate; ``path`` is the JSON path of
    the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        self.reason = message
        super().__init__(f"{path}: {message}" if path else message)
