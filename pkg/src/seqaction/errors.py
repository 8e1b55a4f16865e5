"""Exception hierarchy.

``UsageError`` covers bad arguments (CLI exit code 2); everything derived
from ``NumericError`` is a numerical failure (CLI exit code 1).
"""


class SacError(Exception):
    """Base class for all package errors."""


class UsageError(SacError, ValueError):
    """Invalid call: wrong dimensions, undeclared transition, bad window."""


class ConfigError(UsageError):
    """Invalid controller or experiment configuration."""


class NumericError(SacError, ArithmeticError):
    """Non-finite values or a failed numerical procedure."""


class DivergenceError(NumericError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class GrazingError(NumericError):
    """Guard crossed tangentially; transition-time sensitivity undefined."""


class ZenoError(NumericError):
    """Too many transitions inside one integration span."""


class AmbiguousTransitionError(NumericError):
    """Two guards crossed within the same integration step."""


class ActionRejected(SacError):
    """Line search exhausted without a sufficient decrease."""
