"""Exception types shared across the package."""


class QHashLabError(Exception):
    """Base class for package errors."""


class DimensionError(QHashLabError, ValueError):
    """Operand shapes or subsystem dimensions do not agree."""


class NumericalError(QHashLabError, ArithmeticError):
    """A computation produced a value its construction guarantees cannot occur."""


class AuditViolation(QHashLabError, AssertionError):
    """A bound that must hold was found violated.

    The offending report is attached as ``report`` so callers can serialize it.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InfeasibleParameters(QHashLabError, ValueError):
    """A randomized construction hit its retry cap."""
