"""Exception hierarchy shared by every ppg module."""

from typing import Optional


class PPGError(Exception):
    """Base class for errors raised by the library."""


class DimensionError(PPGError, ValueError):
    """An array does not have the shape an operator or function expects."""


class DomainError(PPGError, ValueError):
    """An argument lies outside the domain of a function (negative weight, ν ∉ [0, 1], ...)."""


class NumericalError(PPGError, ArithmeticError):
    """A numerical kernel (SVD, power iteration) failed.

    ``last_estimate`` holds the best value reached before giving up, when there is one.
    """

    def __init__(self, message: str, last_estimate: Optional[float] = None):
        super().__init__(message)
        self.last_estimate = last_estimate


class ConfigurationError(PPGError, ValueError):
    """Solver or experiment parameters violate an admissibility condition."""

    def __init__(self, message: str, violated: Optional[str] = None):
        super().__init__(message)
        self.violated = violated


class UnsupportedStructureError(PPGError, TypeError):
    """A solver was handed a problem whose structure it cannot exploit."""


class PreconditionError(PPGError, ValueError):
    """A required input (e.g. a reference solution) is missing."""
