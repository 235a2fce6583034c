"""Exception hierarchy shared by all modules.

Two families matter to callers: :class:`ValidationError` for bad inputs caught
before any numerics run, and :class:`NumericalError` for failures that arise
while computing. The CLI maps them to distinct exit codes.
"""


class StadiaError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(StadiaError, ValueError):
    """Input rejected before computation (bad shape, NaN, out-of-range value)."""


class NumericalError(StadiaError, ArithmeticError):
    """A numerical procedure failed or its preconditions broke mid-run."""


class ConvergenceError(NumericalError):
    """Eigensolver did not reach the residual target within its budget."""


class DegeneracyError(NumericalError):
    """Two eigenvalues (or a tracked pair) are closer than the allowed threshold."""

    def __init__(self, message, pair=None, separation=None):
        super().__init__(message)
        self.pair = pair
        self.separation = separation


class TrackingError(NumericalError):
    """Level matching between neighbouring sweep points is ambiguous."""


class GapClosureError(NumericalError):
    """The band gap closes where the computation requires it open."""


class AccumulatorOverflow(NumericalError):
    """The imaginary-gap exponent grew beyond the representable range."""


class NormExplosion(NumericalError):
    """Non-unitary evolution amplified the state norm past the abort limit."""
