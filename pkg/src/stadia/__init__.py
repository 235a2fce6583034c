"""Adiabatic schedule synthesis from partial spectra, with NH lattice dynamics.

Modules: :mod:`~stadia.spectral`, :mod:`~stadia.models`, :mod:`~stadia.schedule`,
:mod:`~stadia.dynamics`, :mod:`~stadia.topology`, :mod:`~stadia.cli`.
"""

__version__ = "0.1.0"

from .errors import (AccumulatorOverflow, ConvergenceError, DegeneracyError, GapClosureError,
                     NormExplosion, NumericalError, StadiaError, TrackingError, ValidationError)

__all__ = [
    "__version__",
    "StadiaError", "ValidationError", "NumericalError", "ConvergenceError", "DegeneracyError",
    "TrackingError", "GapClosureError", "AccumulatorOverflow", "NormExplosion",
]
