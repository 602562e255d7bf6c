"""Pseudospectral simulation and numerical certification toolkit for the
fractional Burgers-Hilbert equation

    u_t + u u_x = Lambda^alpha H u,    0 <= alpha < 1,

on a periodic surrogate of the real line.
"""

from .errors import (
    BHLabError,
    ConfigurationError,
    PreconditionError,
    QuadratureError,
    SchemeDivergenceError,
)
from .spectral import GridSpec, RealField, Spectrum

__version__ = "0.1.0"

__all__ = [
    "BHLabError",
    "ConfigurationError",
    "PreconditionError",
    "QuadratureError",
    "SchemeDivergenceError",
    "GridSpec",
    "RealField",
    "Spectrum",
]
