"""Sampling the circular beta ensemble and checking pair-statistic limit theorems."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CBEError,
    ConfigError,
    CutoffTooSmall,
    DegenerateConfiguration,
    NoConvergence,
    ParameterOutOfRange,
    QuadratureFailure,
    RootSeparationFailure,
)

__all__ = [
    "__version__", "CBEError", "ConfigError", "CutoffTooSmall", "DegenerateConfiguration",
    "NoConvergence", "ParameterOutOfRange", "QuadratureFailure", "RootSeparationFailure",
]
