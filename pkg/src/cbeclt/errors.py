"""Exception hierarchy for cbeclt."""


class CBEError(Exception):
    """Base class for all library errors."""


class DegenerateConfiguration(CBEError):
    """Two angles coincide, so the CbetaE density vanishes."""


class RootSeparationFailure(CBEError):
    """Eigenangle root finding could not separate or converge on all roots."""


class CutoffTooSmall(CBEError):
    """A Fourier-side sum was truncated before its tail became negligible."""


class QuadratureFailure(CBEError):
    """An adaptive quadrature did not reach the requested accuracy."""


class ParameterOutOfRange(CBEError, ValueError):
    """A parameter lies outside the range where a formula is valid."""


class NoConvergence(CBEError):
    """An iterative refinement stalled before meeting its tolerance."""


class ConfigError(CBEError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        loc = []
        if field is not None:
            loc.append(f"field '{field}'")
        if line is not None:
            loc.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
