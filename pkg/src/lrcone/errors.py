"""Shared exception and warning types."""


class LrconeError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(LrconeError, ValueError):
    """Invalid configuration text, key, or value."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class EigenConvergenceError(LrconeError, RuntimeError):
    """Eigensolver failed or produced vectors outside tolerance."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (index {index})")
        self.index = index


class UnitarityError(LrconeError, RuntimeError):
    """A propagator row lost unit norm beyond tolerance."""


class NearSingularError(LrconeError, RuntimeError):
    """Resolvent requested too close to the spectrum."""


class QuadratureError(LrconeError, RuntimeError):
    """Contour quadrature failed to reach the requested tolerance."""


class InsufficientDataError(LrconeError, ValueError):
    """Not enough usable samples or cells for a fit."""


class ReflectionWarning(UserWarning):
    """Result may be contaminated by reflection off the far chain end."""
