"""Exception and warning types shared across the package."""

from __future__ import annotations


class SpdecohereError(Exception):
    """Base class for all package errors."""


class ValidationError(SpdecohereError, ValueError):
    """An input violates a documented invariant."""


class NonConvergentError(SpdecohereError, ArithmeticError):
    """A requested integral diverges (e.g. velocity jumps give a log-divergent moment)."""


class ToleranceNotMetError(SpdecohereError, ArithmeticError):
    """Raised only in strict mode; carries the best estimate found."""

    def __init__(self, message: str, value: float, error: float):
        super().__init__(message)
        self.value = value
        self.error = error


class ConfigError(SpdecohereError):
    """Malformed or invalid experiment/sweep configuration."""


class ProximityWarning(UserWarning):
    """The image-charge proximity regime (z0 << d, xi << d) is not well satisfied."""


class ValidityWarning(UserWarning):
    """A non-fatal validity bound (e.g. 2R < T_z (1 - v_y)) is violated."""
