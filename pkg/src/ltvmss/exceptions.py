"""Exception hierarchy shared by every module."""


class LTVMSSError(Exception):
    """Base class for all package errors."""


class ConfigError(LTVMSSError, ValueError):
    """Malformed or inconsistent system / channel / run configuration."""


class HorizonError(LTVMSSError, IndexError):
    """A time index outside the horizon of a finite recorded sequence."""


class NumericalError(LTVMSSError, ArithmeticError):
    """A numerical procedure failed (loss of definiteness, singular solve)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class SynthesisError(NumericalError):
    """Gain synthesis hit a singular ``B'PB``."""


class DivergenceError(NumericalError):
    """A series or moment recursion exceeded its overflow guard."""


class FitError(LTVMSSError, ValueError):
    """Rate fitting is impossible on the supplied data."""


class ThresholdError(LTVMSSError, ValueError):
    """A limit threshold is undefined (zero mean connectivity)."""
