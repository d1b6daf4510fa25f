"""Exception hierarchy shared by every module."""


class HKFDEError(Exception):
    """Base class for all errors raised by :mod:`hkfde`."""


class ParameterDomainError(HKFDEError, ValueError):
    """An order, type, scale or exponent lies outside its admissible range."""


class EmptyDomainError(HKFDEError, ValueError):
    pass


class IncompatibleInputError(HKFDEError, ValueError):
    """Arrays, grids or trajectories that must line up do not."""


class InsufficientGridError(HKFDEError, ValueError):
    pass


class RhsEvaluationError(HKFDEError):
    """The user right-hand side failed or returned a non-finite value.

    ``t`` and ``x`` hold the first offending point when it can be located.
    """

    def __init__(self, message, t=None, x=None):
        super().__init__(message)
        self.t = t
        self.x = x


class RegimeError(HKFDEError, ValueError):
    """Series evaluation requested outside the regime where it is trusted."""


class CertificateInputError(HKFDEError):
    pass


class ConfigError(HKFDEError):
    """A run configuration is unreadable, malformed or incomplete."""
