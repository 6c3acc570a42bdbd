"""Exception hierarchy shared across the package."""


class DiscresError(Exception):
    """Base class for all package-specific errors."""


class ParameterDomainError(DiscresError, ValueError):
    """A distribution parameter is outside its valid domain."""


class UnsupportedFamilyError(DiscresError, TypeError):
    """The requested operation is not defined for this family."""


class DegenerateDistributionError(DiscresError, ValueError):
    """The conditional distribution has no interior grid points."""


class DataFormatError(DiscresError, ValueError):
    """Input data could not be parsed or fails validation."""


class FittingError(DiscresError, RuntimeError):
    """Base class for model-fitting failures."""


class SingularDesignError(FittingError):
    """The design matrix is rank deficient for some parameter block."""


class NonConvergenceError(FittingError):
    """The optimizer hit its iteration cap before meeting tolerance.

    Carries the last iterate so callers can inspect where the search
    stalled.
    """

    def __init__(self, message, last_coefficients=None, last_gradient_norm=None):
        super().__init__(message)
        self.last_coefficients = last_coefficients
        self.last_gradient_norm = last_gradient_norm


class SeparationError(FittingError):
    """Complete separation detected: coefficients diverging in a logistic fit."""


class UndefinedCurveError(DiscresError, ValueError):
    """A curve quantity is undefined everywhere it was requested."""


class BandwidthSelectionError(DiscresError, RuntimeError):
    """The bandwidth objective was undefined at every mesh point."""
