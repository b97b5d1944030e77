"""Exception types shared across the package."""


class FifError(Exception):
    """Base class for all fiflab errors."""


class DataValidationError(FifError, ValueError):
    """Interpolation data violates a structural invariant."""


class ScalingError(FifError, ValueError):
    """A vertical scaling factor is outside the contractive range."""


class GridError(FifError, ValueError):
    """A sample grid does not cover the required domain or does not match."""


class UnsupportedCaseError(FifError, ValueError):
    """The requested operation is defined only for a narrower input class."""


class ConvergenceWarning(UserWarning):
    """Fixed-point iteration stopped before reaching the requested tolerance."""
