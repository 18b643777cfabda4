"""Exception types shared across the package."""


class OTFluxError(Exception):
    """Base class for all otflux errors."""


class ValidationError(OTFluxError):
    """Invalid input data or a violated construction contract."""


class DimensionMismatchError(ValidationError):
    """Operands with incompatible shapes."""


class UnsupportedNormError(ValidationError):
    """Norm family not defined for the given payload or operation."""


class NumericalError(OTFluxError):
    """A numerical routine (eigensolve, SVD, LP) failed."""
