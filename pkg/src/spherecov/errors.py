"""Exception types shared across the package."""


class SpherecovError(Exception):
    """Base class for all library errors."""


class DomainError(SpherecovError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionMismatchError(SpherecovError, ValueError):
    """Operands live on spheres or products of incompatible structure."""


class ModelValidationError(SpherecovError, ValueError):
    """A model or one of its components violates a structural invariant."""


class NotPositiveDefiniteError(SpherecovError):
    """A matrix failed a positive-definiteness requirement."""

    def __init__(self, message, min_eigenvalue=None, witness=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.witness = witness


class InsufficientDataError(SpherecovError, ValueError):
    """Too few records, pairs or points to carry out the operation."""


class NumericalError(SpherecovError):
    """A linear-algebra step failed beyond the regularization policy."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class IngestError(SpherecovError, ValueError):
    """A data file could not be parsed or failed row validation."""
