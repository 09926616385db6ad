"""Exception types shared across the package."""


class PhiLabError(ValueError):
    """Base class for all errors raised by this package."""


class NonHermitianError(PhiLabError):
    """Input matrix is not Hermitian within tolerance."""


class DimensionMismatchError(PhiLabError):
    """Operands have incompatible dimensions."""


class DomainError(PhiLabError):
    """A value (eigenvalue, parameter, node) lies outside the admissible domain."""


class SingularOperatorError(PhiLabError):
    """A linear map is numerically singular; carries the smallest singular value."""

    def __init__(self, message: str, smallest_singular_value: float):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class ClassGateError(PhiLabError):
    """A class-gated operation received a function without the required tag."""


class ConfigError(PhiLabError):
    """Invalid run configuration; detected before any computation starts."""
