"""Exception and warning types raised across the package."""


class CfposError(Exception):
    """Base class for all package errors."""


class ConfigError(CfposError, ValueError):
    """Invalid configuration or argument combination."""


class DomainError(CfposError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateGeometryError(DomainError):
    """Geometry for which a quantity is undefined (e.g. coincident sites)."""


class NonHermitianError(DomainError):
    """Matrix expected to be Hermitian is not, within tolerance."""


class NotPSDError(CfposError, ArithmeticError):
    """Cholesky factorization failed even at the maximum allowed jitter."""

    def __init__(self, message, jitter):
        super().__init__(f"{message} (attempted jitter {jitter:.3e})")
        self.jitter = jitter


class TrainingError(CfposError, RuntimeError):
    """Hyperparameter optimization produced no usable model."""


class ValidityWarning(UserWarning):
    """A model is used outside the range where its approximation holds."""


class RankDeficiencyWarning(UserWarning):
    """An estimate is formed from fewer samples than its dimension."""
