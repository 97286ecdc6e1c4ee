"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration/IO problems -> 1,
validation and suite failures -> 2, solver failures -> 3.
"""

from __future__ import annotations


class OrthantSimError(Exception):
    """Base class for all package errors."""


class DimensionError(OrthantSimError):
    """Input has the wrong shape or an incompatible dimension."""


class InvalidEntryError(OrthantSimError):
    """Input contains NaN or infinite entries."""


class MatrixValidationError(OrthantSimError):
    """Matrix is outside the reflection nonsingular M-matrix class."""


class IndexSetError(OrthantSimError):
    """Index set is empty, unsorted, or out of range."""


class ParameterError(OrthantSimError):
    """Scalar or structured parameter outside its admissible range."""


class RangeError(OrthantSimError):
    """Time argument outside the path horizon."""


class OrderingError(OrthantSimError):
    """Vector expected to be weakly increasing is not."""


class AlignmentError(OrthantSimError):
    """Two paths do not share the same time grid or dimension."""


class DominationError(OrthantSimError):
    """Increment-domination precondition fails.

    Carries the first failing (s, t, component) triple when known.
    """

    def __init__(self, message: str, where: tuple[float, float, int] | None = None):
        super().__init__(message)
        self.where = where


class CovarianceError(OrthantSimError):
    """Covariance matrix is asymmetric or indefinite beyond tolerance."""


class DomainError(OrthantSimError):
    """Starting point lies outside the positive orthant."""


class ConvergenceError(OrthantSimError):
    """Iterative scheme did not converge within its iteration budget.

    ``details`` holds the last iterates / residuals for diagnosis.
    """

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


class PreconditionError(OrthantSimError):
    """A comparison checker's hypothesis does not hold for the inputs."""


class ConfigError(OrthantSimError):
    """CLI configuration is malformed or references missing files."""
