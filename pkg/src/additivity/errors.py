"""Exception hierarchy shared across the package."""

from __future__ import annotations

import numpy as np


class AdditivityError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(AdditivityError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(AdditivityError, ValueError):
    """Inconsistent or invalid configuration values."""


class PartitionError(AdditivityError, ValueError):
    """Feature groups do not partition the feature set."""


class DegenerateDesignError(AdditivityError, ValueError):
    """A difference matrix would have zero residual degrees of freedom."""


class SingularMatrixError(AdditivityError, np.linalg.LinAlgError):
    """Cholesky factorization hit a pivot below tolerance.

    ``pivot`` is the zero-based index of the failing pivot and ``value`` the
    offending (pre-square-root) pivot value.
    """

    def __init__(self, message: str, pivot: int = -1, value: float = float("nan")):
        super().__init__(message)
        self.pivot = pivot
        self.value = value


class RankError(AdditivityError, np.linalg.LinAlgError):
    """Columns or rows are numerically linearly dependent."""


class IngestionError(AdditivityError, ValueError):
    """Input data could not be read into a dataset."""
