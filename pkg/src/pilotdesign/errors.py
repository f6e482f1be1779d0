"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class InvalidInput(ValueError):
    """Raised when an argument violates a documented precondition."""


class SingularInformation(np.linalg.LinAlgError):
    """An information matrix is (numerically) singular.

    ``direction`` holds a unit vector spanning (approximately) the null space,
    i.e. the eigenvector of the smallest eigenvalue.
    """

    def __init__(self, message: str, direction: np.ndarray | None = None):
        super().__init__(message)
        self.direction = direction


class InfeasibleCandidates(InvalidInput):
    """The candidate set cannot support a nonsingular information matrix."""
