"""Exception types shared across the package.

Input problems (bad shapes, inconsistent data, malformed files) raise
InputError; breakdowns of the numerics (iteration limits, singular
factorizations) raise NumericalError. Both carry plain-text messages
meant to be actionable without a debugger.
"""

from __future__ import annotations

import numpy as np


class InputError(ValueError):
    """Raised when caller-supplied data violates a documented precondition."""


class DataFormatError(InputError):
    """Raised for malformed config or CSV input; message names file and line."""


class NumericalError(RuntimeError):
    """Raised when an algorithm fails to converge or loses numerical validity."""


class IterationLimitError(NumericalError):
    """Simplex iteration budget exhausted.

    Carries the last primal iterate so callers can inspect how far the
    solve progressed.
    """

    def __init__(self, message: str, last_x: np.ndarray | None = None):
        super().__init__(message)
        self.last_x = last_x
