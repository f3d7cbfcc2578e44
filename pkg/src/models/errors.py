"""Exception hierarchy shared by models, services and front ends."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray


class PassivityError(Exception):
    """Base class for tool errors (not for scientific findings)."""


class ModelStructureError(PassivityError, ValueError):
    """A model field has the wrong shape or violates a structural invariant."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class NonConvergenceError(PassivityError, RuntimeError):
    def __init__(
        self, message: str, *, residual: float, iterate: NDArray[np.float64]
    ) -> None:
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual
        self.iterate = iterate


class SingularJacobianError(NonConvergenceError):
    pass


class InternalConsistencyError(PassivityError, RuntimeError):
    pass


class PreconditionError(PassivityError, ValueError):
    pass


class AnalysisError(PassivityError, RuntimeError):
    pass


class NotPassifiableError(PassivityError, ValueError):
    pass


class DivergenceError(PassivityError, RuntimeError):
    def __init__(self, message: str, *, time: float) -> None:
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


class ModelFileError(PassivityError, ValueError):
    """Malformed model or parameter file; message names the field and position."""
