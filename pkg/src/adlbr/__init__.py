"""AD-LBR: sparse non-negative stencils for anisotropic diffusion on grids."""

from adlbr.errors import (
    ConvergenceError,
    FormatError,
    InstabilityError,
    NotSPDError,
    SearchBoundError,
)
from adlbr.kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConvergenceError",
    "FormatError",
    "InstabilityError",
    "NotSPDError",
    "SearchBoundError",
]
