from .base import (
    IdentityPreconditioner,
    MatrixPreconditioner,
    Preconditioner,
    SolverConfig,
    SolveReport,
    SolveStatus,
    SpectrumEstimate,
)
from .krylov import KrylovSolverFactory, gmres, lanczos_estimate, pcg, write_residual_history
from .spectrum import SpectrumMode, dense_preconditioned_spectrum, estimate_condition

__all__ = [
    "IdentityPreconditioner",
    "MatrixPreconditioner",
    "Preconditioner",
    "SolverConfig",
    "SolveReport",
    "SolveStatus",
    "SpectrumEstimate",
    "KrylovSolverFactory",
    "gmres",
    "lanczos_estimate",
    "pcg",
    "write_residual_history",
    "SpectrumMode",
    "dense_preconditioned_spectrum",
    "estimate_condition",
]
