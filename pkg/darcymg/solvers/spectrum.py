from __future__ import annotations

import logging
from enum import Enum
from typing import Optional

import numpy as np

from darcymg.core.linalg import SparseOperator
from darcymg.errors import ConfigError

from .base import IdentityPreconditioner, Preconditioner, SolverConfig, SpectrumEstimate
from .krylov import pcg

logger = logging.getLogger(__name__)

DENSE_SPECTRUM_LIMIT = 4096


class SpectrumMode(str, Enum):
    DENSE = "dense"
    LANCZOS = "lanczos"


def dense_preconditioned_spectrum(
    a: SparseOperator | np.ndarray, preconditioner_matrix: np.ndarray, nullspace: Optional[np.ndarray] = None
) -> np.ndarray:
    """Eigenvalues of `P^{-1} A` through the similar symmetric `L^T A L`, `P^{-1} = L L^T`.

    With a nullspace its (numerically zero) eigenvalue is removed.
    """
    dense_a = a.to_dense() if isinstance(a, SparseOperator) else np.asarray(a, dtype=np.float64)
    inverse = 0.5 * (preconditioner_matrix + preconditioner_matrix.T)
    lower = np.linalg.cholesky(inverse)
    similar = lower.T @ dense_a @ lower
    eigenvalues = np.linalg.eigvalsh(0.5 * (similar + similar.T))
    if nullspace is not None:
        eigenvalues = eigenvalues[1:]
    return eigenvalues


def estimate_condition(
    a: SparseOperator,
    preconditioner: Optional[Preconditioner] = None,
    mode: SpectrumMode = SpectrumMode.DENSE,
    nullspace: Optional[np.ndarray] = None,
    seed: int = 0,
) -> SpectrumEstimate:
    prec = preconditioner or IdentityPreconditioner(a.nrows)
    if mode == SpectrumMode.DENSE:
        if a.nrows > DENSE_SPECTRUM_LIMIT:
            limit = DENSE_SPECTRUM_LIMIT
            raise ConfigError("spectrum.mode", f"dense estimate is limited to {limit} unknowns, got {a.nrows}")
        eigenvalues = dense_preconditioned_spectrum(a, prec.dense_matrix(), nullspace)
        estimate = SpectrumEstimate(lambda_min=float(eigenvalues[0]), lambda_max=float(eigenvalues[-1]))
    else:
        rng = np.random.default_rng(seed)
        b = rng.standard_normal(a.nrows)
        config = SolverConfig(method="cg", rtol=1e-10, max_iterations=min(a.nrows, 500), estimate_spectrum=True)
        _, report = pcg(a, prec, b, config, nullspace=nullspace)
        if report.spectrum is None:
            raise ConfigError("spectrum.mode", "Lanczos estimate needs at least one CG iteration")
        estimate = report.spectrum
    logger.info(
        f"Spectrum ({mode.value}): [{estimate.lambda_min:.6e}, {estimate.lambda_max:.6e}], "
        f"cond {estimate.condition:.4e}"
    )
    return estimate
