from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from darcymg.errors import DimensionMismatchError, FieldError, SymmetryError

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs sorted ascending; column k of `eigenvectors` belongs to `eigenvalues[k]`."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __len__(self) -> int:
        return int(self.eigenvalues.shape[0])

    def leading(self, count: int) -> EigenDecomposition:
        """The `count` smallest pairs."""
        return EigenDecomposition(self.eigenvalues[:count].copy(), self.eigenvectors[:, :count].copy())


def dense_sym_eig(a: np.ndarray, b_diagonal: Optional[np.ndarray] = None) -> EigenDecomposition:
    """Solve A w = lambda B w with B = diag(b_diagonal) positive.

    The problem is reduced to a standard one by the similarity B^{-1/2} A B^{-1/2} and handed to
    LAPACK `syev` (Householder tridiagonalization followed by implicit-shift QL/QR). Returned
    vectors are B-orthonormal.
    """
    matrix = np.asarray(a, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError("eigenproblem matrix columns", matrix.shape[0], matrix.shape[-1])
    n = matrix.shape[0]
    if n == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))

    scale = float(np.max(np.abs(matrix).sum(axis=1)))
    asymmetry = float(np.max(np.abs(matrix - matrix.T)))
    tolerance = SYMMETRY_RTOL * max(scale, np.finfo(float).tiny)
    if asymmetry > tolerance:
        raise SymmetryError(asymmetry, tolerance)

    if b_diagonal is None:
        weights = np.ones(n)
    else:
        weights = np.asarray(b_diagonal, dtype=np.float64).ravel()
        if weights.shape[0] != n:
            raise DimensionMismatchError("eigenproblem right-hand diagonal", n, weights.shape[0])
        if np.any(weights <= 0.0) or not np.all(np.isfinite(weights)):
            raise FieldError("right-hand operator of the eigenproblem must have strictly positive diagonal")

    inv_sqrt = 1.0 / np.sqrt(weights)
    reduced = inv_sqrt[:, None] * matrix * inv_sqrt[None, :]
    reduced = 0.5 * (reduced + reduced.T)
    eigenvalues, vectors = sla.eigh(reduced, driver="ev")
    eigenvectors = inv_sqrt[:, None] * vectors
    return EigenDecomposition(np.asarray(eigenvalues), np.asarray(eigenvectors))
