from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from darcymg.errors import DimensionMismatchError, IndefiniteMatrixError, NullspaceError

from .sparse import SparseOperator

logger = logging.getLogger(__name__)

# Matrices up to this order are factorized densely.
DENSE_FACTOR_LIMIT = 1500
NULLSPACE_RTOL = 1e-10

MatrixLike = Union[SparseOperator, sps.spmatrix, np.ndarray]


class Factorization(ABC):
    """Read-only handle of a factorized operator."""

    def __init__(self, n: int) -> None:
        self._n = n

    @property
    def n(self) -> int:
        return self._n

    def solve(self, b: np.ndarray) -> np.ndarray:
        rhs = np.asarray(b, dtype=np.float64)
        if rhs.shape[0] != self._n:
            raise DimensionMismatchError("factorization rhs", self._n, int(rhs.shape[0]))
        return self._solve(rhs)

    @abstractmethod
    def _solve(self, b: np.ndarray) -> np.ndarray:
        pass


class DenseCholesky(Factorization):
    def __init__(self, matrix: np.ndarray) -> None:
        super().__init__(matrix.shape[0])
        try:
            self._factor = sla.cho_factor(matrix, lower=True, check_finite=True)
        except sla.LinAlgError as e:
            raise IndefiniteMatrixError(f"Cholesky failed, matrix is not positive definite: {e}") from e

    def _solve(self, b: np.ndarray) -> np.ndarray:
        return np.asarray(sla.cho_solve(self._factor, b))


class SparseCholesky(Factorization):
    """Symmetric-mode sparse LU without row pivoting, i.e. a permuted LDL^T.

    With `diag_pivot_thresh=0` SuperLU keeps the diagonal pivots, so the diagonal of U holds the
    pivots of the symmetric factorization: all of them are positive iff the matrix is SPD.
    """

    def __init__(self, matrix: sps.spmatrix) -> None:
        super().__init__(matrix.shape[0])
        try:
            self._lu = spla.splu(
                sps.csc_matrix(matrix),
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as e:
            raise IndefiniteMatrixError(f"sparse factorization failed: {e}") from e
        pivots = self._lu.U.diagonal()
        bad = np.flatnonzero(~(pivots > 0.0))
        if bad.size:
            raise IndefiniteMatrixError("non-positive pivot, matrix is not positive definite", int(bad[0]))

    def _solve(self, b: np.ndarray) -> np.ndarray:
        return np.asarray(self._lu.solve(b))


def cholesky(matrix: MatrixLike) -> Factorization:
    """Factorize a symmetric positive definite matrix; raises `IndefiniteMatrixError` otherwise."""
    if isinstance(matrix, SparseOperator):
        csr: Union[sps.spmatrix, np.ndarray] = matrix.csr
    else:
        csr = matrix
    n = csr.shape[0]
    if csr.shape[0] != csr.shape[1]:
        raise DimensionMismatchError("Cholesky columns", n, csr.shape[1])
    if n <= DENSE_FACTOR_LIMIT:
        dense = csr.toarray() if sps.issparse(csr) else np.asarray(csr, dtype=np.float64)
        return DenseCholesky(dense)
    return SparseCholesky(sps.csr_matrix(csr))


class DeflatedSolver(Factorization):
    """Pseudo-inverse solve for a PSD matrix with a one-dimensional kernel.

    The right-hand side is projected orthogonal to the kernel, A + sigma n n^T (sigma = trace / n)
    is Cholesky-factorized, and the result is projected again.
    """

    def __init__(self, matrix: MatrixLike, nullspace: np.ndarray) -> None:
        if isinstance(matrix, SparseOperator):
            dense = matrix.to_dense()
        elif sps.issparse(matrix):
            dense = matrix.toarray()
        else:
            dense = np.asarray(matrix, dtype=np.float64)
        super().__init__(dense.shape[0])
        kernel = np.asarray(nullspace, dtype=np.float64)
        if kernel.shape[0] != self._n:
            raise DimensionMismatchError("nullspace vector", self._n, int(kernel.shape[0]))
        self._nullspace = kernel / np.linalg.norm(kernel)
        self._matrix = dense
        self._norm = float(np.max(np.abs(dense).sum(axis=1)))
        sigma = float(np.trace(dense)) / self._n
        shifted = dense + sigma * np.outer(self._nullspace, self._nullspace)
        try:
            self._factor = DenseCholesky(shifted)
        except IndefiniteMatrixError as e:
            raise NullspaceError(float("inf")) from e

    @property
    def nullspace(self) -> np.ndarray:
        return self._nullspace

    def project(self, v: np.ndarray) -> np.ndarray:
        return v - self._nullspace * float(self._nullspace @ v)

    def _solve(self, b: np.ndarray) -> np.ndarray:
        compatible = self.project(b)
        x = self.project(self._factor.solve(compatible))
        # normwise backward error with the row-sum norm of A
        scale = self._norm * float(np.max(np.abs(x), initial=0.0)) + float(np.max(np.abs(compatible), initial=0.0))
        if scale > 0.0:
            residual = float(np.max(np.abs(self._matrix @ x - compatible))) / scale
            if residual > NULLSPACE_RTOL:
                raise NullspaceError(residual)
        return x


def deflated_solve(matrix: MatrixLike, nullspace: np.ndarray, b: np.ndarray) -> np.ndarray:
    return DeflatedSolver(matrix, nullspace).solve(b)
