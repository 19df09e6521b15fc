from __future__ import annotations

import logging
from typing import Optional, Union

import numpy as np
import scipy.sparse as sps

from darcymg.errors import DimensionMismatchError, SymmetryError

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12


class SparseOperator:
    """Compressed-row sparse matrix with sorted, duplicate-free rows.

    Operators flagged symmetric are validated on construction: an asymmetry above
    `SYMMETRY_RTOL * norm_estimate` raises `SymmetryError`, a smaller one (round-off from
    Galerkin products) is removed by averaging with the transpose so that the stored
    (i, j) and (j, i) entries agree exactly.
    """

    def __init__(self, matrix: Union[sps.spmatrix, sps.sparray, np.ndarray], *, symmetric: bool = False) -> None:
        csr = sps.csr_matrix(matrix, dtype=np.float64)
        csr.sum_duplicates()
        csr.sort_indices()
        if symmetric:
            csr = self._symmetrized(csr)
        self._csr = csr
        self._symmetric = symmetric

    @staticmethod
    def _symmetrized(csr: sps.csr_matrix) -> sps.csr_matrix:
        if csr.shape[0] != csr.shape[1]:
            raise DimensionMismatchError("symmetric operator columns", csr.shape[0], csr.shape[1])
        diff = csr - csr.T
        asymmetry = float(abs(diff).max()) if diff.nnz else 0.0
        if asymmetry == 0.0:
            return csr
        tolerance = SYMMETRY_RTOL * max(row_sum_norm(csr), np.finfo(float).tiny)
        if asymmetry > tolerance:
            raise SymmetryError(asymmetry, tolerance)
        result = sps.csr_matrix(0.5 * (csr + csr.T))
        result.sum_duplicates()
        result.sort_indices()
        return result

    @classmethod
    def from_dense(cls, values: np.ndarray, *, symmetric: bool = False) -> SparseOperator:
        return cls(sps.csr_matrix(np.asarray(values, dtype=np.float64)), symmetric=symmetric)

    @classmethod
    def from_triplets(
        cls, rows: np.ndarray, cols: np.ndarray, values: np.ndarray, shape: tuple[int, int], *, symmetric: bool = False
    ) -> SparseOperator:
        return cls(sps.coo_matrix((values, (rows, cols)), shape=shape), symmetric=symmetric)

    @classmethod
    def identity(cls, n: int) -> SparseOperator:
        return cls(sps.identity(n, format="csr"), symmetric=True)

    @property
    def nrows(self) -> int:
        return int(self._csr.shape[0])

    @property
    def ncols(self) -> int:
        return int(self._csr.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    @property
    def row_offsets(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def column_indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def values(self) -> np.ndarray:
        return self._csr.data

    @property
    def is_symmetric(self) -> bool:
        return self._symmetric

    @property
    def csr(self) -> sps.csr_matrix:
        return self._csr

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    def diagonal(self) -> np.ndarray:
        return np.asarray(self._csr.diagonal())

    def norm_estimate(self) -> float:
        return row_sum_norm(self._csr)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return spmv(self, x)

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return spmv(self, x)

    def transpose(self) -> SparseOperator:
        return SparseOperator(self._csr.T, symmetric=self._symmetric)

    def submatrix(self, rows: np.ndarray, cols: Optional[np.ndarray] = None) -> sps.csr_matrix:
        cols = rows if cols is None else cols
        return sps.csr_matrix(self._csr[rows][:, cols])

    def to_dense(self) -> np.ndarray:
        return np.asarray(self._csr.toarray())

    def galerkin(self, restriction: SparseOperator) -> SparseOperator:
        """R A R^T, flagged symmetric when A is."""
        if restriction.ncols != self.nrows:
            raise DimensionMismatchError("restriction columns", self.nrows, restriction.ncols)
        product = restriction.csr @ self._csr @ restriction.csr.T
        return SparseOperator(product, symmetric=self._symmetric)

    def __repr__(self) -> str:
        return f"SparseOperator(shape={self.shape}, nnz={self.nnz}, symmetric={self._symmetric})"


def row_sum_norm(matrix: sps.spmatrix) -> float:
    """Infinity norm (max absolute row sum); an upper bound of the spectral norm for symmetric matrices."""
    if matrix.shape[0] == 0:
        return 0.0
    return float(np.max(np.asarray(abs(matrix).sum(axis=1)).ravel()))


def spmv(operator: SparseOperator, x: np.ndarray) -> np.ndarray:
    vector = np.asarray(x, dtype=np.float64)
    if vector.ndim != 1 or vector.shape[0] != operator.ncols:
        raise DimensionMismatchError("spmv input", operator.ncols, int(vector.shape[0]))
    return np.asarray(operator.csr @ vector)
