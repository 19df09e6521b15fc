import numpy as np
import pytest

from darcymg.core.linalg import SparseOperator, row_sum_norm
from darcymg.errors import DimensionMismatchError, SymmetryError


@pytest.mark.parametrize(
    "matrix,x,expected",
    [
        ([[1.0, 0.0], [0.0, 1.0]], [3.0, 4.0], [3.0, 4.0]),
        ([[1.0, -1.0], [-1.0, 1.0]], [1.0, 1.0], [0.0, 0.0]),
        ([[2.0, -1.0], [-1.0, 2.0]], [1.0, 0.0], [2.0, -1.0]),
    ],
)
def test_matvec(matrix: list, x: list, expected: list) -> None:
    operator = SparseOperator.from_dense(np.array(matrix), symmetric=True)
    np.testing.assert_allclose(operator @ np.array(x), expected)


def test_from_triplets_sums_duplicates() -> None:
    rows = np.array([0, 0, 1, 1])
    cols = np.array([0, 0, 1, 0])
    values = np.array([1.0, 2.0, 5.0, -1.0])
    operator = SparseOperator.from_triplets(rows, cols, values, (2, 2))

    np.testing.assert_allclose(operator.to_dense(), [[3.0, 0.0], [-1.0, 5.0]])
    assert operator.nnz == 3
    assert list(operator.row_offsets) == [0, 1, 3]


def test_symmetric_flag_rejects_asymmetric_matrix() -> None:
    with pytest.raises(SymmetryError):
        SparseOperator.from_dense(np.array([[1.0, 0.5], [0.0, 1.0]]), symmetric=True)


def test_symmetric_flag_removes_roundoff_asymmetry() -> None:
    operator = SparseOperator.from_dense(np.array([[2.0, -1.0 + 1e-15], [-1.0, 2.0]]), symmetric=True)
    dense = operator.to_dense()
    assert dense[0, 1] == dense[1, 0]


def test_galerkin_matches_dense_triple_product(rng: np.random.Generator) -> None:
    a = rng.standard_normal((6, 6))
    a = a @ a.T + 6.0 * np.eye(6)
    r = rng.standard_normal((3, 6))
    operator = SparseOperator.from_dense(a, symmetric=True)

    coarse = operator.galerkin(SparseOperator.from_dense(r))

    assert coarse.is_symmetric
    np.testing.assert_allclose(coarse.to_dense(), r @ a @ r.T, rtol=1e-12, atol=1e-12)


def test_galerkin_dimension_mismatch() -> None:
    with pytest.raises(DimensionMismatchError):
        SparseOperator.identity(3).galerkin(SparseOperator.from_dense(np.ones((2, 4))))


def test_spmv_rejects_wrong_length() -> None:
    with pytest.raises(DimensionMismatchError):
        SparseOperator.identity(3) @ np.ones(2)


def test_row_sum_norm_bounds_spectral_norm(rng: np.random.Generator) -> None:
    a = rng.standard_normal((5, 5))
    a = a + a.T
    operator = SparseOperator.from_dense(a, symmetric=True)
    assert operator.norm_estimate() == pytest.approx(row_sum_norm(operator.csr))
    assert np.max(np.abs(np.linalg.eigvalsh(a))) <= operator.norm_estimate() + 1e-12


def test_submatrix_and_transpose() -> None:
    operator = SparseOperator.from_dense(np.arange(9.0).reshape(3, 3))
    np.testing.assert_allclose(operator.submatrix(np.array([0, 2])).toarray(), [[0.0, 2.0], [6.0, 8.0]])
    np.testing.assert_allclose(operator.transpose().to_dense(), np.arange(9.0).reshape(3, 3).T)
