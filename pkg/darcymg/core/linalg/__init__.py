from .eigen import EigenDecomposition, dense_sym_eig
from .factor import DeflatedSolver, DenseCholesky, Factorization, SparseCholesky, cholesky, deflated_solve
from .sparse import SparseOperator, row_sum_norm, spmv

__all__ = [
    "EigenDecomposition",
    "dense_sym_eig",
    "DeflatedSolver",
    "DenseCholesky",
    "Factorization",
    "SparseCholesky",
    "cholesky",
    "deflated_solve",
    "SparseOperator",
    "row_sum_norm",
    "spmv",
]
