from __future__ import annotations

import logging
from typing import List, Optional, Sequence

import numpy as np

from darcymg.core.linalg import DeflatedSolver, Factorization, SparseOperator, cholesky, dense_sym_eig
from darcymg.errors import DimensionMismatchError

logger = logging.getLogger(__name__)


class BlockJacobiSmoother:
    """Damped block Jacobi iteration `e <- e + omega D_B^{-1} (r - A e)` started from zero.

    `sweeps` iterations define `M^{-1} r`; the result is a symmetric operator since `D_B` is.
    A block that covers every degree of freedom of a singular operator is solved with the
    deflated pseudo-inverse.
    """

    def __init__(
        self,
        operator: SparseOperator,
        blocks: Sequence[np.ndarray],
        sweeps: int = 1,
        damping: float = 1.0,
        nullspace: Optional[np.ndarray] = None,
        level: str = "fine",
    ) -> None:
        if sweeps < 1:
            raise ValueError(f"smoother needs at least one sweep, got {sweeps}")
        if not 0.0 < damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {damping}")
        covered = np.concatenate([np.asarray(block) for block in blocks]) if blocks else np.zeros(0, dtype=np.int64)
        if covered.shape[0] != operator.nrows or np.unique(covered).shape[0] != operator.nrows:
            raise ValueError(f"{level} smoother blocks do not partition the {operator.nrows} degrees of freedom")
        self._operator = operator
        self._blocks: List[np.ndarray] = [np.sort(np.asarray(block)) for block in blocks]
        self._sweeps = sweeps
        self._damping = damping
        self._level = level
        self._factors: List[Factorization] = []
        for block in self._blocks:
            sub = operator.submatrix(block)
            if nullspace is not None and block.shape[0] == operator.nrows:
                self._factors.append(DeflatedSolver(sub, nullspace[block]))
            else:
                self._factors.append(cholesky(sub))
        logger.debug(f"{level} block Jacobi: {len(self._blocks)} blocks, {sweeps} sweeps, damping {damping}")

    @property
    def operator(self) -> SparseOperator:
        return self._operator

    @property
    def sweeps(self) -> int:
        return self._sweeps

    @property
    def damping(self) -> float:
        return self._damping

    @property
    def level(self) -> str:
        return self._level

    @property
    def num_blocks(self) -> int:
        return len(self._blocks)

    def block_solve(self, r: np.ndarray) -> np.ndarray:
        """`D_B^{-1} r`."""
        out = np.empty_like(r)
        for block, factor in zip(self._blocks, self._factors):
            out[block] = factor.solve(r[block])
        return out

    def apply(self, r: np.ndarray) -> np.ndarray:
        return smoother_apply(self, self._operator, r)


def smoother_apply(smoother: BlockJacobiSmoother, operator: SparseOperator, r: np.ndarray) -> np.ndarray:
    rhs = np.asarray(r, dtype=np.float64)
    if rhs.shape != (operator.nrows,):
        raise DimensionMismatchError(f"{smoother.level} smoother input", operator.nrows, int(rhs.size))
    e = smoother.damping * smoother.block_solve(rhs)
    for _ in range(smoother.sweeps - 1):
        e = e + smoother.damping * smoother.block_solve(rhs - operator @ e)
    return e


def dense_smoother_inverse(smoother: BlockJacobiSmoother) -> np.ndarray:
    n = smoother.operator.nrows
    return np.column_stack([smoother.apply(column) for column in np.eye(n)])


def smoother_contract_margin(smoother: BlockJacobiSmoother, operator: SparseOperator) -> float:
    """Smallest eigenvalue of `M + M^T - A`, computed densely."""
    m = np.linalg.inv(dense_smoother_inverse(smoother))
    a = operator.to_dense()
    contract = m + m.T - a
    return float(dense_sym_eig(0.5 * (contract + contract.T)).eigenvalues[0])


def smoother_contract_check(smoother: BlockJacobiSmoother, operator: SparseOperator) -> bool:
    margin = smoother_contract_margin(smoother, operator)
    if margin <= 0.0:
        logger.warning(f"{smoother.level} smoother is not convergent: lambda_min(M + M^T - A) = {margin:.3e}")
    return margin > 0.0
