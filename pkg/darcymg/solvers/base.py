from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field

from darcymg.core.linalg import SparseOperator
from darcymg.errors import DimensionMismatchError


class Preconditioner(ABC):
    """Symmetric positive approximate inverse `P^{-1}` applied to a residual."""

    @property
    @abstractmethod
    def size(self) -> int:
        pass

    @abstractmethod
    def _apply(self, r: np.ndarray) -> np.ndarray:
        pass

    def apply(self, r: np.ndarray) -> np.ndarray:
        vector = np.asarray(r, dtype=np.float64)
        if vector.shape != (self.size,):
            raise DimensionMismatchError("preconditioner input", self.size, int(vector.size))
        return self._apply(vector)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return self.apply(r)

    def dense_matrix(self) -> np.ndarray:
        """Explicit `P^{-1}`, one application per column."""
        return np.column_stack([self.apply(column) for column in np.eye(self.size)])


class IdentityPreconditioner(Preconditioner):
    def __init__(self, size: int) -> None:
        self._size = size

    @property
    def size(self) -> int:
        return self._size

    def _apply(self, r: np.ndarray) -> np.ndarray:
        return r.copy()


class MatrixPreconditioner(Preconditioner):
    """Applies a given matrix as `P^{-1}`."""

    def __init__(self, inverse: np.ndarray | SparseOperator) -> None:
        self._inverse = inverse
        self._size = inverse.shape[0]

    @property
    def size(self) -> int:
        return int(self._size)

    def _apply(self, r: np.ndarray) -> np.ndarray:
        return np.asarray(self._inverse @ r)


class SolveStatus(Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    INDEFINITE = "indefinite"
    BREAKDOWN = "breakdown"


class SpectrumEstimate(BaseModel):
    lambda_min: float
    lambda_max: float

    @property
    def condition(self) -> float:
        if self.lambda_min <= 0.0:
            return float("inf")
        return self.lambda_max / self.lambda_min


class SolverConfig(BaseModel):
    method: str = "cg"
    rtol: float = Field(default=1e-6, gt=0.0, lt=1.0)
    max_iterations: int = Field(default=1000, ge=1)
    restart: int = Field(default=30, ge=1)
    estimate_spectrum: bool = False


class SolveReport(BaseModel):
    method: str
    iterations: int = 0
    residual_history: List[float] = Field(default_factory=list)
    status: SolveStatus = SolveStatus.MAX_ITERATIONS
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    spectrum: Optional[SpectrumEstimate] = None

    @property
    def converged(self) -> bool:
        return self.status == SolveStatus.CONVERGED

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else 0.0
