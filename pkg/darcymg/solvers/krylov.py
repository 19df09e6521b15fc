from __future__ import annotations

import csv
import logging
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla

from darcymg.core.linalg import SparseOperator
from darcymg.errors import ConfigError, DimensionMismatchError

from .base import IdentityPreconditioner, Preconditioner, SolverConfig, SolveReport, SolveStatus, SpectrumEstimate

logger = logging.getLogger(__name__)

KrylovSolver = Callable[
    [SparseOperator, Optional[Preconditioner], np.ndarray, SolverConfig, Optional[np.ndarray], Optional[np.ndarray]],
    Tuple[np.ndarray, SolveReport],
]


def lanczos_estimate(alphas: Sequence[float], betas: Sequence[float]) -> SpectrumEstimate:
    """Extreme Ritz values of the Lanczos matrix hidden in the CG step lengths."""
    a = np.asarray(alphas, dtype=np.float64)
    b = np.asarray(betas, dtype=np.float64)[: a.shape[0] - 1]
    diagonal = 1.0 / a
    diagonal[1:] += b / a[:-1]
    off_diagonal = np.sqrt(b) / a[:-1]
    ritz = sla.eigh_tridiagonal(diagonal, off_diagonal, eigvals_only=True)
    return SpectrumEstimate(lambda_min=float(ritz[0]), lambda_max=float(ritz[-1]))


class _Projector:
    """Removes the component along a unit nullspace vector; identity when there is none."""

    def __init__(self, nullspace: Optional[np.ndarray]) -> None:
        self._vector = None if nullspace is None else nullspace / np.linalg.norm(nullspace)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        if self._vector is None:
            return v
        return v - self._vector * float(self._vector @ v)


def _prepare(
    a: SparseOperator, preconditioner: Optional[Preconditioner], b: np.ndarray, x0: Optional[np.ndarray]
) -> Tuple[Preconditioner, np.ndarray, np.ndarray]:
    rhs = np.asarray(b, dtype=np.float64)
    if rhs.shape != (a.nrows,):
        raise DimensionMismatchError("right-hand side", a.nrows, int(rhs.size))
    x = np.zeros(a.nrows) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (a.nrows,):
        raise DimensionMismatchError("initial guess", a.nrows, int(x.size))
    return preconditioner or IdentityPreconditioner(a.nrows), rhs, x


def pcg(
    a: SparseOperator,
    preconditioner: Optional[Preconditioner],
    b: np.ndarray,
    config: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
    nullspace: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate gradients.

    With a nullspace the right-hand side, the preconditioned residuals and the iterate are kept
    orthogonal to it. Relative residuals are measured against the (projected) right-hand side.
    """
    config = config or SolverConfig(method="cg")
    prec, rhs, x = _prepare(a, preconditioner, b, x0)
    project = _Projector(nullspace)
    rhs = project(rhs)
    x = project(x)
    report = SolveReport(method="cg")
    start = time.perf_counter()

    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0:
        report.status = SolveStatus.CONVERGED
        report.residual_history = [0.0]
        return np.zeros(a.nrows), report

    r = rhs - a @ x
    history = [float(np.linalg.norm(r)) / b_norm]
    alphas: List[float] = []
    betas: List[float] = []
    status = SolveStatus.MAX_ITERATIONS
    if history[0] <= config.rtol:
        status = SolveStatus.CONVERGED
    else:
        z = project(prec.apply(r))
        rz = float(r @ z)
        p = z.copy()
        for iteration in range(1, config.max_iterations + 1):
            ap = a @ p
            curvature = float(p @ ap)
            if curvature <= 0.0 or rz <= 0.0:
                status = SolveStatus.INDEFINITE
                logger.warning(f"CG detected a non-positive curvature at iteration {iteration}")
                break
            alpha = rz / curvature
            x += alpha * p
            r -= alpha * ap
            alphas.append(alpha)
            history.append(float(np.linalg.norm(r)) / b_norm)
            logger.debug(f"cg iteration {iteration}: relres {history[-1]:.3e}")
            if history[-1] <= config.rtol:
                status = SolveStatus.CONVERGED
                break
            z = project(prec.apply(r))
            rz_next = float(r @ z)
            beta = rz_next / rz
            betas.append(beta)
            rz = rz_next
            p = z + beta * p

    report.iterations = len(history) - 1
    report.residual_history = history
    report.status = status
    report.solve_seconds = time.perf_counter() - start
    if config.estimate_spectrum and alphas:
        report.spectrum = lanczos_estimate(alphas, betas)
    logger.info(f"cg {status.value} in {report.iterations} iterations, relres {history[-1]:.3e}")
    return project(x), report


def gmres(
    a: SparseOperator,
    preconditioner: Optional[Preconditioner],
    b: np.ndarray,
    config: Optional[SolverConfig] = None,
    x0: Optional[np.ndarray] = None,
    nullspace: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """Right-preconditioned restarted GMRES with modified Gram-Schmidt and Givens rotations."""
    config = config or SolverConfig(method="gmres")
    prec, rhs, x = _prepare(a, preconditioner, b, x0)
    project = _Projector(nullspace)
    rhs = project(rhs)
    x = project(x)
    report = SolveReport(method="gmres")
    start = time.perf_counter()

    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0:
        report.status = SolveStatus.CONVERGED
        report.residual_history = [0.0]
        return np.zeros(a.nrows), report

    n = a.nrows
    restart = min(config.restart, n)
    r = rhs - a @ x
    history = [float(np.linalg.norm(r)) / b_norm]
    status = SolveStatus.CONVERGED if history[0] <= config.rtol else SolveStatus.MAX_ITERATIONS
    total = 0
    while status == SolveStatus.MAX_ITERATIONS and total < config.max_iterations:
        beta = float(np.linalg.norm(r))
        basis = np.zeros((n, restart + 1))
        hessenberg = np.zeros((restart + 1, restart))
        cosines = np.zeros(restart)
        sines = np.zeros(restart)
        g = np.zeros(restart + 1)
        g[0] = beta
        basis[:, 0] = r / beta
        used = 0
        breakdown = False
        for j in range(restart):
            w = a @ project(prec.apply(basis[:, j]))
            for i in range(j + 1):
                hessenberg[i, j] = float(basis[:, i] @ w)
                w -= hessenberg[i, j] * basis[:, i]
            hessenberg[j + 1, j] = float(np.linalg.norm(w))
            for i in range(j):
                upper = cosines[i] * hessenberg[i, j] + sines[i] * hessenberg[i + 1, j]
                hessenberg[i + 1, j] = -sines[i] * hessenberg[i, j] + cosines[i] * hessenberg[i + 1, j]
                hessenberg[i, j] = upper
            denominator = float(np.hypot(hessenberg[j, j], hessenberg[j + 1, j]))
            if denominator == 0.0:
                breakdown = True
                break
            next_norm = hessenberg[j + 1, j]
            cosines[j] = hessenberg[j, j] / denominator
            sines[j] = next_norm / denominator
            hessenberg[j, j] = denominator
            hessenberg[j + 1, j] = 0.0
            g[j + 1] = -sines[j] * g[j]
            g[j] = cosines[j] * g[j]
            used = j + 1
            total += 1
            history.append(abs(float(g[j + 1])) / b_norm)
            logger.debug(f"gmres iteration {total}: relres {history[-1]:.3e}")
            if history[-1] <= config.rtol or total >= config.max_iterations:
                break
            if next_norm <= np.finfo(float).eps * beta:
                breakdown = True
                break
            basis[:, j + 1] = w / next_norm
        if used:
            y = sla.solve_triangular(hessenberg[:used, :used], g[:used])
            x = project(x + prec.apply(basis[:, :used] @ y))
        r = rhs - a @ x
        true_residual = float(np.linalg.norm(r)) / b_norm
        if true_residual <= config.rtol:
            status = SolveStatus.CONVERGED
        elif breakdown:
            status = SolveStatus.BREAKDOWN
            logger.warning(f"gmres broke down at iteration {total}, relres {true_residual:.3e}")

    report.iterations = total
    report.residual_history = history
    report.status = status
    report.solve_seconds = time.perf_counter() - start
    logger.info(f"gmres {status.value} in {total} iterations, relres {history[-1]:.3e}")
    return x, report


class KrylovSolverFactory:
    """Registry of Krylov solvers by method name"""

    _solver_registry: Dict[str, KrylovSolver] = {
        "cg": pcg,
        "gmres": gmres,
    }

    @classmethod
    def create(cls, method: str) -> KrylovSolver:
        solver = cls._solver_registry.get(method)
        if solver is None:
            logger.error(f"Unsupported Krylov method: {method}")
            expected = sorted(cls._solver_registry)
            raise ConfigError("solver.method", f"unsupported method '{method}', expected one of {expected}")
        return solver

    @classmethod
    def solve(
        cls,
        a: SparseOperator,
        preconditioner: Optional[Preconditioner],
        b: np.ndarray,
        config: SolverConfig,
        x0: Optional[np.ndarray] = None,
        nullspace: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, SolveReport]:
        return cls.create(config.method)(a, preconditioner, b, config, x0, nullspace)

    @classmethod
    def register_solver(cls, name: str, solver: KrylovSolver) -> None:
        logger.debug(f"Registering Krylov method: {name}")
        cls._solver_registry[name] = solver


def write_residual_history(report: SolveReport, path: Union[str, Path]) -> None:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "relres"])
        for iteration, value in enumerate(report.residual_history):
            writer.writerow([iteration, f"{value:.16e}"])
