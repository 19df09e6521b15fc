from __future__ import annotations

import logging
from typing import List

import numpy as np
import scipy.linalg as sla
from pydantic import BaseModel, Field

from darcymg.core.grid import GridHierarchy
from darcymg.core.tpfa import PressureSystem
from darcymg.errors import ConfigError, SmootherContractError
from darcymg.solvers.base import SpectrumEstimate
from darcymg.solvers.spectrum import DENSE_SPECTRUM_LIMIT, dense_preconditioned_spectrum

from .preconditioner import PreconditionerMode, PreconditionerSettings, ThreeGridPreconditioner
from .smoother import BlockJacobiSmoother, dense_smoother_inverse

logger = logging.getLogger(__name__)

SPLITTING_CONSTANT = 8.0
CHECK_RTOL = 1e-8
XZ_RTOL = 1e-6


class InequalityCheck(BaseModel):
    """`lhs <= rhs` with `slack = rhs - lhs`; `asserted` checks count towards `TheoryReport.all_hold`."""

    name: str
    lhs: float
    rhs: float
    asserted: bool = True

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        scale = max(abs(self.lhs), abs(self.rhs), 1.0) if np.isfinite(self.rhs) else 1.0
        return self.slack >= -CHECK_RTOL * scale


class TheoryReport(BaseModel):
    c_star: float
    c_lambda: float
    c_c_lambda: float
    lambda_max_coarse_smoother: float
    two_grid: SpectrumEstimate
    three_grid: SpectrumEstimate
    coarse_two_grid: SpectrumEstimate
    xz_value: float
    checks: List[InequalityCheck] = Field(default_factory=list)

    @property
    def all_hold(self) -> bool:
        return all(check.holds for check in self.checks if check.asserted)


def symmetrized_smoother(smoother: BlockJacobiSmoother) -> np.ndarray:
    """`M~ = M^T (M + M^T - A)^{-1} M`; raises when `M + M^T - A` is not positive definite."""
    m = np.linalg.inv(dense_smoother_inverse(smoother))
    a = smoother.operator.to_dense()
    contract = m + m.T - a
    lambda_min = float(np.linalg.eigvalsh(0.5 * (contract + contract.T))[0])
    if lambda_min <= 0.0:
        raise SmootherContractError(lambda_min, smoother.level)
    tilde = m.T @ np.linalg.solve(contract, m)
    return 0.5 * (tilde + tilde.T)


def xz_max_min(m_tilde: np.ndarray, a: np.ndarray, restriction: np.ndarray) -> float:
    """Brute-force `max_v min_vc |v - R^T vc|^2_M~ / |v|^2_A`.

    The inner minimum is the M~-orthogonal projection error, so the value is the largest generalized
    eigenvalue of the projected-out part of `M~` against `A`. Since `M~ >= A` the value is at least 1;
    a full coarse space leaves nothing to project out and the two-grid cycle is exact, so 1 is returned.
    """
    if restriction.shape[0] >= restriction.shape[1]:
        return 1.0
    mr = m_tilde @ restriction.T
    coarse = restriction @ mr
    k = m_tilde - mr @ np.linalg.solve(coarse, mr.T)
    return float(sla.eigh(0.5 * (k + k.T), a, eigvals_only=True)[-1])


def _spectrum(values: np.ndarray) -> SpectrumEstimate:
    return SpectrumEstimate(lambda_min=float(values[0]), lambda_max=float(values[-1]))


def verify_theory(
    system: PressureSystem, grid: GridHierarchy, settings: PreconditionerSettings | None = None
) -> TheoryReport:
    """Dense evaluation of every constant of the two-grid and three-grid condition number estimates."""
    if system.is_singular:
        raise ConfigError("problem.boundary", "theory verification needs a non-singular system")
    if system.num_cells > DENSE_SPECTRUM_LIMIT:
        raise ConfigError("grid.cells", f"theory verification is limited to {DENSE_SPECTRUM_LIMIT} cells")
    settings = settings or PreconditionerSettings()
    inexact_settings = settings.model_copy(update={"mode": PreconditionerMode.INEXACT})
    inexact = ThreeGridPreconditioner.build(system, grid, inexact_settings)
    exact = ThreeGridPreconditioner(
        system, inexact.space_c, inexact.space_cc, inexact.smoother, inexact.coarse_smoother, PreconditionerMode.EXACT
    )
    a = system.matrix.to_dense()
    a_c = inexact.space_c.operator.to_dense()
    r_c = inexact.space_c.restriction.to_dense()

    m_tilde = symmetrized_smoother(inexact.smoother)
    m_tilde_c = symmetrized_smoother(inexact.coarse_smoother)
    c_star = float(sla.eigh(m_tilde, a, eigvals_only=True)[-1])
    lambda_max_mc = float(np.linalg.eigvalsh(m_tilde_c)[-1])
    c_lambda = inexact.space_c.eigenvalue_cut
    c_c_lambda = inexact.space_cc.eigenvalue_cut

    two_grid = _spectrum(dense_preconditioned_spectrum(a, exact.dense_matrix()))
    three_grid = _spectrum(dense_preconditioned_spectrum(a, inexact.dense_matrix()))
    bc_inverse = np.column_stack([inexact.apply_Bc_inv(column) for column in np.eye(a_c.shape[0])])
    coarse_two_grid = _spectrum(dense_preconditioned_spectrum(a_c, bc_inverse))
    xz_value = xz_max_min(m_tilde, a, r_c)

    tg_bound = max(SPLITTING_CONSTANT * c_star / c_lambda, 1.0)
    itg_bound = max(SPLITTING_CONSTANT * c_star * lambda_max_mc / (c_lambda * c_c_lambda), 1.0)
    checks = [
        InequalityCheck(name="two_grid_lambda_max_is_one", lhs=abs(two_grid.lambda_max - 1.0), rhs=CHECK_RTOL),
        InequalityCheck(
            name="xz_identity", lhs=abs(1.0 / two_grid.lambda_min - xz_value), rhs=XZ_RTOL * abs(xz_value)
        ),
        InequalityCheck(name="two_grid_condition_bound", lhs=two_grid.condition, rhs=tg_bound),
        InequalityCheck(
            name="three_grid_lambda_max_bound",
            lhs=three_grid.lambda_max,
            rhs=two_grid.lambda_max * max(coarse_two_grid.lambda_max, 1.0),
        ),
        InequalityCheck(
            name="three_grid_lambda_min_bound",
            lhs=two_grid.lambda_min * min(coarse_two_grid.lambda_min, 1.0),
            rhs=three_grid.lambda_min,
        ),
        InequalityCheck(name="three_grid_condition_bound", lhs=three_grid.condition, rhs=itg_bound, asserted=False),
    ]
    for check in checks:
        level = logging.INFO if check.holds else logging.WARNING
        logger.log(level, f"{check.name}: {check.lhs:.6e} <= {check.rhs:.6e} (slack {check.slack:.3e})")
    return TheoryReport(
        c_star=c_star,
        c_lambda=c_lambda,
        c_c_lambda=c_c_lambda,
        lambda_max_coarse_smoother=lambda_max_mc,
        two_grid=two_grid,
        three_grid=three_grid,
        coarse_two_grid=coarse_two_grid,
        xz_value=xz_value,
        checks=checks,
    )
