import numpy as np
import pytest

from darcymg.core import GridHierarchy, PressureSystem
from darcymg.core.linalg import SparseOperator
from darcymg.errors import ConfigError, SmootherContractError
from darcymg.multigrid import (
    BlockJacobiSmoother,
    InequalityCheck,
    PreconditionerSettings,
    SelectionRule,
    symmetrized_smoother,
    verify_theory,
    xz_max_min,
)


def test_full_space_conditions_are_one(dirichlet_system: PressureSystem, small_grid: GridHierarchy) -> None:
    settings = PreconditionerSettings(coarse_rule=SelectionRule.full(), coarse_coarse_rule=SelectionRule.full())

    report = verify_theory(dirichlet_system, small_grid, settings)

    assert report.two_grid.condition == pytest.approx(1.0, abs=1e-8)
    assert report.three_grid.condition == pytest.approx(1.0, abs=1e-8)
    assert report.coarse_two_grid.condition == pytest.approx(1.0, abs=1e-8)
    assert report.all_hold
    assert all(check.holds for check in report.checks)


def test_bounds_hold_on_high_contrast_instance(dirichlet_system: PressureSystem, small_grid: GridHierarchy) -> None:
    settings = PreconditionerSettings(coarse_rule=SelectionRule.fixed(3), coarse_coarse_rule=SelectionRule.fixed(4))

    report = verify_theory(dirichlet_system, small_grid, settings)

    assert report.all_hold
    assert report.c_star >= 1.0 - 1e-10
    assert report.c_lambda > 0.0
    assert report.two_grid.lambda_max == pytest.approx(1.0, abs=1e-8)
    assert report.two_grid.condition <= max(8.0 * report.c_star / report.c_lambda, 1.0)
    assert 1.0 / report.two_grid.lambda_min == pytest.approx(report.xz_value, rel=1e-6)
    names = {check.name for check in report.checks}
    assert {"xz_identity", "three_grid_lambda_max_bound", "three_grid_lambda_min_bound"} <= names


def test_singular_system_is_rejected(no_flow_system: PressureSystem, small_grid: GridHierarchy) -> None:
    with pytest.raises(ConfigError):
        verify_theory(no_flow_system, small_grid)


def test_inequality_check_tolerance() -> None:
    assert InequalityCheck(name="equal", lhs=1.0, rhs=1.0).holds
    assert InequalityCheck(name="roundoff", lhs=1.0 + 1e-12, rhs=1.0).holds
    check = InequalityCheck(name="violated", lhs=2.0, rhs=1.0)
    assert not check.holds
    assert check.slack == pytest.approx(-1.0)


def test_symmetrized_smoother_of_exact_block_is_operator() -> None:
    a = np.array([[2.0, -1.0], [-1.0, 2.0]])
    smoother = BlockJacobiSmoother(SparseOperator.from_dense(a, symmetric=True), [np.arange(2)])
    np.testing.assert_allclose(symmetrized_smoother(smoother), a, atol=1e-12)


def test_symmetrized_smoother_rejects_divergent_smoother() -> None:
    operator = SparseOperator.from_dense(0.4 * np.eye(4) + 0.6 * np.ones((4, 4)), symmetric=True)
    smoother = BlockJacobiSmoother(operator, [np.array([i]) for i in range(4)])
    with pytest.raises(SmootherContractError):
        symmetrized_smoother(smoother)


def test_xz_value_of_constant_coarse_space() -> None:
    # M~ = 2I against A = I: everything outside the coarse span costs 2
    restriction = np.array([[1.0, 1.0, 1.0]]) / np.sqrt(3.0)
    assert xz_max_min(2.0 * np.eye(3), np.eye(3), restriction) == pytest.approx(2.0)
    assert xz_max_min(2.0 * np.eye(3), np.eye(3), np.eye(3)) == 1.0
