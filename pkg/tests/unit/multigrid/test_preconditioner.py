import numpy as np
import pytest

from darcymg.core import BoundaryCondition, GridHierarchy, PressureSystem, assemble, gen_log_uniform, normalize
from darcymg.multigrid import PreconditionerMode, PreconditionerSettings, SelectionRule, ThreeGridPreconditioner
from darcymg.multigrid.smoother import dense_smoother_inverse
from darcymg.solvers import SolverConfig, SpectrumMode, estimate_condition, pcg


@pytest.fixture
def grid_16() -> GridHierarchy:
    return GridHierarchy([16, 16], [16.0, 16.0], [2, 2], 2)


@pytest.fixture
def system_16(grid_16: GridHierarchy) -> PressureSystem:
    field = gen_log_uniform(grid_16, seed=11, contrast_exponent=5.0)
    boundary = BoundaryCondition(dirichlet={"ymin": 1.0, "ymax": 0.0})
    return assemble(normalize(field, grid_16), grid_16, boundary)


def _settings(
    l_c: int = 3, l_cc: int = 3, mode: PreconditionerMode = PreconditionerMode.INEXACT
) -> PreconditionerSettings:
    return PreconditionerSettings(
        coarse_rule=SelectionRule.fixed(l_c), coarse_coarse_rule=SelectionRule.fixed(l_cc), mode=mode
    )


def _two_grid(m: np.ndarray, a: np.ndarray, coarse: np.ndarray) -> np.ndarray:
    """Dense `2M - MAM + (I - MA) coarse (I - AM)` of a smoothing-correction-smoothing cycle."""
    identity = np.eye(a.shape[0])
    return 2.0 * m - m @ a @ m + (identity - m @ a) @ coarse @ (identity - a @ m)


@pytest.mark.parametrize("mode", list(PreconditionerMode))
def test_full_spaces_converge_in_one_iteration(
    mode: PreconditionerMode, dirichlet_system: PressureSystem, small_grid: GridHierarchy
) -> None:
    settings = PreconditionerSettings(
        coarse_rule=SelectionRule.full(), coarse_coarse_rule=SelectionRule.full(), mode=mode
    )
    preconditioner = ThreeGridPreconditioner.build(dirichlet_system, small_grid, settings)

    f = dirichlet_system.rhs
    np.testing.assert_allclose(
        preconditioner.apply(f), np.linalg.solve(dirichlet_system.matrix.to_dense(), f), rtol=1e-8
    )
    _, report = pcg(dirichlet_system.matrix, preconditioner, f, SolverConfig(rtol=1e-8))
    assert report.converged
    assert report.iterations == 1


def test_zero_input(dirichlet_system: PressureSystem, small_grid: GridHierarchy) -> None:
    preconditioner = ThreeGridPreconditioner.build(dirichlet_system, small_grid, _settings())
    np.testing.assert_array_equal(preconditioner.apply(np.zeros(small_grid.num_cells)), 0.0)
    np.testing.assert_array_equal(preconditioner.apply_Bc_inv(np.zeros(preconditioner.space_c.dimension)), 0.0)


def test_exact_coarse_coarse_space_gives_exact_coarse_solve(
    dirichlet_system: PressureSystem, small_grid: GridHierarchy
) -> None:
    settings = PreconditionerSettings(coarse_rule=SelectionRule.fixed(3), coarse_coarse_rule=SelectionRule.full())
    preconditioner = ThreeGridPreconditioner.build(dirichlet_system, small_grid, settings)
    a_c = preconditioner.space_c.operator.to_dense()
    r_c = np.random.default_rng(0).standard_normal(a_c.shape[0])
    np.testing.assert_allclose(preconditioner.apply_Bc_inv(r_c), np.linalg.solve(a_c, r_c), rtol=1e-8)


def test_coarse_cycle_matches_explicit_formula(system_16: PressureSystem, grid_16: GridHierarchy) -> None:
    preconditioner = ThreeGridPreconditioner.build(system_16, grid_16, _settings())
    a_c = preconditioner.space_c.operator.to_dense()
    r_cc = preconditioner.space_cc.restriction.to_dense()
    m_c = dense_smoother_inverse(preconditioner.coarse_smoother)
    expected = _two_grid(m_c, a_c, r_cc.T @ np.linalg.solve(r_cc @ a_c @ r_cc.T, r_cc))

    r = np.random.default_rng(5).standard_normal(a_c.shape[0])

    actual = preconditioner.apply_Bc_inv(r)
    np.testing.assert_allclose(actual, expected @ r, rtol=1e-9, atol=1e-10 * np.abs(expected @ r).max())


def test_three_grid_matches_explicit_formula(system_16: PressureSystem, grid_16: GridHierarchy) -> None:
    preconditioner = ThreeGridPreconditioner.build(system_16, grid_16, _settings())
    a = system_16.matrix.to_dense()
    r_c = preconditioner.space_c.restriction.to_dense()
    m = dense_smoother_inverse(preconditioner.smoother)
    bc_inverse = np.column_stack([preconditioner.apply_Bc_inv(e) for e in np.eye(r_c.shape[0])])
    expected = _two_grid(m, a, r_c.T @ bc_inverse @ r_c)

    f = np.random.default_rng(6).standard_normal(grid_16.num_cells)

    actual = preconditioner.apply(f)
    np.testing.assert_allclose(actual, expected @ f, rtol=1e-9, atol=1e-10 * np.abs(expected @ f).max())


def test_preconditioner_is_symmetric(system_16: PressureSystem, grid_16: GridHierarchy) -> None:
    dense = ThreeGridPreconditioner.build(system_16, grid_16, _settings()).dense_matrix()
    np.testing.assert_allclose(dense, dense.T, atol=1e-9 * np.abs(dense).max())


def test_exact_two_grid_lambda_max_is_one(system_16: PressureSystem, grid_16: GridHierarchy) -> None:
    preconditioner = ThreeGridPreconditioner.build(system_16, grid_16, _settings(mode=PreconditionerMode.EXACT))
    estimate = estimate_condition(system_16.matrix, preconditioner, SpectrumMode.DENSE)
    assert estimate.lambda_max == pytest.approx(1.0, abs=1e-8)
    assert estimate.lambda_min > 0.0


def test_pcg_converges_with_inexact_cycle(system_16: PressureSystem, grid_16: GridHierarchy) -> None:
    preconditioner = ThreeGridPreconditioner.build(system_16, grid_16, _settings(l_c=4, l_cc=6))
    rhs = np.random.default_rng(2).standard_normal(grid_16.num_cells)
    x, report = pcg(system_16.matrix, preconditioner, rhs, SolverConfig(rtol=1e-8))
    assert report.converged
    assert report.iterations < 60
    assert np.linalg.norm(system_16.matrix @ x - rhs) <= 1e-7 * np.linalg.norm(rhs)
    assert preconditioner.setup_seconds > 0.0


def test_singular_system_converges(no_flow_system: PressureSystem, small_grid: GridHierarchy) -> None:
    preconditioner = ThreeGridPreconditioner.build(no_flow_system, small_grid, _settings())
    config = SolverConfig(rtol=1e-8)
    x, report = pcg(
        no_flow_system.matrix, preconditioner, no_flow_system.rhs, config, nullspace=no_flow_system.nullspace
    )
    assert report.converged
    assert abs(x.sum()) < 1e-8 * np.abs(x).max()
    residual = no_flow_system.matrix @ x - no_flow_system.rhs
    assert np.linalg.norm(residual) <= 1e-7 * np.linalg.norm(no_flow_system.rhs)


def test_dimensions(system_16: PressureSystem, grid_16: GridHierarchy) -> None:
    preconditioner = ThreeGridPreconditioner.build(system_16, grid_16, _settings(l_c=2, l_cc=5))
    assert preconditioner.size == 256
    assert preconditioner.space_c.dimension == 16 * 2
    assert preconditioner.space_cc.dimension == 4 * 5
    assert preconditioner.smoother.num_blocks == 16
    assert preconditioner.coarse_smoother.num_blocks == 4
