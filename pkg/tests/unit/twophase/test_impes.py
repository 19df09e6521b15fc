import numpy as np
import pytest

from darcymg.core import GridHierarchy, PermeabilityField, VelocityField, assemble, check_conservation, normalize
from darcymg.errors import FieldError
from darcymg.multigrid import PreconditionerSettings, SelectionRule
from darcymg.solvers import SolverConfig, SolveReport
from darcymg.twophase.units import DARCY_FIELD_FT3
from darcymg.twophase import (
    FluidModel,
    ImpesSimulator,
    PressureStep,
    SaturationState,
    TwoPhaseSettings,
    WellSet,
    pressure_step,
    run_simulation,
    transport_substeps,
)

PRECONDITIONER = PreconditionerSettings(coarse_rule=SelectionRule.fixed(2), coarse_coarse_rule=SelectionRule.fixed(3))


def _frozen_step(grid: GridHierarchy, flux: np.ndarray) -> PressureStep:
    field = PermeabilityField.uniform(grid)
    system = assemble(normalize(field, grid), grid)
    velocity = VelocityField(system.faces, np.asarray(flux, dtype=np.float64), grid.h)
    return PressureStep(np.zeros(grid.num_cells), velocity, SolveReport(method="cg"), system, np.zeros(grid.num_cells))


@pytest.fixture
def pair() -> GridHierarchy:
    return GridHierarchy([2, 1], [2.0, 1.0], [1, 1], 1)


def test_zero_velocity_leaves_saturation_unchanged(reservoir: GridHierarchy) -> None:
    step = _frozen_step(reservoir, np.zeros(len(reservoir.internal_faces())))
    state = SaturationState(np.linspace(0.2, 0.8, reservoir.num_cells), np.full(reservoir.num_cells, 0.2))

    result = transport_substeps(state, step, reservoir, FluidModel(), WellSet(), TwoPhaseSettings(substeps=10))

    np.testing.assert_array_equal(result.state.saturation, state.saturation)
    assert result.substeps == 10
    assert result.max_saturation_change == 0.0


def test_upstream_cell_supplies_water(pair: GridHierarchy) -> None:
    state = SaturationState(np.array([0.8, 0.2]), np.ones(2))
    settings = TwoPhaseSettings(substeps=1, ds_max=0.001)

    forward = transport_substeps(state, _frozen_step(pair, [1.0]), pair, FluidModel(), WellSet(), settings)
    backward = transport_substeps(state, _frozen_step(pair, [-1.0]), pair, FluidModel(), WellSet(), settings)

    # fw = 1 upstream when flowing from cell 0, fw = 0 upstream when flowing from cell 1
    np.testing.assert_allclose(forward.state.saturation, [0.799, 0.201], rtol=1e-12)
    np.testing.assert_array_equal(backward.state.saturation, state.saturation)
    assert forward.elapsed == pytest.approx(0.001)


def test_transport_stops_at_end_time(pair: GridHierarchy) -> None:
    state = SaturationState(np.array([0.8, 0.2]), np.ones(2))
    settings = TwoPhaseSettings(substeps=50, ds_max=0.01, end_time_days=0.025, dt_max_days=1.0)

    result = transport_substeps(state, _frozen_step(pair, [1.0]), pair, FluidModel(), WellSet(), settings)

    assert result.state.time == pytest.approx(0.025)
    assert result.substeps == 3


def test_pressure_and_transport_step(reservoir: GridHierarchy, reservoir_field: PermeabilityField) -> None:
    settings = TwoPhaseSettings(substeps=20, ds_max=0.001)
    fluid = settings.fluid
    wells = settings.well_set(reservoir)
    state = SaturationState.initial(reservoir_field, settings.initial_saturation)

    step, preconditioner = pressure_step(
        state, reservoir, reservoir_field, fluid, wells, settings, SolverConfig(rtol=1e-10), PRECONDITIONER
    )
    result = transport_substeps(state, step, reservoir, fluid, wells, settings)

    assert step.report.converged
    assert preconditioner.size == reservoir.num_cells
    assert step.pressure[wells.injector_cells[0]] > settings.bottom_hole_pressure_psi
    assert result.max_saturation_change <= settings.ds_max * (1.0 + 1e-12)
    assert result.water_balance_error < 1e-10
    assert result.injected_water > 0.0
    assert result.state.saturation[wells.injector_cells[0]] > settings.initial_saturation
    fluid.check_bounds(result.state.saturation)


def test_tiny_simulation(reservoir: GridHierarchy, reservoir_field: PermeabilityField) -> None:
    settings = TwoPhaseSettings(substeps=5, max_outer_steps=3, preconditioner_refresh=2, snapshot_times=[0.0])
    snapshots = []

    result = run_simulation(
        reservoir,
        reservoir_field,
        settings,
        SolverConfig(rtol=1e-8),
        PRECONDITIONER,
        on_snapshot=lambda step, state, pressure: snapshots.append(step),
    )

    assert [record.step for record in result.records] == [0, 1, 2]
    assert result.records[0].iterations > 0
    assert all(record.water_balance_error < 1e-10 for record in result.records)
    assert result.total_iterations == sum(report.iterations for report in result.reports)
    assert snapshots == [0]
    assert result.state.time > 0.0
    times = [record.time_days for record in result.records]
    assert times == sorted(times)


def test_simulator_rejects_mismatched_field(reservoir: GridHierarchy) -> None:
    field = PermeabilityField.isotropic(np.ones(10), 2)
    with pytest.raises(FieldError):
        ImpesSimulator(reservoir, field)


def test_custom_layout_validates_cells(reservoir: GridHierarchy) -> None:
    settings = TwoPhaseSettings(well_layout="custom", injector_cells=[0], producer_cells=[0])
    with pytest.raises(FieldError):
        settings.well_set(reservoir)


def test_uniform_mobility_reproduces_single_phase_pressure(
    reservoir: GridHierarchy, reservoir_field: PermeabilityField
) -> None:
    settings = TwoPhaseSettings()
    fluid = settings.fluid
    wells = settings.well_set(reservoir)
    state = SaturationState(np.full(reservoir.num_cells, 0.5), reservoir_field.porosity.copy())

    step, _ = pressure_step(
        state, reservoir, reservoir_field, fluid, wells, settings, SolverConfig(rtol=1e-12), PRECONDITIONER
    )

    mobility = float(fluid.total_mobility(np.array([0.5]))[0])
    scaled = PermeabilityField(mobility * reservoir_field.permeability, reservoir_field.porosity)
    terms = wells.terms(reservoir, reservoir_field, fluid, state.saturation)
    single_phase = assemble(normalize(scaled, reservoir), reservoir, wells=terms, coefficient=DARCY_FIELD_FT3)
    expected = np.linalg.solve(single_phase.matrix.to_dense(), single_phase.rhs)

    np.testing.assert_allclose(step.pressure, expected, rtol=1e-7)


def test_well_coupled_operator_is_spd_and_conservative(
    reservoir: GridHierarchy, reservoir_field: PermeabilityField
) -> None:
    settings = TwoPhaseSettings(producer_mobility="mobility_weighted")
    wells = settings.well_set(reservoir)
    state = SaturationState.initial(reservoir_field, settings.initial_saturation)

    step, _ = pressure_step(
        state, reservoir, reservoir_field, settings.fluid, wells, settings, SolverConfig(rtol=1e-12), PRECONDITIONER
    )

    a = step.system.matrix.to_dense()
    np.testing.assert_array_equal(a, a.T)
    assert np.linalg.eigvalsh(a).min() > 0.0
    assert step.system.nullspace is None

    sources = step.system.cell_sources(step.pressure)
    assert check_conservation(step.velocity, sources, reservoir) <= 1e-9 * np.abs(sources).max()
    # incompressible: what the producers take equals what the injector puts in
    produced = wells.producer_rates(step.producer_coefficient, step.pressure).sum()
    injected = wells.injection_density(reservoir).sum()
    assert -produced == pytest.approx(injected, rel=1e-9)


def test_five_spot_front_decreases_away_from_injector() -> None:
    grid = GridHierarchy([9, 9], [180.0, 180.0], [1, 1], 3)
    field = PermeabilityField.isotropic(np.full(grid.num_cells, 100.0), 2, porosity=0.2)
    settings = TwoPhaseSettings(injection_rate_bbl_day=50.0, ds_max=0.05, substeps=20, max_outer_steps=5)

    result = run_simulation(grid, field, settings, SolverConfig(rtol=1e-10), PRECONDITIONER)

    saturation = result.state.saturation
    diagonal = np.array([saturation[grid.cell_index(k, k)] for k in range(4, -1, -1)])
    axis = np.array([saturation[grid.cell_index(4, j)] for j in range(4, -1, -1)])
    for ray in (diagonal, axis):
        assert np.all(np.diff(ray) <= 1e-9)
    assert diagonal[0] > settings.initial_saturation
    assert diagonal[-1] == pytest.approx(settings.initial_saturation, abs=1e-9)
