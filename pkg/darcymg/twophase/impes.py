from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from darcymg.core.field import PermeabilityField, normalize
from darcymg.core.grid import GridHierarchy
from darcymg.core.tpfa import PressureSystem, VelocityField, assemble, recover_velocity
from darcymg.errors import ConvergenceError, FieldError
from darcymg.multigrid.preconditioner import PreconditionerSettings, ThreeGridPreconditioner
from darcymg.solvers.base import SolverConfig, SolveReport
from darcymg.solvers.krylov import KrylovSolverFactory

from .fluid import FluidModel
from .units import DARCY_FIELD_FT3
from .wells import ProducerMobility, WellSet

logger = logging.getLogger(__name__)


class WellLayout(str, Enum):
    FIVE_SPOT = "five_spot"
    CUSTOM = "custom"


class TwoPhaseSettings(BaseModel):
    """Two-phase run parameters in field units (ft, day, psi, cP, md)."""

    model_config = ConfigDict(frozen=True)

    fluid: FluidModel = Field(default_factory=FluidModel)
    well_layout: WellLayout = WellLayout.FIVE_SPOT
    injector_cells: List[int] = Field(default_factory=list)
    producer_cells: List[int] = Field(default_factory=list)
    injection_rate_bbl_day: float = Field(default=5000.0, ge=0.0)
    bottom_hole_pressure_psi: float = 4000.0
    wellbore_radius_ft: float = Field(default=1.0, gt=0.0)
    producer_mobility: ProducerMobility = ProducerMobility.AS_WRITTEN
    initial_saturation: float = 0.2
    end_time_days: float = Field(default=100.0, gt=0.0)
    max_outer_steps: Optional[int] = Field(default=None, ge=1)
    ds_max: float = Field(default=0.001, gt=0.0)
    substeps: int = Field(default=50, ge=1)
    cfl: float = Field(default=1.0, gt=0.0)
    dt_max_days: Optional[float] = Field(default=None, gt=0.0)
    preconditioner_refresh: int = Field(default=1, ge=1)
    snapshot_times: List[float] = Field(default_factory=list)

    @property
    def dt_max(self) -> float:
        return self.dt_max_days if self.dt_max_days is not None else self.end_time_days / 1000.0

    def well_set(self, grid: GridHierarchy) -> WellSet:
        if self.well_layout == WellLayout.FIVE_SPOT:
            wells = WellSet.five_spot(
                grid, self.injection_rate_bbl_day, self.bottom_hole_pressure_psi, self.wellbore_radius_ft
            )
        else:
            wells = WellSet(
                injector_cells=self.injector_cells,
                injection_rate_bbl_day=self.injection_rate_bbl_day,
                producer_cells=self.producer_cells,
                bottom_hole_pressure_psi=self.bottom_hole_pressure_psi,
                wellbore_radius_ft=self.wellbore_radius_ft,
            )
        wells.validate_cells(grid)
        return wells


@dataclass
class SaturationState:
    saturation: np.ndarray
    porosity: np.ndarray
    time: float = 0.0

    @classmethod
    def initial(cls, field: PermeabilityField, saturation: float) -> SaturationState:
        return cls(np.full(field.num_cells, saturation), field.porosity.copy())

    def copy(self) -> SaturationState:
        return SaturationState(self.saturation.copy(), self.porosity.copy(), self.time)


@dataclass(frozen=True)
class PressureStep:
    pressure: np.ndarray
    velocity: VelocityField
    report: SolveReport
    system: PressureSystem
    producer_coefficient: np.ndarray


@dataclass(frozen=True)
class TransportResult:
    """Volumes are ft^3 summed over the substeps of one outer step."""

    state: SaturationState
    elapsed: float
    substeps: int
    injected_water: float
    produced_water: float
    produced_oil: float
    max_saturation_change: float
    stored_water_change: float

    @property
    def water_balance_error(self) -> float:
        net = self.injected_water - self.produced_water
        scale = max(abs(net), abs(self.stored_water_change), np.finfo(float).tiny)
        return abs(self.stored_water_change - net) / scale


def pressure_step(
    state: SaturationState,
    grid: GridHierarchy,
    field: PermeabilityField,
    fluid: FluidModel,
    wells: WellSet,
    settings: TwoPhaseSettings,
    solver: SolverConfig,
    preconditioner_settings: Optional[PreconditionerSettings] = None,
    initial_guess: Optional[np.ndarray] = None,
    preconditioner: Optional[ThreeGridPreconditioner] = None,
) -> tuple[PressureStep, ThreeGridPreconditioner]:
    """Implicit pressure solve with the mobility of the current saturation.

    A new three-grid preconditioner is built unless one is passed in; the one used is returned so the
    caller can reuse it.
    """
    mobility = fluid.total_mobility(state.saturation)
    coefficient = wells.producer_coefficient(grid, field, fluid, state.saturation, settings.producer_mobility)
    terms = wells.terms(grid, field, fluid, state.saturation, settings.producer_mobility)
    system = assemble(
        normalize(field, grid), grid, wells=terms, cell_mobility=mobility, coefficient=DARCY_FIELD_FT3
    )
    if preconditioner is None:
        preconditioner = ThreeGridPreconditioner.build(system, grid, preconditioner_settings)
    x0 = initial_guess if initial_guess is not None else np.full(grid.num_cells, wells.bottom_hole_pressure_psi)
    pressure, report = KrylovSolverFactory.solve(
        system.matrix, preconditioner, system.rhs, solver, x0, system.nullspace
    )
    report.setup_seconds = preconditioner.setup_seconds
    if not report.converged:
        raise ConvergenceError(report, f"pressure step at t = {state.time:.4f} days")
    return PressureStep(pressure, recover_velocity(system, pressure), report, system, coefficient), preconditioner


def transport_substeps(
    state: SaturationState,
    step: PressureStep,
    grid: GridHierarchy,
    fluid: FluidModel,
    wells: WellSet,
    settings: TwoPhaseSettings,
    end_time: Optional[float] = None,
) -> TransportResult:
    """Explicit upstream-weighted saturation update repeated `settings.substeps` times.

    All rates are densities (per unit cell volume and day). Each substep length is the smallest of the
    `ds_max` limit, the CFL limit, `dt_max` and the time left.
    """
    end = settings.end_time_days if end_time is None else end_time
    faces = step.velocity.faces
    flux = step.velocity.flux
    n = grid.num_cells
    phi = state.porosity
    volume = grid.cell_volume
    injection = wells.injection_density(grid)
    producer = wells.producer_rates(step.producer_coefficient, step.pressure)
    dfw_max = fluid.max_fractional_flow_derivative()

    outflow = np.maximum(-producer, 0.0)
    np.add.at(outflow, faces.lower, np.maximum(flux, 0.0))
    np.add.at(outflow, faces.upper, np.maximum(-flux, 0.0))
    max_outflow = float(np.max(outflow / phi, initial=0.0))
    cfl_limit = settings.cfl / (dfw_max * max_outflow) if max_outflow > 0.0 and dfw_max > 0.0 else np.inf

    saturation = state.saturation.copy()
    time_now = state.time
    injected = produced_w = produced_o = 0.0
    max_change = 0.0
    taken = 0
    upstream_lower = flux > 0.0
    for substep in range(settings.substeps):
        remaining = end - time_now
        if remaining <= 0.0:
            break
        fw = fluid.fractional_flow(saturation)
        water_flux = flux * np.where(upstream_lower, fw[faces.lower], fw[faces.upper])
        net_water = np.zeros(n)
        np.add.at(net_water, faces.lower, water_flux)
        np.subtract.at(net_water, faces.upper, water_flux)
        producer_water = fw * producer
        rate = (injection - net_water + producer_water) / phi

        max_rate = float(np.max(np.abs(rate), initial=0.0))
        dt = min(settings.dt_max, remaining, cfl_limit)
        if max_rate > 0.0:
            dt = min(dt, settings.ds_max / max_rate)

        change = dt * rate
        saturation += change
        time_now += dt
        taken += 1
        max_change = max(max_change, float(np.max(np.abs(change), initial=0.0)))
        fluid.check_bounds(saturation, substep)

        injected += dt * volume * float(injection.sum())
        produced_w -= dt * volume * float(producer_water.sum())
        produced_o -= dt * volume * float(((1.0 - fw) * producer).sum())

    stored = volume * float(np.sum(phi * (saturation - state.saturation)))
    logger.debug(f"Transport: {taken} substeps over {time_now - state.time:.4e} days, max |dS| {max_change:.3e}")
    return TransportResult(
        state=SaturationState(saturation, phi, time_now),
        elapsed=time_now - state.time,
        substeps=taken,
        injected_water=injected,
        produced_water=produced_w,
        produced_oil=produced_o,
        max_saturation_change=max_change,
        stored_water_change=stored,
    )


class StepRecord(BaseModel):
    step: int
    time_days: float
    injected_ft3: float
    produced_water_ft3: float
    produced_oil_ft3: float
    iterations: int
    water_balance_error: float
    max_saturation_change: float
    solve_seconds: float = 0.0


@dataclass
class SimulationResult:
    state: SaturationState
    pressure: np.ndarray
    records: List[StepRecord] = field(default_factory=list)
    reports: List[SolveReport] = field(default_factory=list)

    @property
    def total_iterations(self) -> int:
        return sum(record.iterations for record in self.records)


SnapshotCallback = Callable[[int, SaturationState, np.ndarray], None]


class ImpesSimulator:
    """Alternates implicit pressure solves and explicit saturation substeps until the end time."""

    def __init__(
        self,
        grid: GridHierarchy,
        field: PermeabilityField,
        settings: Optional[TwoPhaseSettings] = None,
        solver: Optional[SolverConfig] = None,
        preconditioner_settings: Optional[PreconditionerSettings] = None,
    ) -> None:
        if field.num_cells != grid.num_cells:
            raise FieldError(f"field has {field.num_cells} cells, grid has {grid.num_cells}")
        self._grid = grid
        self._field = field
        self._settings = settings or TwoPhaseSettings()
        self._solver = solver or SolverConfig()
        self._preconditioner_settings = preconditioner_settings or PreconditionerSettings()
        self._wells = self._settings.well_set(grid)
        self._fluid = self._settings.fluid

    @property
    def wells(self) -> WellSet:
        return self._wells

    @property
    def settings(self) -> TwoPhaseSettings:
        return self._settings

    def run(self, on_snapshot: Optional[SnapshotCallback] = None) -> SimulationResult:
        settings = self._settings
        state = SaturationState.initial(self._field, settings.initial_saturation)
        self._fluid.check_bounds(state.saturation)
        pending = sorted(settings.snapshot_times)
        pressure: Optional[np.ndarray] = None
        preconditioner: Optional[ThreeGridPreconditioner] = None
        result = SimulationResult(state=state, pressure=np.zeros(self._grid.num_cells))
        logger.info(
            f"IMPES run on {self._grid}: end {settings.end_time_days} days, "
            f"(ds_max, substeps) = ({settings.ds_max}, {settings.substeps})"
        )

        step_index = 0
        while state.time < settings.end_time_days:
            if settings.max_outer_steps is not None and step_index >= settings.max_outer_steps:
                break
            reuse = preconditioner if step_index % settings.preconditioner_refresh else None
            start = time.perf_counter()
            try:
                step, preconditioner = pressure_step(
                    state,
                    self._grid,
                    self._field,
                    self._fluid,
                    self._wells,
                    settings,
                    self._solver,
                    self._preconditioner_settings,
                    initial_guess=pressure,
                    preconditioner=reuse,
                )
            except ConvergenceError as e:
                logger.error(f"Pressure solve failed at outer step {step_index}: {e}")
                raise
            pressure = step.pressure
            transport = transport_substeps(state, step, self._grid, self._fluid, self._wells, settings)
            state = transport.state
            record = StepRecord(
                step=step_index,
                time_days=state.time,
                injected_ft3=transport.injected_water,
                produced_water_ft3=transport.produced_water,
                produced_oil_ft3=transport.produced_oil,
                iterations=step.report.iterations,
                water_balance_error=transport.water_balance_error,
                max_saturation_change=transport.max_saturation_change,
                solve_seconds=time.perf_counter() - start,
            )
            result.records.append(record)
            result.reports.append(step.report)
            logger.debug(
                f"Step {step_index}: t = {state.time:.4f} days, {record.iterations} iterations, "
                f"balance error {record.water_balance_error:.2e}"
            )
            while pending and state.time >= pending[0]:
                pending.pop(0)
                if on_snapshot is not None:
                    on_snapshot(step_index, state, pressure)
            step_index += 1

        result.state = state
        if pressure is not None:
            result.pressure = pressure
        logger.info(
            f"IMPES finished after {step_index} steps at t = {state.time:.4f} days, "
            f"{result.total_iterations} pressure iterations"
        )
        return result


def run_simulation(
    grid: GridHierarchy,
    field: PermeabilityField,
    settings: Optional[TwoPhaseSettings] = None,
    solver: Optional[SolverConfig] = None,
    preconditioner_settings: Optional[PreconditionerSettings] = None,
    on_snapshot: Optional[SnapshotCallback] = None,
) -> SimulationResult:
    return ImpesSimulator(grid, field, settings, solver, preconditioner_settings).run(on_snapshot)
