from .fluid import FluidModel
from .impes import (
    ImpesSimulator,
    PressureStep,
    SaturationState,
    SimulationResult,
    StepRecord,
    TransportResult,
    TwoPhaseSettings,
    WellLayout,
    pressure_step,
    run_simulation,
    transport_substeps,
)
from .output import write_snapshot, write_summary, write_vtk
from .units import BBL_TO_FT3, DARCY_FIELD, DARCY_FIELD_FT3
from .wells import ProducerMobility, WellSet, well_index

__all__ = [
    "FluidModel",
    "ImpesSimulator",
    "PressureStep",
    "SaturationState",
    "SimulationResult",
    "StepRecord",
    "TransportResult",
    "TwoPhaseSettings",
    "WellLayout",
    "pressure_step",
    "run_simulation",
    "transport_substeps",
    "write_snapshot",
    "write_summary",
    "write_vtk",
    "BBL_TO_FT3",
    "DARCY_FIELD",
    "DARCY_FIELD_FT3",
    "ProducerMobility",
    "WellSet",
    "well_index",
]
