from .field import (
    FractureSlab,
    NormalizedField,
    PermeabilityField,
    RawLayout,
    face_transmissibility,
    gen_fractured,
    gen_log_uniform,
    gen_periodic_cell,
    gen_spe10_like,
    load_raw,
    normalize,
    random_fracture_slabs,
    save_raw,
)
from .grid import AXIS_NAMES, BlockLevel, BlockMap, FaceSet, GridHierarchy, build_hierarchy
from .tpfa import (
    BoundaryCondition,
    PressureSystem,
    VelocityField,
    WellTerms,
    assemble,
    check_conservation,
    default_sources,
    recover_velocity,
)

__all__ = [
    "FractureSlab",
    "NormalizedField",
    "PermeabilityField",
    "RawLayout",
    "face_transmissibility",
    "gen_fractured",
    "gen_log_uniform",
    "gen_periodic_cell",
    "gen_spe10_like",
    "load_raw",
    "normalize",
    "random_fracture_slabs",
    "save_raw",
    "AXIS_NAMES",
    "BlockLevel",
    "BlockMap",
    "FaceSet",
    "GridHierarchy",
    "build_hierarchy",
    "BoundaryCondition",
    "PressureSystem",
    "VelocityField",
    "WellTerms",
    "assemble",
    "check_conservation",
    "default_sources",
    "recover_velocity",
]
