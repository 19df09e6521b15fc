from pathlib import Path

import numpy as np
from _pytest.fixtures import fixture

from darcymg.config import Config, ExperimentConfig, deep_merge, validate_experiment
from darcymg.core import (
    BoundaryCondition,
    GridHierarchy,
    PermeabilityField,
    PressureSystem,
    assemble,
    default_sources,
    gen_log_uniform,
    normalize,
)


@fixture
def default_config() -> Config:
    return Config()


@fixture
def small_grid() -> GridHierarchy:
    # 4x4 coarse blocks of 3x3 cells, 2x2 cc blocks
    return GridHierarchy([12, 12], [12.0, 12.0], [2, 2], 2)


@fixture
def contrast_field(small_grid: GridHierarchy) -> PermeabilityField:
    return gen_log_uniform(small_grid, seed=3, contrast_exponent=4.0)


@fixture
def dirichlet_system(small_grid: GridHierarchy, contrast_field: PermeabilityField) -> PressureSystem:
    boundary = BoundaryCondition(dirichlet={"xmin": 1.0, "xmax": 0.0})
    return assemble(normalize(contrast_field, small_grid), small_grid, boundary, sources=default_sources(small_grid))


@fixture
def no_flow_system(small_grid: GridHierarchy, contrast_field: PermeabilityField) -> PressureSystem:
    return assemble(normalize(contrast_field, small_grid), small_grid, sources=default_sources(small_grid))


@fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@fixture
def tiny_experiment(tmp_path: Path) -> ExperimentConfig:
    """8x8 high-contrast Dirichlet problem writing into a temporary directory."""
    values = {
        "name": "tiny",
        "problem": {"boundary": {"dirichlet": {"xmin": 1.0, "xmax": 0.0}}},
        "grid": {"cells": [8, 8], "cc_blocks": [2, 2], "subdivision": 2},
        "field": {"generator": "log_uniform", "contrast_exponent": 3},
        "coarse": {"l_c": 2, "l_cc": 3},
        "solver": {"rtol": 1.0e-8},
        "output": {"directory": str(tmp_path / "results")},
    }
    return validate_experiment(deep_merge(Config().as_dict(), values))
