from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Dict, Sequence, Union

import numpy as np

from darcymg.core.grid import GridHierarchy
from darcymg.errors import DimensionMismatchError

from .impes import StepRecord

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "step",
    "time_days",
    "injected_ft3",
    "produced_water_ft3",
    "produced_oil_ft3",
    "iterations",
    "water_balance_error",
)


def write_vtk(path: Union[str, Path], grid: GridHierarchy, cell_data: Dict[str, np.ndarray], title: str = "") -> Path:
    """Legacy ASCII VTK structured-points file with one scalar array per entry of `cell_data`."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    points = [c + 1 for c in grid.cells] + [1] * (3 - grid.dim)
    spacing = list(grid.h) + [1.0] * (3 - grid.dim)
    with open(file_path, "w", encoding="utf-8") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{title or 'darcymg snapshot'}\n")
        f.write("ASCII\n")
        f.write("DATASET STRUCTURED_POINTS\n")
        f.write(f"DIMENSIONS {' '.join(str(p) for p in points)}\n")
        f.write("ORIGIN 0 0 0\n")
        f.write(f"SPACING {' '.join(repr(float(s)) for s in spacing)}\n")
        f.write(f"CELL_DATA {grid.num_cells}\n")
        for name, values in cell_data.items():
            data = np.asarray(values, dtype=np.float64)
            if data.shape != (grid.num_cells,):
                raise DimensionMismatchError(f"cell data '{name}'", grid.num_cells, int(data.size))
            f.write(f"SCALARS {name} double 1\n")
            f.write("LOOKUP_TABLE default\n")
            f.write("\n".join(f"{v:.10e}" for v in data))
            f.write("\n")
    logger.info(f"Wrote snapshot {file_path}")
    return file_path


def write_snapshot(
    directory: Union[str, Path], step: int, grid: GridHierarchy, pressure: np.ndarray, saturation: np.ndarray
) -> Path:
    path = Path(directory) / f"snapshot_{step:05d}.vtk"
    return write_vtk(path, grid, {"pressure_psi": pressure, "water_saturation": saturation}, f"step {step}")


def write_summary(path: Union[str, Path], records: Sequence[StepRecord]) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for record in records:
            writer.writerow(record.model_dump())
    logger.info(f"Wrote {len(records)} summary rows to {file_path}")
    return file_path
