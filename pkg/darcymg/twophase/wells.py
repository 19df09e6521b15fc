from __future__ import annotations

import logging
import math
from enum import Enum
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from darcymg.core.field import PermeabilityField
from darcymg.core.grid import GridHierarchy
from darcymg.core.tpfa import WellTerms
from darcymg.errors import FieldError

from .fluid import FluidModel
from .units import BBL_TO_FT3, DARCY_FIELD_FT3

logger = logging.getLogger(__name__)


class ProducerMobility(str, Enum):
    AS_WRITTEN = "as_written"
    MOBILITY_WEIGHTED = "mobility_weighted"


def well_index(h_x: float, h_y: float, r_wb: float) -> float:
    """Peaceman-type well index of a cell with sizes `h_x`, `h_y` (1/length^2)."""
    if h_x <= 0.0 or h_y <= 0.0 or r_wb <= 0.0:
        raise FieldError(f"well index needs positive sizes and radius, got ({h_x}, {h_y}, {r_wb})")
    r1 = math.sqrt(9.0 * h_x**2 + h_y**2) / 2.0
    r2 = math.sqrt(h_x**2 + 9.0 * h_y**2) / 2.0
    if r_wb >= min(r1, r2):
        raise FieldError(f"wellbore radius {r_wb} too large for a {h_x} x {h_y} cell")
    denominator = (2.0 / math.pi) * ((h_y / h_x) * math.log(r1 / r_wb) + (h_x / h_y) * math.log(r2 / r_wb)) - 1.0
    if denominator <= 0.0:
        raise FieldError(f"wellbore radius {r_wb} too large for a {h_x} x {h_y} cell")
    return (1.0 / h_x**2 + 1.0 / h_y**2) / denominator


class WellSet(BaseModel):
    """Injector cells sharing a total rate equally and producer cells held at a bottom-hole pressure."""

    model_config = ConfigDict(frozen=True)

    injector_cells: List[int] = Field(default_factory=list)
    injection_rate_bbl_day: float = Field(default=5000.0, ge=0.0)
    producer_cells: List[int] = Field(default_factory=list)
    bottom_hole_pressure_psi: float = 4000.0
    wellbore_radius_ft: float = Field(default=1.0, gt=0.0)

    @classmethod
    def five_spot(
        cls,
        grid: GridHierarchy,
        injection_rate_bbl_day: float = 5000.0,
        bottom_hole_pressure_psi: float = 4000.0,
        wellbore_radius_ft: float = 1.0,
    ) -> WellSet:
        """Injector in the center column, producers in the four corner columns."""
        nx, ny = grid.cells[0], grid.cells[1]
        layers = range(grid.cells[2]) if grid.dim == 3 else [None]

        def column(i: int, j: int) -> List[int]:
            return [grid.cell_index(i, j) if k is None else grid.cell_index(i, j, k) for k in layers]

        producers: List[int] = []
        for i, j in ((0, 0), (nx - 1, 0), (0, ny - 1), (nx - 1, ny - 1)):
            producers.extend(column(i, j))
        return cls(
            injector_cells=column(nx // 2, ny // 2),
            injection_rate_bbl_day=injection_rate_bbl_day,
            producer_cells=producers,
            bottom_hole_pressure_psi=bottom_hole_pressure_psi,
            wellbore_radius_ft=wellbore_radius_ft,
        )

    @property
    def injection_rate_ft3_day(self) -> float:
        return self.injection_rate_bbl_day * BBL_TO_FT3

    def injection_density(self, grid: GridHierarchy) -> np.ndarray:
        """Injected volume per unit cell volume and day, split equally over the injector cells."""
        density = np.zeros(grid.num_cells)
        if self.injector_cells:
            per_cell = self.injection_rate_ft3_day / len(self.injector_cells)
            density[self.injector_cells] = per_cell / grid.cell_volume
        return density

    def producer_coefficient(
        self,
        grid: GridHierarchy,
        field: PermeabilityField,
        fluid: FluidModel,
        saturation: np.ndarray,
        mode: ProducerMobility = ProducerMobility.AS_WRITTEN,
    ) -> np.ndarray:
        """Per-cell `c WI kappa m` of `q = c WI kappa m (p_BH - p)`, zero away from producers.

        `m` is `1/mu_w + 1/mu_o` as written, or the total mobility of the cell when mobility weighted.
        `kappa` is the geometric mean of the horizontal permeabilities.
        """
        coefficient = np.zeros(grid.num_cells)
        if not self.producer_cells:
            return coefficient
        cells = np.asarray(self.producer_cells)
        wi = well_index(grid.h[0], grid.h[1], self.wellbore_radius_ft)
        kappa = np.sqrt(field.component(0)[cells] * field.component(1)[cells])
        if mode == ProducerMobility.AS_WRITTEN:
            mobility: np.ndarray | float = 1.0 / fluid.water_viscosity + 1.0 / fluid.oil_viscosity
        else:
            mobility = fluid.total_mobility(saturation[cells])
        coefficient[cells] = DARCY_FIELD_FT3 * wi * kappa * mobility
        return coefficient

    def terms(
        self,
        grid: GridHierarchy,
        field: PermeabilityField,
        fluid: FluidModel,
        saturation: np.ndarray,
        mode: ProducerMobility = ProducerMobility.AS_WRITTEN,
    ) -> WellTerms:
        coefficient = self.producer_coefficient(grid, field, fluid, saturation, mode)
        rhs = self.injection_density(grid) + coefficient * self.bottom_hole_pressure_psi
        return WellTerms(coefficient, rhs)

    def producer_rates(self, coefficient: np.ndarray, pressure: np.ndarray) -> np.ndarray:
        """Signed producer source density, negative when fluid leaves the reservoir."""
        return coefficient * (self.bottom_hole_pressure_psi - pressure)

    def validate_cells(self, grid: GridHierarchy) -> None:
        for name, cells in (("injector", self.injector_cells), ("producer", self.producer_cells)):
            if any(not 0 <= c < grid.num_cells for c in cells):
                raise FieldError(f"{name} cell out of range [0, {grid.num_cells})")
        if set(self.injector_cells) & set(self.producer_cells):
            raise FieldError("a cell cannot hold both an injector and a producer")
