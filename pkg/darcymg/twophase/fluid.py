from __future__ import annotations

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from darcymg.errors import SaturationBoundsError

SATURATION_SLACK = 1e-9


class FluidModel(BaseModel):
    """Quadratic relative permeabilities on the normalized saturation `(S - S_min) / (S_max - S_min)`."""

    model_config = ConfigDict(frozen=True)

    water_viscosity: float = Field(default=0.3, gt=0.0)
    oil_viscosity: float = Field(default=3.0, gt=0.0)
    s_min: float = Field(default=0.2, ge=0.0, lt=1.0)
    s_max: float = Field(default=0.8, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _ordered_bounds(self) -> FluidModel:
        if self.s_max <= self.s_min:
            raise ValueError(f"s_max ({self.s_max}) must exceed s_min ({self.s_min})")
        return self

    def check_bounds(self, saturation: np.ndarray, step: int = 0) -> None:
        low, high = float(np.min(saturation)), float(np.max(saturation))
        if low < self.s_min - SATURATION_SLACK or high > self.s_max + SATURATION_SLACK:
            raise SaturationBoundsError(low, high, step)

    def normalized(self, saturation: np.ndarray) -> np.ndarray:
        s = (np.asarray(saturation, dtype=np.float64) - self.s_min) / (self.s_max - self.s_min)
        return np.clip(s, 0.0, 1.0)

    def relative_permeabilities(self, saturation: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        s = self.normalized(saturation)
        return s**2, (1.0 - s) ** 2

    def phase_mobilities(self, saturation: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        krw, kro = self.relative_permeabilities(saturation)
        return krw / self.water_viscosity, kro / self.oil_viscosity

    def total_mobility(self, saturation: np.ndarray) -> np.ndarray:
        water, oil = self.phase_mobilities(saturation)
        return water + oil

    def fractional_flow(self, saturation: np.ndarray) -> np.ndarray:
        water, oil = self.phase_mobilities(saturation)
        return water / (water + oil)

    def mobilities(self, saturation: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Total mobility and water fractional flow; raises outside `[S_min, S_max]` beyond round-off."""
        values = np.asarray(saturation, dtype=np.float64)
        self.check_bounds(values)
        water, oil = self.phase_mobilities(values)
        total = water + oil
        return total, water / total

    def fractional_flow_derivative(self, saturation: np.ndarray) -> np.ndarray:
        s = self.normalized(saturation)
        a, b = 1.0 / self.water_viscosity, 1.0 / self.oil_viscosity
        denominator = a * s**2 + b * (1.0 - s) ** 2
        return 2.0 * a * b * s * (1.0 - s) / denominator**2 / (self.s_max - self.s_min)

    def max_fractional_flow_derivative(self, samples: int = 10001) -> float:
        grid = np.linspace(self.s_min, self.s_max, samples)
        return float(np.max(self.fractional_flow_derivative(grid)))
