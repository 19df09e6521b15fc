from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from darcymg.errors import DimensionMismatchError, FieldError

from .field import NormalizedField, face_transmissibility
from .grid import AXIS_NAMES, FaceSet, GridHierarchy
from .linalg import SparseOperator

logger = logging.getLogger(__name__)

SIDE_NAMES = tuple(f"{axis}{side}" for axis in AXIS_NAMES for side in ("min", "max"))
COMPATIBILITY_RTOL = 1e-12


class BoundaryCondition(BaseModel):
    """Prescribed pressure on a subset of the domain sides; every other side is no-flow."""

    dirichlet: Dict[str, float] = Field(default_factory=dict)

    @field_validator("dirichlet")
    @classmethod
    def _known_sides(cls, value: Dict[str, float]) -> Dict[str, float]:
        unknown = sorted(set(value) - set(SIDE_NAMES))
        if unknown:
            raise ValueError(f"unknown domain sides {unknown}, expected a subset of {SIDE_NAMES}")
        return value

    @property
    def is_no_flow(self) -> bool:
        return not self.dirichlet

    def sides(self, dim: int) -> Iterator[Tuple[int, int, float]]:
        """Yields `(axis, side, pressure)` for every Dirichlet side, side 0 = min, 1 = max."""
        for name in SIDE_NAMES:
            if name not in self.dirichlet:
                continue
            axis = AXIS_NAMES.index(name[0])
            if axis >= dim:
                raise FieldError(f"side {name} does not exist on a {dim}D grid")
            yield axis, 0 if name.endswith("min") else 1, float(self.dirichlet[name])

    @classmethod
    def no_flow(cls) -> BoundaryCondition:
        return cls()


@dataclass(frozen=True)
class WellTerms:
    """Rate-pressure couplings `q_i = diagonal_i (p_ref_i - p_i)` plus fixed rates, per cell.

    `diagonal` is added to the matrix diagonal and `rhs` to the right-hand side, both already in the
    units of the assembled system.
    """

    diagonal: np.ndarray
    rhs: np.ndarray

    @classmethod
    def empty(cls, num_cells: int) -> WellTerms:
        return cls(np.zeros(num_cells), np.zeros(num_cells))

    @property
    def is_coupled(self) -> bool:
        return bool(np.any(self.diagonal > 0.0))


@dataclass(frozen=True)
class PressureSystem:
    """Cell-centered system `A p = rhs` after velocity elimination.

    `face_coefficient` holds the assembled coupling of every internal face and `extra_diagonal` the
    boundary and well terms added on top of the face couplings, so the outgoing flux of a cell is
    `rhs - extra_diagonal * p` for the exact solution. `well_diagonal` is the well share of
    `extra_diagonal`.
    """

    grid: GridHierarchy
    matrix: SparseOperator
    rhs: np.ndarray
    faces: FaceSet
    face_coefficient: np.ndarray
    extra_diagonal: np.ndarray
    spectral_weight: np.ndarray
    boundary: BoundaryCondition = field(default_factory=BoundaryCondition)
    nullspace: Optional[np.ndarray] = None
    well_diagonal: Optional[np.ndarray] = None

    @property
    def num_cells(self) -> int:
        return self.matrix.nrows

    @property
    def is_singular(self) -> bool:
        return self.nullspace is not None

    def cell_sources(self, p: np.ndarray) -> np.ndarray:
        pressure = np.asarray(p, dtype=np.float64)
        if pressure.shape != (self.num_cells,):
            raise DimensionMismatchError("pressure", self.num_cells, int(pressure.size))
        return self.rhs - self.extra_diagonal * pressure

    def residual(self, p: np.ndarray) -> np.ndarray:
        return self.rhs - self.matrix @ p

    def with_rhs(self, rhs: np.ndarray) -> PressureSystem:
        values = np.asarray(rhs, dtype=np.float64)
        if values.shape != (self.num_cells,):
            raise DimensionMismatchError("rhs", self.num_cells, int(values.size))
        return PressureSystem(
            self.grid,
            self.matrix,
            values,
            self.faces,
            self.face_coefficient,
            self.extra_diagonal,
            self.spectral_weight,
            self.boundary,
            self.nullspace,
            self.well_diagonal,
        )


def assemble(
    nf: NormalizedField,
    grid: GridHierarchy,
    boundary: Optional[BoundaryCondition] = None,
    wells: Optional[WellTerms] = None,
    sources: Optional[np.ndarray] = None,
    cell_mobility: Optional[np.ndarray] = None,
    coefficient: float = 1.0,
) -> PressureSystem:
    """Assemble the TPFA pressure matrix face by face.

    Every internal face couples its two cells with `coefficient * lambda_e * T_e`, `lambda_e` the
    arithmetic mean of the two cell mobilities (1 without `cell_mobility`). A Dirichlet side adds the
    half-cell closure `2 * kappa_axis` (same scaling, boundary cell mobility) to the diagonal and that
    value times the boundary pressure to the rhs. The spectral weight of a cell is
    `coefficient * lambda * Tr(kappa)`.
    """
    boundary = boundary or BoundaryCondition.no_flow()
    n = grid.num_cells
    if nf.num_cells != n:
        raise DimensionMismatchError("normalized field cells", n, nf.num_cells)
    if nf.dim != grid.dim:
        raise DimensionMismatchError("normalized field dimension", grid.dim, nf.dim)
    if coefficient <= 0.0:
        raise FieldError(f"system coefficient must be positive, got {coefficient}")

    faces = grid.internal_faces()
    coef = coefficient * face_transmissibility(nf, faces)
    mobility = np.ones(n) if cell_mobility is None else np.asarray(cell_mobility, dtype=np.float64)
    if mobility.shape != (n,):
        raise DimensionMismatchError("cell mobility", n, int(mobility.size))
    if np.any(mobility <= 0.0):
        raise FieldError("cell mobility must be strictly positive")
    coef = coef * 0.5 * (mobility[faces.lower] + mobility[faces.upper])

    rhs = np.zeros(n) if sources is None else np.array(sources, dtype=np.float64)
    if rhs.shape != (n,):
        raise DimensionMismatchError("sources", n, int(rhs.size))

    extra = np.zeros(n)
    well_diagonal = np.zeros(n)
    for axis, side, pressure in boundary.sides(grid.dim):
        cells = grid.boundary_cells(axis, side)
        closure = 2.0 * coefficient * mobility[cells] * nf.conductance[axis, cells]
        extra[cells] += closure
        rhs[cells] += closure * pressure

    if wells is not None:
        if wells.diagonal.shape != (n,) or wells.rhs.shape != (n,):
            raise DimensionMismatchError("well terms", n, int(wells.diagonal.size))
        well_diagonal = wells.diagonal.astype(np.float64)
        extra += well_diagonal
        rhs += wells.rhs

    diagonal = extra.copy()
    np.add.at(diagonal, faces.lower, coef)
    np.add.at(diagonal, faces.upper, coef)
    rows = np.concatenate([faces.lower, faces.upper, np.arange(n)])
    cols = np.concatenate([faces.upper, faces.lower, np.arange(n)])
    values = np.concatenate([-coef, -coef, diagonal])
    matrix = SparseOperator.from_triplets(rows, cols, values, (n, n), symmetric=True)

    weight = coefficient * mobility * nf.trace

    nullspace: Optional[np.ndarray] = None
    if boundary.is_no_flow and not np.any(extra > 0.0):
        nullspace = np.full(n, 1.0 / np.sqrt(n))
        imbalance = abs(float(rhs.sum()))
        if imbalance > COMPATIBILITY_RTOL * max(float(np.abs(rhs).sum()), 1.0):
            logger.warning(f"No-flow system with net source {rhs.sum():.3e}, only the compatible part is solvable")

    logger.debug(f"Assembled {n}x{n} pressure system with {len(faces)} faces, singular={nullspace is not None}")
    return PressureSystem(grid, matrix, rhs, faces, coef, extra, weight, boundary, nullspace, well_diagonal)


def default_sources(grid: GridHierarchy, q: float = 1.0) -> np.ndarray:
    """`+q` in the four corner columns of the x-y plane, `-4q` in the center column; 2D uses single cells."""
    nx, ny = grid.cells[0], grid.cells[1]
    layers = grid.cells[2] if grid.dim == 3 else 1
    columns = np.zeros((nx, ny))
    for i, j in ((0, 0), (nx - 1, 0), (0, ny - 1), (nx - 1, ny - 1)):
        columns[i, j] += q
    columns[nx // 2, ny // 2] -= 4.0 * q
    if grid.dim == 2:
        return columns.ravel(order="F")
    return np.repeat(columns[:, :, None], layers, axis=2).ravel(order="F")


@dataclass(frozen=True)
class VelocityField:
    """Per-internal-face flux `Q_e = -c_e (p+ - p-)`, positive along the face's axis."""

    faces: FaceSet
    flux: np.ndarray
    h: Tuple[float, ...]

    @property
    def velocity(self) -> np.ndarray:
        """Darcy velocity `v_e = -kappa_e (p+ - p-) / h_axis` in unnormalized units."""
        return self.flux * np.asarray(self.h)[self.faces.axis]

    def net_outflow(self, num_cells: int) -> np.ndarray:
        out = np.zeros(num_cells)
        np.add.at(out, self.faces.lower, self.flux)
        np.subtract.at(out, self.faces.upper, self.flux)
        return out

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.flux), initial=0.0))


def recover_velocity(system: PressureSystem, p: np.ndarray) -> VelocityField:
    pressure = np.asarray(p, dtype=np.float64)
    if pressure.shape != (system.num_cells,):
        raise DimensionMismatchError("pressure", system.num_cells, int(pressure.size))
    faces = system.faces
    flux = -system.face_coefficient * (pressure[faces.upper] - pressure[faces.lower])
    return VelocityField(faces, flux, system.grid.h)


def check_conservation(v: VelocityField, rhs: np.ndarray, grid: GridHierarchy) -> float:
    """Max over cells of |net outgoing flux - rhs|."""
    sources = np.asarray(rhs, dtype=np.float64)
    if sources.shape != (grid.num_cells,):
        raise DimensionMismatchError("conservation rhs", grid.num_cells, int(sources.size))
    return float(np.max(np.abs(v.net_outflow(grid.num_cells) - sources), initial=0.0))
