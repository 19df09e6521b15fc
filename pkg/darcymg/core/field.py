from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from darcymg.errors import DimensionMismatchError, FieldError, GridDivisibilityError

from .grid import AXIS_NAMES, FaceSet, GridHierarchy

logger = logging.getLogger(__name__)

PERIODIC_CELL = 8
MIN_POROSITY = 0.05


@dataclass(frozen=True)
class PermeabilityField:
    """Per-cell orthotropic permeability `Diag(kx, ky[, kz])` and porosity.

    `permeability` has shape (dim, num_cells) in lexicographic x-fastest cell order.
    """

    permeability: np.ndarray
    porosity: np.ndarray

    def __post_init__(self) -> None:
        perm = np.asarray(self.permeability, dtype=np.float64)
        phi = np.asarray(self.porosity, dtype=np.float64)
        if perm.ndim != 2 or perm.shape[0] not in (2, 3):
            raise FieldError(f"permeability must have shape (dim, n) with dim 2 or 3, got {perm.shape}")
        if phi.shape != (perm.shape[1],):
            raise DimensionMismatchError("porosity", perm.shape[1], int(phi.size))
        if not np.all(np.isfinite(perm)) or np.any(perm <= 0.0):
            raise FieldError("permeability must be finite and strictly positive")
        if not np.all(np.isfinite(phi)) or np.any(phi <= 0.0) or np.any(phi > 1.0):
            raise FieldError("porosity must lie in (0, 1]")
        object.__setattr__(self, "permeability", perm)
        object.__setattr__(self, "porosity", phi)

    @property
    def dim(self) -> int:
        return int(self.permeability.shape[0])

    @property
    def num_cells(self) -> int:
        return int(self.permeability.shape[1])

    def component(self, axis: int) -> np.ndarray:
        return self.permeability[axis]

    @property
    def contrast(self) -> float:
        return float(self.permeability.max() / self.permeability.min())

    @classmethod
    def isotropic(cls, values: np.ndarray, dim: int, porosity: Union[float, np.ndarray] = 1.0) -> PermeabilityField:
        kappa = np.asarray(values, dtype=np.float64).ravel()
        phi = np.broadcast_to(np.asarray(porosity, dtype=np.float64), kappa.shape).copy()
        return cls(np.tile(kappa, (dim, 1)), phi)

    @classmethod
    def uniform(cls, grid: GridHierarchy, value: float = 1.0, porosity: float = 1.0) -> PermeabilityField:
        return cls.isotropic(np.full(grid.num_cells, value), grid.dim, porosity)

    def scaled(self, factor: float) -> PermeabilityField:
        return PermeabilityField(self.permeability * factor, self.porosity)


@dataclass(frozen=True)
class NormalizedField:
    """Dimensionless conductances `kappa_d / h_d^2` with the per-cell trace precomputed."""

    conductance: np.ndarray
    trace: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.conductance.shape[0])

    @property
    def num_cells(self) -> int:
        return int(self.conductance.shape[1])


def normalize(field: PermeabilityField, grid: GridHierarchy) -> NormalizedField:
    if field.dim != grid.dim:
        raise DimensionMismatchError("field dimension", grid.dim, field.dim)
    if field.num_cells != grid.num_cells:
        raise DimensionMismatchError("field cells", grid.num_cells, field.num_cells)
    h2 = np.asarray(grid.h, dtype=np.float64) ** 2
    conductance = field.permeability / h2[:, None]
    return NormalizedField(conductance, conductance.sum(axis=0))


def face_transmissibility(nf: NormalizedField, faces: FaceSet) -> np.ndarray:
    """Harmonic mean of the axis-aligned conductances of the two cells of every face."""
    if np.any(faces.lower == faces.upper):
        raise FieldError("a face must join two distinct cells")
    left = nf.conductance[faces.axis, faces.lower]
    right = nf.conductance[faces.axis, faces.upper]
    return 2.0 / (1.0 / left + 1.0 / right)


def default_channel_mask(dim: int) -> np.ndarray:
    """Three (two in 2D) mutually orthogonal 2-cell-wide channels crossing at the cell center."""
    mask = np.zeros((PERIODIC_CELL,) * dim, dtype=bool)
    mid = slice(PERIODIC_CELL // 2 - 1, PERIODIC_CELL // 2 + 1)
    for axis in range(dim):
        index = [mid] * dim
        index[axis] = slice(None)
        mask[tuple(index)] = True
    return mask


def gen_periodic_cell(
    grid: GridHierarchy, contrast: float, mask: Optional[np.ndarray] = None, porosity: float = 1.0
) -> PermeabilityField:
    """Tile an 8^dim binary pattern (indexed x, y[, z]) over the grid: `contrast` on ones, 1 elsewhere."""
    pattern = default_channel_mask(grid.dim) if mask is None else np.asarray(mask, dtype=bool)
    if pattern.shape != (PERIODIC_CELL,) * grid.dim:
        raise FieldError(f"cell pattern must have shape {(PERIODIC_CELL,) * grid.dim}, got {pattern.shape}")
    for axis, n in enumerate(grid.cells):
        if n % PERIODIC_CELL:
            raise GridDivisibilityError(AXIS_NAMES[axis], n, PERIODIC_CELL)
    reps = tuple(n // PERIODIC_CELL for n in grid.cells)
    tiled = np.tile(pattern, reps).ravel(order="F")
    kappa = np.where(tiled, float(contrast), 1.0)
    logger.debug(f"Periodic cell medium with {int(tiled.sum())} channel cells, contrast {contrast:g}")
    return PermeabilityField.isotropic(kappa, grid.dim, porosity)


@dataclass(frozen=True)
class FractureSlab:
    """Axis-aligned box of cells `[lower, upper)` per axis."""

    lower: Tuple[int, ...]
    upper: Tuple[int, ...]

    @classmethod
    def plane(cls, grid: GridHierarchy, axis: int, start: int, thickness: int = 1) -> FractureSlab:
        lower = [0] * grid.dim
        upper = list(grid.cells)
        lower[axis] = start
        upper[axis] = start + thickness
        return cls(tuple(lower), tuple(upper))

    def cells(self, grid: GridHierarchy) -> np.ndarray:
        if len(self.lower) != grid.dim or len(self.upper) != grid.dim:
            raise DimensionMismatchError("slab bounds", grid.dim, len(self.lower))
        for axis, (lo, hi, n) in enumerate(zip(self.lower, self.upper, grid.cells)):
            if not 0 <= lo < hi <= n:
                raise FieldError(f"slab [{lo}, {hi}) out of bounds on axis {AXIS_NAMES[axis]} with {n} cells")
        ranges = [np.arange(lo, hi) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*ranges, indexing="ij")
        return np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid.cells, order="F")


def gen_fractured(
    grid: GridHierarchy, slabs: Sequence[FractureSlab], contrast_exponent: int, porosity: float = 1.0
) -> PermeabilityField:
    """Matrix permeability 1, `10**contrast_exponent` inside any slab."""
    kappa = np.ones(grid.num_cells)
    for slab in slabs:
        kappa[slab.cells(grid)] = 10.0 ** int(contrast_exponent)
    return PermeabilityField.isotropic(kappa, grid.dim, porosity)


def random_fracture_slabs(grid: GridHierarchy, seed: int, count: int = 8, thickness: int = 1) -> List[FractureSlab]:
    """Planar slabs `thickness` cells thick with random normal axis, position and in-plane extent (half to full)."""
    rng = np.random.default_rng(seed)
    slabs: List[FractureSlab] = []
    for _ in range(count):
        axis = int(rng.integers(grid.dim))
        lower: List[int] = []
        upper: List[int] = []
        for other, n in enumerate(grid.cells):
            if other == axis:
                start = int(rng.integers(0, n - thickness + 1))
                lower.append(start)
                upper.append(start + thickness)
            else:
                length = int(rng.integers(max(n // 2, 1), n + 1))
                start = int(rng.integers(0, n - length + 1))
                lower.append(start)
                upper.append(start + length)
        slabs.append(FractureSlab(tuple(lower), tuple(upper)))
    return slabs


def gen_spe10_like(
    grid: GridHierarchy,
    seed: int,
    log_range: Tuple[float, float] = (-3.0, 5.0),
    anisotropy_log_max: float = 4.0,
    correlation_cells: float = 2.0,
) -> PermeabilityField:
    """Layered log-normal orthotropic medium.

    Each z-layer (or the single 2D layer) gets its own smoothed Gaussian log-permeability rescaled
    to `log_range` (log10 md); `ky = kx`, and in 3D `kz = kx / 10**r` with `r` uniform in
    `[0, anisotropy_log_max]`. Porosity follows log-permeability and is truncated at 0.05.
    """
    rng = np.random.default_rng(seed)
    low, high = log_range
    if high < low:
        raise FieldError(f"log range must be increasing, got {log_range}")
    shape = grid.cells
    noise = rng.standard_normal(shape)
    sigma = [correlation_cells] * grid.dim
    if grid.dim == 3:
        sigma[2] = 0.0
    smooth = gaussian_filter(noise, sigma=sigma, mode="wrap")
    layer_axes = (0, 1)
    lo = smooth.min(axis=layer_axes, keepdims=True)
    hi = smooth.max(axis=layer_axes, keepdims=True)
    unit = (smooth - lo) / np.where(hi > lo, hi - lo, 1.0)
    log_kx = (low + (high - low) * unit).ravel(order="F")
    kx = 10.0**log_kx
    components = [kx, kx.copy()]
    if grid.dim == 3:
        ratio = rng.uniform(0.0, anisotropy_log_max, size=grid.num_cells)
        components.append(kx / 10.0**ratio)
    porosity = np.clip(0.05 + 0.3 * (log_kx - low) / max(high - low, 1e-12), MIN_POROSITY, 0.4)
    logger.info(f"Generated SPE10-like field with seed {seed}, contrast {10.0 ** (log_kx.max() - log_kx.min()):.2e}")
    return PermeabilityField(np.vstack(components), porosity)


def gen_log_uniform(
    grid: GridHierarchy, seed: int, contrast_exponent: float, anisotropic: bool = False, porosity: float = 1.0
) -> PermeabilityField:
    """Uncorrelated `10**U(0, contrast_exponent)` per cell, one draw per axis when `anisotropic`."""
    if contrast_exponent < 0.0:
        raise FieldError(f"contrast exponent must be non-negative, got {contrast_exponent}")
    rng = np.random.default_rng(seed)
    rows = grid.dim if anisotropic else 1
    exponents = rng.uniform(0.0, contrast_exponent, size=(rows, grid.num_cells))
    kappa = np.broadcast_to(10.0**exponents, (grid.dim, grid.num_cells)).copy()
    return PermeabilityField(kappa, np.full(grid.num_cells, porosity))


class RawLayout(Enum):
    INTERLEAVED = "interleaved"
    PLANAR = "planar"


def load_raw(
    path: Union[str, Path],
    grid: GridHierarchy,
    layout: RawLayout = RawLayout.INTERLEAVED,
    with_porosity: Optional[bool] = None,
) -> PermeabilityField:
    """Read header-less little-endian float64 `kx ky [kz] [phi]` records in lexicographic cell order.

    `INTERLEAVED` stores one record per cell, `PLANAR` stores each quantity for all cells in turn.
    Whether a porosity column is present follows from the file size: n x dim values carry none and get
    porosity 1, n x (dim + 1) values end with porosity, truncated below at 0.05. An explicit
    `with_porosity` must agree with the size.
    """
    file_path = Path(path)
    try:
        raw = np.fromfile(file_path, dtype="<f8")
    except FileNotFoundError as e:
        raise FieldError(f"field file not found: {file_path}") from e
    n = grid.num_cells
    if raw.size == n * grid.dim:
        has_porosity = False
    elif raw.size == n * (grid.dim + 1):
        has_porosity = True
    else:
        raise FieldError(
            f"field file {file_path} holds {raw.size} values, expected n x {grid.dim} = {n * grid.dim} "
            f"or n x {grid.dim + 1} = {n * (grid.dim + 1)}"
        )
    if with_porosity is not None and with_porosity != has_porosity:
        raise FieldError(
            f"field file {file_path} holds {raw.size} values, which is the layout "
            f"{'with' if has_porosity else 'without'} porosity"
        )
    columns = grid.dim + (1 if has_porosity else 0)
    if layout == RawLayout.INTERLEAVED:
        table = raw.reshape(grid.num_cells, columns).T
    else:
        table = raw.reshape(columns, grid.num_cells)
    if not np.all(np.isfinite(table)) or np.any(table <= 0.0):
        raise FieldError(f"field file {file_path} contains non-positive or non-finite values")
    perm = np.array(table[: grid.dim])
    porosity = np.clip(table[grid.dim], MIN_POROSITY, 1.0) if has_porosity else np.ones(grid.num_cells)
    logger.info(f"Loaded field from '{file_path}' ({grid.num_cells} cells, layout {layout.value})")
    return PermeabilityField(perm, np.array(porosity))


def save_raw(path: Union[str, Path], field: PermeabilityField, layout: RawLayout = RawLayout.INTERLEAVED) -> None:
    table = np.vstack([field.permeability, field.porosity[None, :]])
    data = table.T if layout == RawLayout.INTERLEAVED else table
    np.ascontiguousarray(data, dtype="<f8").tofile(Path(path))
