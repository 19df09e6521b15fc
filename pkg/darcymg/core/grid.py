from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from darcymg.errors import DimensionMismatchError, GridDivisibilityError

logger = logging.getLogger(__name__)

AXIS_NAMES = ("x", "y", "z")


class BlockLevel(Enum):
    COARSE = "c"
    COARSE_COARSE = "cc"


@dataclass(frozen=True)
class FaceSet:
    """Internal faces as parallel arrays, each oriented from `lower` towards the positive `axis` direction."""

    lower: np.ndarray
    upper: np.ndarray
    axis: np.ndarray

    def __len__(self) -> int:
        return int(self.lower.shape[0])

    def __iter__(self) -> Iterator[Tuple[int, int, int]]:
        for lo, hi, ax in zip(self.lower.tolist(), self.upper.tolist(), self.axis.tolist()):
            yield lo, hi, ax

    def select(self, mask: np.ndarray) -> FaceSet:
        return FaceSet(self.lower[mask], self.upper[mask], self.axis[mask])


@dataclass(frozen=True)
class BlockMap:
    """Non-overlapping partition of the fine cells into equally sized boxes."""

    level: BlockLevel
    cells_per_axis: Tuple[int, ...]
    blocks_per_axis: Tuple[int, ...]
    block_shape: Tuple[int, ...]
    _owner: np.ndarray = field(repr=False, compare=False)

    @property
    def num_blocks(self) -> int:
        return int(np.prod(self.blocks_per_axis))

    @property
    def cells_per_block(self) -> int:
        return int(np.prod(self.block_shape))

    def block_multi_index(self, block_id: int) -> Tuple[int, ...]:
        self._check_block(block_id)
        return tuple(int(i) for i in np.unravel_index(block_id, self.blocks_per_axis, order="F"))

    def block_ranges(self, block_id: int) -> List[Tuple[int, int]]:
        """Owned fine-cell index range [start, stop) per axis."""
        index = self.block_multi_index(block_id)
        return [(i * s, (i + 1) * s) for i, s in zip(index, self.block_shape)]

    def block_cells(self, block_id: int) -> np.ndarray:
        """Sorted linear fine-cell indices owned by the block."""
        ranges = [np.arange(start, stop) for start, stop in self.block_ranges(block_id)]
        mesh = np.meshgrid(*ranges, indexing="ij")
        cells = np.ravel_multi_index(tuple(m.ravel() for m in mesh), self.cells_per_axis, order="F")
        return np.sort(cells)

    def block_of(self, cells: np.ndarray | int) -> np.ndarray:
        ids = np.asarray(cells)
        if np.any(ids < 0) or np.any(ids >= self._owner.shape[0]):
            raise IndexError(f"cell index out of range [0, {self._owner.shape[0]})")
        return self._owner[ids]

    @property
    def owner(self) -> np.ndarray:
        """Block id of every fine cell."""
        return self._owner

    def _check_block(self, block_id: int) -> None:
        if not 0 <= block_id < self.num_blocks:
            raise IndexError(f"block id {block_id} out of range [0, {self.num_blocks})")


class GridHierarchy:
    """Uniform Cartesian fine grid with its coarse and coarse-coarse block partitions.

    Cells are linearized lexicographically with x fastest, i.e. `i + Nx * (j + Ny * k)`,
    which is numpy's Fortran order for arrays shaped `(Nx, Ny[, Nz])`.
    """

    def __init__(
        self,
        cells: Sequence[int],
        lengths: Sequence[float],
        cc_blocks: Sequence[int],
        subdivision: int,
    ) -> None:
        dim = len(cells)
        if dim not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {dim}")
        if len(lengths) != dim or len(cc_blocks) != dim:
            raise DimensionMismatchError("grid lengths/cc blocks", dim, min(len(lengths), len(cc_blocks)))
        if subdivision < 1:
            raise ValueError(f"subdivision must be at least 1, got {subdivision}")
        if any(length <= 0.0 for length in lengths):
            raise ValueError(f"domain lengths must be positive, got {tuple(lengths)}")
        for axis, (n, m) in enumerate(zip(cells, cc_blocks)):
            if m < 1 or n < 1 or n % (m * subdivision) != 0:
                raise GridDivisibilityError(AXIS_NAMES[axis], int(n), int(m) * subdivision)

        self._dim = dim
        self._cells = tuple(int(n) for n in cells)
        self._lengths = tuple(float(length) for length in lengths)
        self._cc_blocks = tuple(int(m) for m in cc_blocks)
        self._subdivision = int(subdivision)
        self._h = tuple(length / n for length, n in zip(self._lengths, self._cells))
        c_blocks = tuple(m * self._subdivision for m in self._cc_blocks)
        self._coarse = self._build_block_map(BlockLevel.COARSE, c_blocks)
        self._coarse_coarse = self._build_block_map(BlockLevel.COARSE_COARSE, self._cc_blocks)
        logger.debug(
            f"Grid {self._cells} with {self.num_coarse_blocks} coarse and {self.num_cc_blocks} coarse-coarse blocks"
        )

    def _build_block_map(self, level: BlockLevel, blocks: Tuple[int, ...]) -> BlockMap:
        shape = tuple(n // m for n, m in zip(self._cells, blocks))
        coords = np.unravel_index(np.arange(self.num_cells), self._cells, order="F")
        block_coords = tuple(c // s for c, s in zip(coords, shape))
        owner = np.ravel_multi_index(block_coords, blocks, order="F")
        return BlockMap(level, self._cells, blocks, shape, owner)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def cells(self) -> Tuple[int, ...]:
        return self._cells

    @property
    def lengths(self) -> Tuple[float, ...]:
        return self._lengths

    @property
    def h(self) -> Tuple[float, ...]:
        return self._h

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self._h))

    @property
    def cc_blocks(self) -> Tuple[int, ...]:
        return self._cc_blocks

    @property
    def subdivision(self) -> int:
        return self._subdivision

    @property
    def num_cells(self) -> int:
        return int(np.prod(self._cells))

    @property
    def num_cc_blocks(self) -> int:
        return int(np.prod(self._cc_blocks))

    @property
    def num_coarse_blocks(self) -> int:
        return self.num_cc_blocks * self._subdivision**self._dim

    @property
    def coarse(self) -> BlockMap:
        return self._coarse

    @property
    def coarse_coarse(self) -> BlockMap:
        return self._coarse_coarse

    def block_map(self, level: BlockLevel) -> BlockMap:
        return self._coarse if level == BlockLevel.COARSE else self._coarse_coarse

    def cell_index(self, *index: int) -> int:
        if len(index) != self._dim:
            raise DimensionMismatchError("cell multi-index", self._dim, len(index))
        for axis, (i, n) in enumerate(zip(index, self._cells)):
            if not 0 <= i < n:
                raise IndexError(f"index {i} out of range [0, {n}) on axis {AXIS_NAMES[axis]}")
        return int(np.ravel_multi_index(index, self._cells, order="F"))

    def cell_multi_index(self, cell: int) -> Tuple[int, ...]:
        if not 0 <= cell < self.num_cells:
            raise IndexError(f"cell {cell} out of range [0, {self.num_cells})")
        return tuple(int(i) for i in np.unravel_index(cell, self._cells, order="F"))

    def cell_coordinates(self) -> np.ndarray:
        """Cell centers, shape (num_cells, dim)."""
        coords = np.unravel_index(np.arange(self.num_cells), self._cells, order="F")
        return np.stack([(c + 0.5) * h for c, h in zip(coords, self._h)], axis=1)

    def internal_faces(self) -> FaceSet:
        lower: List[np.ndarray] = []
        upper: List[np.ndarray] = []
        axes: List[np.ndarray] = []
        ids = np.arange(self.num_cells).reshape(self._cells, order="F")
        for axis in range(self._dim):
            lo = np.take(ids, np.arange(self._cells[axis] - 1), axis=axis).ravel(order="F")
            hi = np.take(ids, np.arange(1, self._cells[axis]), axis=axis).ravel(order="F")
            lower.append(lo)
            upper.append(hi)
            axes.append(np.full(lo.shape[0], axis, dtype=np.int64))
        return FaceSet(np.concatenate(lower), np.concatenate(upper), np.concatenate(axes))

    def boundary_cells(self, axis: int, side: int) -> np.ndarray:
        """Cells touching the domain side `side` (0 = min, 1 = max) of `axis`."""
        ids = np.arange(self.num_cells).reshape(self._cells, order="F")
        position = 0 if side == 0 else self._cells[axis] - 1
        return np.sort(np.take(ids, position, axis=axis).ravel())

    def coarse_parent(self, coarse_block: int | np.ndarray) -> np.ndarray:
        """Coarse-coarse block containing each coarse block."""
        index = np.unravel_index(np.asarray(coarse_block), self._coarse.blocks_per_axis, order="F")
        parent = tuple(i // self._subdivision for i in index)
        return np.asarray(np.ravel_multi_index(parent, self._cc_blocks, order="F"))

    def coarse_children(self, cc_block: int) -> np.ndarray:
        """Coarse blocks inside a coarse-coarse block, sorted."""
        parents = self.coarse_parent(np.arange(self.num_coarse_blocks))
        return np.flatnonzero(parents == cc_block)

    def __repr__(self) -> str:
        return (
            f"GridHierarchy(cells={self._cells}, lengths={self._lengths}, cc_blocks={self._cc_blocks}, "
            f"sd={self._subdivision})"
        )


def build_hierarchy(
    dim: int, cells: Sequence[int], lengths: Sequence[float], cc_blocks: Sequence[int], subdivision: int
) -> GridHierarchy:
    if len(cells) != dim:
        raise DimensionMismatchError("cells per axis", dim, len(cells))
    return GridHierarchy(cells, lengths, cc_blocks, subdivision)
