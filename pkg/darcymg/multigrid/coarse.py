from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sps
from pydantic import BaseModel, ConfigDict, Field

from darcymg.core.grid import BlockLevel, GridHierarchy
from darcymg.core.linalg import EigenDecomposition, SparseOperator, dense_sym_eig
from darcymg.core.tpfa import PressureSystem
from darcymg.errors import DimensionMismatchError, NormalizationError

logger = logging.getLogger(__name__)

DEFAULT_CANDIDATE_CAP = 20
DEGENERACY_RTOL = 1e-12
IDENTITY_RTOL = 1e-10
FULL_SPACE_COUNT = 1 << 30


class SelectionStrategy(str, Enum):
    FIXED = "fixed"
    THRESHOLD = "threshold"


class SelectionRule(BaseModel):
    """How many local eigenvectors a block contributes to its coarse space."""

    model_config = ConfigDict(frozen=True)

    strategy: SelectionStrategy = SelectionStrategy.FIXED
    count: int = Field(default=4, ge=1)
    threshold: float = Field(default=1e12, gt=0.0)
    candidate_cap: int = Field(default=DEFAULT_CANDIDATE_CAP, ge=1)

    @classmethod
    def fixed(cls, count: int) -> SelectionRule:
        return cls(strategy=SelectionStrategy.FIXED, count=count)

    @classmethod
    def by_threshold(cls, threshold: float, candidate_cap: int = DEFAULT_CANDIDATE_CAP) -> SelectionRule:
        return cls(strategy=SelectionStrategy.THRESHOLD, threshold=threshold, candidate_cap=candidate_cap)

    @classmethod
    def full(cls) -> SelectionRule:
        """Keeps every local eigenvector; the count is clamped to the block dimension."""
        return cls(strategy=SelectionStrategy.FIXED, count=FULL_SPACE_COUNT)

    def kept_count(self, eigenvalues: np.ndarray) -> int:
        size = int(eigenvalues.shape[0])
        if self.strategy == SelectionStrategy.FIXED:
            count = min(self.count, size)
        else:
            count = select_by_threshold(eigenvalues, self.threshold, min(self.candidate_cap, size))
        return extend_degenerate(eigenvalues, count)


def select_by_threshold(eigenvalues: np.ndarray, threshold: float, candidate_cap: int) -> int:
    """Number of candidate eigenvalues below `threshold`, clamped to `[1, candidate_cap]`."""
    candidates = np.asarray(eigenvalues)[:candidate_cap]
    count = int(np.clip(np.count_nonzero(candidates < threshold), 1, candidate_cap))
    if count == candidate_cap:
        logger.warning(f"Eigenvalue threshold {threshold:g} keeps all {candidate_cap} candidates")
    return count


def extend_degenerate(eigenvalues: np.ndarray, count: int) -> int:
    """Grow `count` so a degenerate eigenvalue group is never split."""
    values = np.asarray(eigenvalues)
    if values.size == 0:
        return 0
    tolerance = DEGENERACY_RTOL * float(np.max(np.abs(values)))
    while 0 < count < values.shape[0] and abs(values[count] - values[count - 1]) <= tolerance:
        count += 1
    return count


@dataclass(frozen=True)
class LocalSpectralBasis:
    """Eigenpairs of one block's local problem and the number of vectors kept.

    `dofs` are the block's indices in the level below: fine cells for level c, level-c degrees of
    freedom for level cc.
    """

    level: BlockLevel
    block_id: int
    dofs: np.ndarray
    decomposition: EigenDecomposition
    kept: int

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.decomposition.eigenvalues

    @property
    def vectors(self) -> np.ndarray:
        return self.decomposition.eigenvectors[:, : self.kept]

    @property
    def first_discarded(self) -> float:
        """Smallest eigenvalue left out of the coarse space, `inf` for a full local space."""
        if self.kept >= len(self.decomposition):
            return float("inf")
        return float(self.eigenvalues[self.kept])


def local_block_matrix(system: PressureSystem, dofs: np.ndarray, include_well_terms: bool = True) -> np.ndarray:
    """Dense TPFA matrix of the faces inside a block of cells.

    Couplings to cells outside the block and Dirichlet closures are dropped, so a block without wells
    is pure Neumann. Well terms of the block's cells are kept when `include_well_terms` is set.
    """
    sub = system.matrix.submatrix(dofs).toarray()
    np.fill_diagonal(sub, 0.0)
    diagonal = -sub.sum(axis=1)
    if include_well_terms and system.well_diagonal is not None:
        diagonal = diagonal + system.well_diagonal[dofs]
    sub[np.diag_indices_from(sub)] = diagonal
    return sub


def local_spectral_c(
    a_block: np.ndarray,
    s_block: np.ndarray,
    rule: SelectionRule,
    block_id: int = 0,
    dofs: Optional[np.ndarray] = None,
) -> LocalSpectralBasis:
    decomposition = dense_sym_eig(a_block, s_block)
    kept = rule.kept_count(decomposition.eigenvalues)
    cells = np.arange(a_block.shape[0]) if dofs is None else np.asarray(dofs)
    return LocalSpectralBasis(BlockLevel.COARSE, block_id, cells, decomposition, kept)


@dataclass(frozen=True)
class CoarseSpace:
    """Restriction and Galerkin operator of one coarse level, with the local bases it is made of.

    `offsets[i]:offsets[i + 1]` are the degrees of freedom of block `i` at this level.
    """

    level: BlockLevel
    bases: Tuple[LocalSpectralBasis, ...]
    restriction: SparseOperator
    operator: SparseOperator
    offsets: np.ndarray
    fine_restriction: SparseOperator
    kernel: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        return self.restriction.nrows

    def block_dofs(self, block_id: int) -> np.ndarray:
        return np.arange(self.offsets[block_id], self.offsets[block_id + 1])

    def nullspace(self) -> Optional[np.ndarray]:
        """Normalized coefficients of the global constant, `None` for a non-singular fine system."""
        return self.kernel

    @property
    def eigenvalue_cut(self) -> float:
        """Smallest first-discarded local eigenvalue over the blocks."""
        return min(basis.first_discarded for basis in self.bases)


def _stack_rows(bases: Sequence[LocalSpectralBasis], ncols: int) -> Tuple[SparseOperator, np.ndarray]:
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    values: List[np.ndarray] = []
    offsets = np.zeros(len(bases) + 1, dtype=np.int64)
    for i, basis in enumerate(bases):
        vectors = basis.vectors
        kept = vectors.shape[1]
        rows.append(np.repeat(offsets[i] + np.arange(kept), basis.dofs.shape[0]))
        cols.append(np.tile(basis.dofs, kept))
        values.append(vectors.T.ravel())
        offsets[i + 1] = offsets[i] + kept
    nrows = int(offsets[-1])
    matrix = sps.coo_matrix(
        (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))), shape=(nrows, ncols)
    )
    return SparseOperator(matrix), offsets


def _check_complete(bases: Sequence[LocalSpectralBasis], num_blocks: int) -> List[LocalSpectralBasis]:
    ordered = sorted(bases, key=lambda basis: basis.block_id)
    ids = [basis.block_id for basis in ordered]
    if ids != list(range(num_blocks)):
        missing = sorted(set(range(num_blocks)) - set(ids))
        raise ValueError(f"local bases do not cover every block, missing {missing[:10]}")
    return ordered


def build_Rc(bases: Sequence[LocalSpectralBasis], grid: GridHierarchy, system: PressureSystem) -> CoarseSpace:
    ordered = _check_complete(bases, grid.num_coarse_blocks)
    restriction, offsets = _stack_rows(ordered, grid.num_cells)
    operator = system.matrix.galerkin(restriction)
    kernel = None
    if system.is_singular:
        # S-orthonormal rows: R_c S 1 are the coefficients of the constant
        kernel = restriction @ system.spectral_weight
        kernel = kernel / np.linalg.norm(kernel)
    logger.info(f"Level c space: {restriction.nrows} dofs over {len(ordered)} blocks")
    return CoarseSpace(BlockLevel.COARSE, tuple(ordered), restriction, operator, offsets, restriction, kernel)


def cc_block_dofs(space_c: CoarseSpace, grid: GridHierarchy, cc_block: int) -> np.ndarray:
    children = grid.coarse_children(cc_block)
    return np.concatenate([space_c.block_dofs(int(child)) for child in children])


def local_spectral_cc(
    space_c: CoarseSpace,
    system: PressureSystem,
    grid: GridHierarchy,
    cc_block: int,
    rule: SelectionRule,
    include_well_terms: bool = True,
) -> LocalSpectralBasis:
    """Galerkin projection of the cc block's local fine problem onto its level-c basis, then a standard eigensolve.

    The level-c vectors are S-orthonormal, so the projected right-hand operator must be the identity.
    """
    cells = grid.coarse_coarse.block_cells(cc_block)
    dofs = cc_block_dofs(space_c, grid, cc_block)
    phi = space_c.restriction.csr[dofs][:, cells].toarray().T
    a_local = local_block_matrix(system, cells, include_well_terms)
    a_projected = phi.T @ a_local @ phi
    s_projected = phi.T @ (system.spectral_weight[cells][:, None] * phi)
    deviation = float(np.max(np.abs(s_projected - np.eye(dofs.shape[0]))))
    if deviation > IDENTITY_RTOL:
        raise NormalizationError(deviation, IDENTITY_RTOL)
    decomposition = dense_sym_eig(0.5 * (a_projected + a_projected.T))
    kept = rule.kept_count(decomposition.eigenvalues)
    return LocalSpectralBasis(BlockLevel.COARSE_COARSE, cc_block, dofs, decomposition, kept)


def build_Rcc(bases: Sequence[LocalSpectralBasis], space_c: CoarseSpace, grid: GridHierarchy) -> CoarseSpace:
    ordered = _check_complete(bases, grid.num_cc_blocks)
    restriction, offsets = _stack_rows(ordered, space_c.dimension)
    operator = space_c.operator.galerkin(restriction)
    fine_restriction = SparseOperator(restriction.csr @ space_c.restriction.csr)
    kernel = None
    if space_c.kernel is not None:
        kernel = restriction @ space_c.kernel
        kernel = kernel / np.linalg.norm(kernel)
    logger.info(f"Level cc space: {restriction.nrows} dofs over {len(ordered)} blocks")
    return CoarseSpace(
        BlockLevel.COARSE_COARSE, tuple(ordered), restriction, operator, offsets, fine_restriction, kernel
    )


def build_coarse_spaces(
    system: PressureSystem,
    grid: GridHierarchy,
    rule_c: SelectionRule,
    rule_cc: SelectionRule,
    include_well_terms: bool = True,
    workers: int = 1,
) -> Tuple[CoarseSpace, CoarseSpace]:
    """Both nested levels; block eigenproblems run on a thread pool of `workers` threads."""

    def solve_c(block_id: int) -> LocalSpectralBasis:
        cells = grid.coarse.block_cells(block_id)
        a_block = local_block_matrix(system, cells, include_well_terms)
        return local_spectral_c(a_block, system.spectral_weight[cells], rule_c, block_id, cells)

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as executor:
        bases_c = list(executor.map(solve_c, range(grid.num_coarse_blocks)))
        space_c = build_Rc(bases_c, grid, system)
        bases_cc = list(
            executor.map(
                lambda cc: local_spectral_cc(space_c, system, grid, cc, rule_cc, include_well_terms),
                range(grid.num_cc_blocks),
            )
        )
    return space_c, build_Rcc(bases_cc, space_c, grid)


def interpolation_error(basis: LocalSpectralBasis, v: np.ndarray, weight: np.ndarray) -> float:
    """Squared S-norm distance of a local vector to the span of the kept eigenvectors."""
    local = np.asarray(v, dtype=np.float64)
    if local.shape != (basis.dofs.shape[0],):
        raise DimensionMismatchError("local vector", basis.dofs.shape[0], int(local.size))
    vectors = basis.vectors
    residual = local - vectors @ (vectors.T @ (weight * local))
    return float(residual @ (weight * residual))


def write_eigenvalues(space: CoarseSpace, path: Union[str, Path]) -> None:
    """CSV of every computed local eigenvalue: block_id, k, eigenvalue, kept."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["block_id", "k", "eigenvalue", "kept"])
        for basis in space.bases:
            for k, value in enumerate(basis.eigenvalues):
                writer.writerow([basis.block_id, k, f"{value:.16e}", int(k < basis.kept)])
    logger.debug(f"Wrote {space.level.value} eigenvalues to '{file_path}'")
