from .coarse import (
    CoarseSpace,
    LocalSpectralBasis,
    SelectionRule,
    SelectionStrategy,
    build_coarse_spaces,
    build_Rc,
    build_Rcc,
    interpolation_error,
    local_block_matrix,
    local_spectral_c,
    local_spectral_cc,
    select_by_threshold,
    write_eigenvalues,
)
from .preconditioner import PreconditionerMode, PreconditionerSettings, ThreeGridPreconditioner
from .smoother import BlockJacobiSmoother, smoother_apply, smoother_contract_check, smoother_contract_margin
from .theory import InequalityCheck, TheoryReport, symmetrized_smoother, verify_theory, xz_max_min

__all__ = [
    "CoarseSpace",
    "LocalSpectralBasis",
    "SelectionRule",
    "SelectionStrategy",
    "build_coarse_spaces",
    "build_Rc",
    "build_Rcc",
    "interpolation_error",
    "local_block_matrix",
    "local_spectral_c",
    "local_spectral_cc",
    "select_by_threshold",
    "write_eigenvalues",
    "PreconditionerMode",
    "PreconditionerSettings",
    "ThreeGridPreconditioner",
    "BlockJacobiSmoother",
    "smoother_apply",
    "smoother_contract_check",
    "smoother_contract_margin",
    "InequalityCheck",
    "TheoryReport",
    "symmetrized_smoother",
    "verify_theory",
    "xz_max_min",
]
