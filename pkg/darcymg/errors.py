from __future__ import annotations

from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from darcymg.solvers.base import SolveReport


class DarcyMGError(Exception):
    """Base class of every error raised by darcymg."""


class DimensionMismatchError(DarcyMGError, ValueError):
    def __init__(self, what: str, expected: int, actual: int) -> None:
        super().__init__(f"{what}: expected length {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class SymmetryError(DarcyMGError):
    def __init__(self, asymmetry: float, tolerance: float) -> None:
        super().__init__(f"matrix is not symmetric: max |A - A^T| = {asymmetry:.3e} > {tolerance:.3e}")
        self.asymmetry = asymmetry
        self.tolerance = tolerance


class IndefiniteMatrixError(DarcyMGError):
    def __init__(self, message: str, pivot_index: Optional[int] = None) -> None:
        super().__init__(message if pivot_index is None else f"{message} (pivot {pivot_index})")
        self.pivot_index = pivot_index


class NullspaceError(DarcyMGError):
    def __init__(self, residual: float) -> None:
        super().__init__(f"kernel is not spanned by the given nullspace vector, relative residual {residual:.3e}")
        self.residual = residual


class GridDivisibilityError(DarcyMGError, ValueError):
    def __init__(self, axis: str, cells: int, divisor: int) -> None:
        super().__init__(f"axis {axis}: {cells} cells not divisible by {divisor}")
        self.axis = axis
        self.cells = cells
        self.divisor = divisor


class FieldError(DarcyMGError, ValueError):
    pass


class ConvergenceError(DarcyMGError):
    def __init__(self, report: SolveReport, context: str = "") -> None:
        prefix = f"{context}: " if context else ""
        super().__init__(
            f"{prefix}solver stopped with status {report.status.name} after {report.iterations} iterations, "
            f"relative residual {report.final_residual:.3e}"
        )
        self.report = report


class SmootherContractError(DarcyMGError):
    def __init__(self, lambda_min: float, level: str) -> None:
        super().__init__(f"{level} smoother violates M + M^T - A > 0: lambda_min = {lambda_min:.3e}")
        self.lambda_min = lambda_min
        self.level = level


class SaturationBoundsError(DarcyMGError):
    def __init__(self, min_value: float, max_value: float, step: int) -> None:
        super().__init__(f"saturation left its bounds at substep {step}: range [{min_value:.12f}, {max_value:.12f}]")
        self.min_value = min_value
        self.max_value = max_value
        self.step = step


class ConfigError(DarcyMGError, ValueError):
    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"invalid configuration `{field}`: {message}")
        self.field = field


class NormalizationError(DarcyMGError):
    def __init__(self, deviation: float, tolerance: float) -> None:
        super().__init__(f"coarse basis is not orthonormal: max |W^T S W - I| = {deviation:.3e} > {tolerance:.3e}")
        self.deviation = deviation
        self.tolerance = tolerance
