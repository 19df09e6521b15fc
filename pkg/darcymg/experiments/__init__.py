from .runner import (
    ExperimentRunner,
    PointResult,
    ProblemInstance,
    build_instance,
    compare_exact_inexact,
    solve_instance,
    solve_point,
    sweep_points,
    theory_point,
)

__all__ = [
    "ExperimentRunner",
    "PointResult",
    "ProblemInstance",
    "build_instance",
    "compare_exact_inexact",
    "solve_instance",
    "solve_point",
    "sweep_points",
    "theory_point",
]
