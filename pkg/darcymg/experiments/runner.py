from __future__ import annotations

import csv
import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.io
from pydantic import BaseModel, Field

from darcymg.config import CoarseStrategy, ExperimentConfig, PreconditionerKind, ProblemKind, save_manifest
from darcymg.core.field import PermeabilityField, normalize, save_raw
from darcymg.core.grid import GridHierarchy
from darcymg.core.tpfa import PressureSystem, assemble, check_conservation, default_sources, recover_velocity
from darcymg.errors import DarcyMGError
from darcymg.multigrid.coarse import write_eigenvalues
from darcymg.multigrid.preconditioner import PreconditionerMode, ThreeGridPreconditioner
from darcymg.multigrid.theory import verify_theory
from darcymg.solvers.base import IdentityPreconditioner, Preconditioner, SolveReport
from darcymg.solvers.krylov import KrylovSolverFactory, write_residual_history
from darcymg.solvers.spectrum import estimate_condition
from darcymg.twophase.impes import SaturationState, run_simulation
from darcymg.twophase.output import write_snapshot, write_summary

logger = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "status",
    "iterations",
    "final_relres",
    "n",
    "n_c",
    "n_cc",
    "conservation_error",
    "lambda_min",
    "lambda_max",
    "condition",
    "setup_seconds",
    "solve_seconds",
    "error",
)


@dataclass(frozen=True)
class ProblemInstance:
    grid: GridHierarchy
    field: PermeabilityField
    system: PressureSystem


class PointResult(BaseModel):
    """Outcome of one sweep point; `params` holds the swept values."""

    index: int
    params: Dict[str, Any] = Field(default_factory=dict)
    metrics: Dict[str, Any] = Field(default_factory=dict)
    failed: bool = False

    def row(self, columns: Sequence[str]) -> Dict[str, Any]:
        values: Dict[str, Any] = {"point": self.index, **self.params}
        for column in columns:
            values[column] = self.metrics.get(column, "")
        return values


def build_instance(config: ExperimentConfig) -> ProblemInstance:
    grid = config.grid.build()
    field = config.field.build(grid, config.seed)
    sources = default_sources(grid, config.problem.source_strength)
    system = assemble(normalize(field, grid), grid, boundary=config.problem.boundary, sources=sources)
    return ProblemInstance(grid, field, system)


def sweep_points(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """Cartesian product of the sweep lists, last key varying fastest; one empty point without sweeps."""
    if not config.sweep:
        return [{}]
    keys = list(config.sweep)
    return [dict(zip(keys, values)) for values in itertools.product(*(config.sweep[key] for key in keys))]


def _relative_conservation(system: PressureSystem, x: np.ndarray) -> float:
    error = check_conservation(recover_velocity(system, x), system.cell_sources(x), system.grid)
    scale = max(float(np.max(np.abs(system.rhs), initial=0.0)), np.finfo(float).tiny)
    return error / scale


def solve_instance(
    config: ExperimentConfig,
    instance: ProblemInstance,
    preconditioner: Optional[Preconditioner] = None,
) -> Tuple[np.ndarray, SolveReport, Preconditioner]:
    system = instance.system
    if preconditioner is None:
        if config.problem.preconditioner == PreconditionerKind.NONE:
            preconditioner = IdentityPreconditioner(system.num_cells)
        else:
            preconditioner = ThreeGridPreconditioner.build(system, instance.grid, config.preconditioner_settings())
    x, report = KrylovSolverFactory.solve(
        system.matrix, preconditioner, system.rhs, config.solver, nullspace=system.nullspace
    )
    if isinstance(preconditioner, ThreeGridPreconditioner):
        report.setup_seconds = preconditioner.setup_seconds
    return x, report, preconditioner


def _dimensions(preconditioner: Preconditioner) -> Dict[str, Any]:
    if isinstance(preconditioner, ThreeGridPreconditioner):
        return {"n_c": preconditioner.space_c.dimension, "n_cc": preconditioner.space_cc.dimension}
    return {}


def _dump(
    config: ExperimentConfig,
    instance: ProblemInstance,
    x: np.ndarray,
    report: SolveReport,
    preconditioner: Preconditioner,
    output_dir: Optional[Path],
    index: int,
) -> None:
    if output_dir is None:
        return
    out = config.output
    if out.residual_history:
        write_residual_history(report, output_dir / f"point_{index:03d}_residuals.csv")
    if out.eigenvalues and isinstance(preconditioner, ThreeGridPreconditioner):
        write_eigenvalues(preconditioner.space_c, output_dir / f"point_{index:03d}_eigenvalues_c.csv")
        write_eigenvalues(preconditioner.space_cc, output_dir / f"point_{index:03d}_eigenvalues_cc.csv")
    if out.matrix:
        scipy.io.mmwrite(str(output_dir / f"point_{index:03d}_matrix.mtx"), instance.system.matrix.csr)
    if out.field:
        save_raw(output_dir / f"point_{index:03d}_field.bin", instance.field)
    if out.solution:
        np.savetxt(output_dir / f"point_{index:03d}_pressure.txt", x)


def solve_point(config: ExperimentConfig, index: int = 0, output_dir: Optional[Path] = None) -> PointResult:
    """Assemble, precondition and solve one single-phase instance."""
    instance = build_instance(config)
    x, report, preconditioner = solve_instance(config, instance)
    metrics: Dict[str, Any] = {
        "status": report.status.value,
        "iterations": report.iterations,
        "final_relres": report.final_residual,
        "n": instance.system.num_cells,
        "conservation_error": _relative_conservation(instance.system, x),
        "setup_seconds": report.setup_seconds,
        "solve_seconds": report.solve_seconds,
        **_dimensions(preconditioner),
    }
    if config.problem.spectrum is not None:
        estimate = estimate_condition(
            instance.system.matrix, preconditioner, config.problem.spectrum, instance.system.nullspace, config.seed
        )
        metrics.update(lambda_min=estimate.lambda_min, lambda_max=estimate.lambda_max, condition=estimate.condition)
    _dump(config, instance, x, report, preconditioner, output_dir, index)
    if not report.converged:
        logger.warning(f"Point {index} did not converge: {report.status.value} after {report.iterations} iterations")
    return PointResult(index=index, metrics=metrics, failed=not report.converged)


THEORY_COLUMNS = (
    "c_star",
    "c_lambda",
    "c_c_lambda",
    "lambda_max_coarse_smoother",
    "two_grid_condition",
    "three_grid_condition",
    "coarse_two_grid_lambda_min",
    "coarse_two_grid_lambda_max",
    "xz_value",
    "all_hold",
)


def theory_point(config: ExperimentConfig, index: int = 0, output_dir: Optional[Path] = None) -> PointResult:
    instance = build_instance(config)
    report = verify_theory(instance.system, instance.grid, config.preconditioner_settings())
    metrics: Dict[str, Any] = {
        "c_star": report.c_star,
        "c_lambda": report.c_lambda,
        "c_c_lambda": report.c_c_lambda,
        "lambda_max_coarse_smoother": report.lambda_max_coarse_smoother,
        "two_grid_condition": report.two_grid.condition,
        "three_grid_condition": report.three_grid.condition,
        "coarse_two_grid_lambda_min": report.coarse_two_grid.lambda_min,
        "coarse_two_grid_lambda_max": report.coarse_two_grid.lambda_max,
        "xz_value": report.xz_value,
        "all_hold": report.all_hold,
    }
    for check in report.checks:
        metrics[f"{check.name}_slack"] = check.slack
    return PointResult(index=index, metrics=metrics, failed=not report.all_hold)


COMPARE_COLUMNS = (
    "mode",
    "iterations",
    "status",
    "n_c",
    "n_cc",
    "expected_n_c",
    "expected_n_cc",
    "setup_seconds",
    "solve_seconds",
)


def compare_exact_inexact(config: ExperimentConfig, index: int = 0) -> List[PointResult]:
    """Solve one instance with the exact two-grid and the three-grid preconditioner on shared spaces.

    The expected dimensions are `blocks * L` for the fixed strategy and blank otherwise.
    """
    instance = build_instance(config)
    inexact = ThreeGridPreconditioner.build(instance.system, instance.grid, config.preconditioner_settings())
    exact = ThreeGridPreconditioner(
        instance.system,
        inexact.space_c,
        inexact.space_cc,
        inexact.smoother,
        inexact.coarse_smoother,
        PreconditionerMode.EXACT,
    )
    expected: Dict[str, Any] = {}
    if config.coarse.strategy == CoarseStrategy.FIXED:
        expected = {
            "expected_n_c": instance.grid.num_coarse_blocks * config.coarse.l_c,
            "expected_n_cc": instance.grid.num_cc_blocks * config.coarse.l_cc,
        }
    results: List[PointResult] = []
    iterations: Dict[PreconditionerMode, int] = {}
    for preconditioner in (exact, inexact):
        _, report, _ = solve_instance(config, instance, preconditioner)
        report.setup_seconds = inexact.setup_seconds
        iterations[preconditioner.mode] = report.iterations
        metrics = {
            "mode": preconditioner.mode.value,
            "iterations": report.iterations,
            "status": report.status.value,
            "setup_seconds": report.setup_seconds,
            "solve_seconds": report.solve_seconds,
            **_dimensions(preconditioner),
            **expected,
        }
        results.append(PointResult(index=index, metrics=metrics, failed=not report.converged))
    if iterations[PreconditionerMode.EXACT] > iterations[PreconditionerMode.INEXACT]:
        logger.warning(
            f"Point {index}: exact mode took {iterations[PreconditionerMode.EXACT]} iterations, "
            f"more than the inexact mode's {iterations[PreconditionerMode.INEXACT]}"
        )
    return results


PointRunner = Callable[[ExperimentConfig, int, Optional[Path]], List[PointResult]]


def _guarded(
    runner: PointRunner, config: ExperimentConfig, index: int, output_dir: Optional[Path]
) -> List[PointResult]:
    try:
        return runner(config, index, output_dir)
    except DarcyMGError as e:
        logger.error(f"Point {index} failed: {e}")
        return [PointResult(index=index, metrics={"status": "failed", "error": str(e)}, failed=True)]


class ExperimentRunner:
    """Runs every sweep point of a config and writes `results.csv` plus `manifest.yaml`."""

    def __init__(self, config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None) -> None:
        self._config = config
        self._output_dir = Path(output_dir if output_dir is not None else config.output.directory)

    @property
    def output_dir(self) -> Path:
        return self._output_dir

    def _run_points(self, runner: PointRunner) -> List[PointResult]:
        points = sweep_points(self._config)
        configs = [self._config.with_overrides(point) for point in points]
        self._output_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Running {len(points)} point(s) of '{self._config.name}' on {self._config.workers} worker(s)")

        def run_one(index: int) -> List[PointResult]:
            start = time.perf_counter()
            results = _guarded(runner, configs[index], index, self._output_dir)
            for result in results:
                result.params = points[index]
            logger.info(f"Point {index + 1}/{len(points)} {points[index]} done in {time.perf_counter() - start:.2f}s")
            return results

        if self._config.workers > 1 and len(points) > 1:
            with ThreadPoolExecutor(max_workers=self._config.workers) as executor:
                batches = list(executor.map(run_one, range(len(points))))
        else:
            batches = [run_one(index) for index in range(len(points))]
        return [result for batch in batches for result in batch]

    def _write(self, results: Sequence[PointResult], columns: Sequence[str], filename: str = "results.csv") -> Path:
        extra: List[str] = []
        for result in results:
            extra.extend(key for key in result.metrics if key not in columns and key not in extra)
        all_columns = list(columns) + extra
        param_keys = list(self._config.sweep)
        path = self._output_dir / filename
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=["point", *param_keys, *all_columns])
            writer.writeheader()
            for result in results:
                writer.writerow(result.row(all_columns))
        logger.info(f"Wrote {len(results)} rows to {path}")
        return path

    def _finish(self, results: Sequence[PointResult], command: str) -> int:
        failed = sum(result.failed for result in results)
        save_manifest(
            self._output_dir / "manifest.yaml",
            self._config,
            {"command": command, "points": len(results), "failed": failed},
        )
        return 0 if failed == 0 else 3

    def solve(self) -> int:
        results = self._run_points(lambda c, i, o: [solve_point(c, i, o)])
        self._write(results, RESULT_COLUMNS)
        return self._finish(results, "solve")

    def verify_theory(self) -> int:
        results = self._run_points(lambda c, i, o: [theory_point(c, i, o)])
        self._write(results, THEORY_COLUMNS)
        return self._finish(results, "verify-theory")

    def compare(self) -> int:
        results = self._run_points(lambda c, i, o: compare_exact_inexact(c, i))
        self._write(results, COMPARE_COLUMNS)
        return self._finish(results, "compare")

    def simulate(self) -> int:
        config = self._config
        instance_grid = config.grid.build()
        field = config.field.build(instance_grid, config.seed)
        self._output_dir.mkdir(parents=True, exist_ok=True)

        def snapshot(step: int, state: SaturationState, pressure: np.ndarray) -> None:
            if config.output.snapshots:
                write_snapshot(self._output_dir, step, instance_grid, pressure, state.saturation)

        try:
            result = run_simulation(
                instance_grid,
                field,
                config.two_phase,
                config.solver,
                config.preconditioner_settings(),
                on_snapshot=snapshot,
            )
        except DarcyMGError as e:
            logger.error(f"Simulation failed: {e}")
            save_manifest(self._output_dir / "manifest.yaml", config, {"command": "simulate", "error": str(e)})
            return 3
        write_summary(self._output_dir / "summary.csv", result.records)
        save_manifest(
            self._output_dir / "manifest.yaml",
            config,
            {"command": "simulate", "steps": len(result.records), "final_time_days": result.state.time},
        )
        return 0

    def run(self) -> int:
        """Dispatch on `problem.kind`."""
        kind = self._config.problem.kind
        if kind == ProblemKind.TWO_PHASE:
            return self.simulate()
        if kind == ProblemKind.VERIFY_THEORY:
            return self.verify_theory()
        return self.solve()
