import csv
from pathlib import Path
from typing import Dict, List

import pytest
import yaml

from darcymg.config import ExperimentConfig
from darcymg.experiments import (
    ExperimentRunner,
    build_instance,
    compare_exact_inexact,
    solve_point,
    sweep_points,
    theory_point,
)


def _rows(path: Path) -> List[Dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_sweep_points_last_key_fastest() -> None:
    config = ExperimentConfig(sweep={"coarse.l_c": [1, 2], "seed": [3, 4]})
    assert sweep_points(config) == [
        {"coarse.l_c": 1, "seed": 3},
        {"coarse.l_c": 1, "seed": 4},
        {"coarse.l_c": 2, "seed": 3},
        {"coarse.l_c": 2, "seed": 4},
    ]
    assert sweep_points(ExperimentConfig()) == [{}]


def test_build_instance_is_seeded(tiny_experiment: ExperimentConfig) -> None:
    first = build_instance(tiny_experiment)
    second = build_instance(tiny_experiment)
    assert first.system.num_cells == 64
    assert not first.system.is_singular
    assert (first.field.permeability == second.field.permeability).all()


def test_solve_point_metrics(tiny_experiment: ExperimentConfig) -> None:
    config = tiny_experiment.with_overrides({"problem.spectrum": "dense"})

    result = solve_point(config)

    assert not result.failed
    assert result.metrics["status"] == "converged"
    assert result.metrics["n"] == 64
    assert result.metrics["n_c"] == 16 * 2
    assert result.metrics["n_cc"] == 4 * 3
    assert result.metrics["conservation_error"] < 1e-6
    assert result.metrics["condition"] >= 1.0


def test_solve_writes_results_and_manifest(tiny_experiment: ExperimentConfig) -> None:
    config = tiny_experiment.with_overrides({"sweep": {"seed": [0, 1, 2]}, "workers": 2})
    runner = ExperimentRunner(config)

    assert runner.solve() == 0

    rows = _rows(runner.output_dir / "results.csv")
    assert [row["point"] for row in rows] == ["0", "1", "2"]
    assert [row["seed"] for row in rows] == ["0", "1", "2"]
    assert all(row["status"] == "converged" for row in rows)
    manifest = yaml.safe_load((runner.output_dir / "manifest.yaml").read_text())
    assert manifest["manifest"]["points"] == 3
    assert manifest["manifest"]["failed"] == 0


def test_unconverged_point_exits_with_solver_status(tiny_experiment: ExperimentConfig) -> None:
    config = tiny_experiment.with_overrides({"problem.preconditioner": "none", "solver.max_iterations": 1})
    runner = ExperimentRunner(config)

    assert runner.solve() == 3
    assert _rows(runner.output_dir / "results.csv")[0]["status"] == "max_iterations"


def test_failing_point_is_recorded(tiny_experiment: ExperimentConfig) -> None:
    # 8 cells are not divisible into 3 coarse-coarse blocks
    config = tiny_experiment.with_overrides({"sweep": {"grid.cc_blocks": [[2, 2], [3, 3]]}})
    runner = ExperimentRunner(config)

    assert runner.solve() == 3

    rows = _rows(runner.output_dir / "results.csv")
    assert rows[0]["status"] == "converged"
    assert rows[1]["status"] == "failed"
    assert "not divisible" in rows[1]["error"]


def test_output_dumps(tiny_experiment: ExperimentConfig) -> None:
    config = tiny_experiment.with_overrides(
        {
            "output.residual_history": True,
            "output.eigenvalues": True,
            "output.matrix": True,
            "output.field": True,
            "output.solution": True,
        }
    )
    ExperimentRunner(config).solve()

    names = {path.name for path in Path(config.output.directory).iterdir()}
    assert {
        "point_000_residuals.csv",
        "point_000_eigenvalues_c.csv",
        "point_000_eigenvalues_cc.csv",
        "point_000_matrix.mtx",
        "point_000_field.bin",
        "point_000_pressure.txt",
    } <= names


def test_theory_point(tiny_experiment: ExperimentConfig) -> None:
    result = theory_point(tiny_experiment)
    assert result.metrics["all_hold"]
    assert "xz_identity_slack" in result.metrics
    assert result.metrics["c_star"] >= 1.0 - 1e-10


def test_compare_reports_both_modes(tiny_experiment: ExperimentConfig) -> None:
    results = compare_exact_inexact(tiny_experiment)

    assert [result.metrics["mode"] for result in results] == ["exact", "inexact"]
    for result in results:
        assert result.metrics["n_c"] == result.metrics["expected_n_c"]
        assert result.metrics["n_cc"] == result.metrics["expected_n_cc"]
        assert result.metrics["status"] == "converged"


def test_simulate_writes_summary_and_snapshots(tiny_experiment: ExperimentConfig) -> None:
    config = tiny_experiment.with_overrides(
        {
            "problem.kind": "two-phase",
            "grid.lengths": [160.0, 80.0],
            "field.generator": "uniform",
            "field.value": 100.0,
            "field.porosity": 0.2,
            "two_phase.max_outer_steps": 2,
            "two_phase.substeps": 3,
            "two_phase.snapshot_times": [0.0],
        }
    )
    runner = ExperimentRunner(config)

    assert runner.run() == 0

    assert len(_rows(runner.output_dir / "summary.csv")) == 2
    assert (runner.output_dir / "snapshot_00000.vtk").is_file()
    manifest = yaml.safe_load((runner.output_dir / "manifest.yaml").read_text())
    assert manifest["manifest"]["steps"] == 2


@pytest.mark.parametrize("kind,column", [("verify-theory", "c_star"), ("single-phase", "iterations")])
def test_run_dispatches_on_kind(kind: str, column: str, tiny_experiment: ExperimentConfig) -> None:
    runner = ExperimentRunner(tiny_experiment.with_overrides({"problem.kind": kind}))
    assert runner.run() == 0
    assert column in _rows(runner.output_dir / "results.csv")[0]
