import logging
from pathlib import Path
from typing import Iterator

import pytest
import yaml

from darcymg.config import (
    EXPERIMENTS_PATH,
    Config,
    CoarseStrategy,
    ExperimentConfig,
    FieldGenerator,
    ProblemKind,
    deep_merge,
    parse_override,
    save_manifest,
    validate_experiment,
)
from darcymg.errors import ConfigError
from darcymg.multigrid import PreconditionerMode, SelectionStrategy


def test_default_config(default_config: Config) -> None:
    experiment = default_config.experiment()

    assert experiment.problem.kind == ProblemKind.SINGLE_PHASE
    assert experiment.grid.cells == [32, 32, 32]
    assert experiment.coarse.strategy == CoarseStrategy.FIXED
    assert experiment.solver.method == "cg"
    assert experiment.two_phase.fluid.oil_viscosity == 3.0
    assert default_config.get("grid.cc_blocks") == [2, 2, 2]
    assert default_config.get("grid.missing", "fallback") == "fallback"


def test_overrides_are_parsed_as_yaml() -> None:
    config = Config(overrides=["grid.cells=[8, 8]", "solver.rtol=1.0e-8", "problem.mode=exact", "name=custom run"])
    experiment = config.experiment()

    assert experiment.grid.cells == [8, 8]
    assert experiment.solver.rtol == 1e-8
    assert experiment.problem.mode == PreconditionerMode.EXACT
    assert experiment.name == "custom run"


@pytest.mark.parametrize(
    "override,field",
    [
        ("solver.rtol=2.0", "solver.rtol"),
        ("grid.cells=[8]", "grid.cells"),
        ("grid.bogus=1", "grid.bogus"),
        ("coarse.l_c=0", "coarse.l_c"),
        ("sweep={seed: []}", "sweep"),
    ],
)
def test_invalid_values_name_their_key(override: str, field: str) -> None:
    with pytest.raises(ConfigError) as exc_info:
        Config(overrides=[override]).experiment()
    assert exc_info.value.field == field


def test_parse_override() -> None:
    assert parse_override("coarse.b_c = 0.5") == ("coarse.b_c", 0.5)
    assert parse_override("problem.boundary.dirichlet={xmin: 1.0}") == ("problem.boundary.dirichlet", {"xmin": 1.0})
    with pytest.raises(ConfigError):
        parse_override("no-separator")
    with pytest.raises(ConfigError):
        parse_override("=1")


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        Config(config_path=tmp_path / "absent.yaml")


def test_experiment_file_is_merged(tmp_path: Path) -> None:
    path = tmp_path / "small.yaml"
    values = {"grid": {"cells": [8, 8], "cc_blocks": [2, 2]}, "field": {"generator": "fractured"}}
    path.write_text(yaml.safe_dump(values))

    experiment = Config(experiment_path=path).experiment()

    assert experiment.grid.cells == [8, 8]
    assert experiment.grid.subdivision == 2
    assert experiment.field.generator == FieldGenerator.FRACTURED
    assert experiment.field.fracture_count == 8


def test_references_are_resolved(tmp_path: Path) -> None:
    path = tmp_path / "base.yaml"
    path.write_text(yaml.safe_dump({"seed": 4, "name": "run", "field": {"fracture_count": "${seed}"}}))
    assert Config(config_path=path).get("field.fracture_count") == 4


def test_deep_merge_leaves_inputs_untouched() -> None:
    base = {"a": {"b": 1, "c": 2}, "d": [1]}
    merged = deep_merge(base, {"a": {"b": 5}, "d": [2]})
    assert merged == {"a": {"b": 5, "c": 2}, "d": [2]}
    assert base == {"a": {"b": 1, "c": 2}, "d": [1]}


def test_manifest_reloads_as_base_config(tmp_path: Path) -> None:
    experiment = Config(overrides=["grid.cells=[8, 8]", "grid.cc_blocks=[2, 2]", "seed=17"]).experiment()

    path = save_manifest(tmp_path / "manifest.yaml", experiment, {"command": "solve"})

    stored = yaml.safe_load(path.read_text())
    assert stored["manifest"]["seed"] == 17
    assert stored["manifest"]["command"] == "solve"
    assert Config(config_path=path).experiment() == experiment


def test_preconditioner_settings_follow_strategy() -> None:
    experiment = Config(overrides=["coarse.strategy=threshold", "coarse.b_c=0.25", "smoother.sweeps=2"]).experiment()
    settings = experiment.preconditioner_settings()
    assert settings.coarse_rule.strategy == SelectionStrategy.THRESHOLD
    assert settings.coarse_rule.threshold == 0.25
    assert settings.sweeps == 2


def test_with_overrides_validates() -> None:
    experiment = ExperimentConfig()
    assert experiment.with_overrides({"coarse.l_cc": 6}).coarse.l_cc == 6
    with pytest.raises(ConfigError):
        experiment.with_overrides({"smoother.damping": 0.0})


@pytest.mark.parametrize("path", sorted(EXPERIMENTS_PATH.glob("*.yaml")), ids=lambda p: p.stem)
def test_experiment_files_validate(path: Path) -> None:
    experiment = Config(experiment_path=path).experiment()
    assert experiment.name == path.stem
    for key, values in experiment.sweep.items():
        for value in values:
            experiment.with_overrides({key: value})
    experiment.grid.build()


def test_validate_experiment_root_errors() -> None:
    with pytest.raises(ConfigError) as exc_info:
        validate_experiment({"unknown_section": {}})
    assert exc_info.value.field == "unknown_section"


@pytest.fixture
def restore_root_logger() -> Iterator[logging.Logger]:
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield root
    root.handlers[:] = handlers
    root.setLevel(level)


def test_configure_logging_levels(monkeypatch: pytest.MonkeyPatch, restore_root_logger: logging.Logger) -> None:
    monkeypatch.setenv("LOG_LEVEL", "warning  # quiet runs")
    assert Config.configure_logging() == "WARNING"
    assert logging.getLogger("darcymg.multigrid.coarse").getEffectiveLevel() == logging.WARNING

    monkeypatch.setenv("LOG_LEVEL", "chatty")
    assert Config.configure_logging() == "INFO"

    assert Config.configure_logging("debug") == "DEBUG"
    assert restore_root_logger.level == logging.DEBUG
