from __future__ import annotations

import copy
import logging
import os
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from darcymg import BASE_PATH
from darcymg.core.field import (
    FractureSlab,
    PermeabilityField,
    RawLayout,
    gen_fractured,
    gen_log_uniform,
    gen_periodic_cell,
    gen_spe10_like,
    load_raw,
    random_fracture_slabs,
)
from darcymg.core.grid import GridHierarchy
from darcymg.core.tpfa import BoundaryCondition
from darcymg.errors import ConfigError
from darcymg.multigrid.coarse import DEFAULT_CANDIDATE_CAP, SelectionRule
from darcymg.multigrid.preconditioner import PreconditionerMode, PreconditionerSettings
from darcymg.solvers.base import SolverConfig
from darcymg.solvers.spectrum import SpectrumMode
from darcymg.twophase.impes import TwoPhaseSettings

logger = logging.getLogger(__name__)

CONFIG_PATH = BASE_PATH / "config"
EXPERIMENTS_PATH = CONFIG_PATH / "experiments"
MANIFEST_KEY = "manifest"
DEFAULT_LOG_FORMAT = "%(asctime)s - %(threadName)s - %(name)s:%(lineno)d - %(levelname)s - %(message)s"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSettings(_Section):
    cells: List[int] = Field(default_factory=lambda: [32, 32, 32])
    lengths: Optional[List[float]] = None
    cc_blocks: List[int] = Field(default_factory=lambda: [2, 2, 2])
    subdivision: int = Field(default=2, ge=1)

    @field_validator("cells")
    @classmethod
    def _dimension(cls, value: List[int]) -> List[int]:
        if len(value) not in (2, 3):
            raise ValueError(f"grid must be 2D or 3D, got {len(value)} axes")
        return value

    def build(self) -> GridHierarchy:
        lengths = self.lengths if self.lengths is not None else [float(n) for n in self.cells]
        return GridHierarchy(self.cells, lengths, self.cc_blocks, self.subdivision)


class FieldGenerator(str, Enum):
    UNIFORM = "uniform"
    PERIODIC_CELL = "periodic_cell"
    FRACTURED = "fractured"
    LOG_UNIFORM = "log_uniform"
    SPE10_LIKE = "spe10_like"
    RAW = "raw"


class SlabSettings(_Section):
    lower: List[int]
    upper: List[int]


class FieldSettings(_Section):
    generator: FieldGenerator = FieldGenerator.UNIFORM
    value: float = Field(default=1.0, gt=0.0)
    contrast_exponent: float = Field(default=0.0, ge=0.0)
    porosity: float = Field(default=1.0, gt=0.0, le=1.0)
    anisotropic: bool = False
    slabs: List[SlabSettings] = Field(default_factory=list)
    fracture_count: int = Field(default=8, ge=0)
    log_range: Tuple[float, float] = (-3.0, 5.0)
    anisotropy_log_max: float = 4.0
    correlation_cells: float = Field(default=2.0, ge=0.0)
    path: Optional[str] = None
    layout: RawLayout = RawLayout.INTERLEAVED
    with_porosity: Optional[bool] = None

    def build(self, grid: GridHierarchy, seed: int) -> PermeabilityField:
        if self.generator == FieldGenerator.UNIFORM:
            return PermeabilityField.uniform(grid, self.value, self.porosity)
        if self.generator == FieldGenerator.PERIODIC_CELL:
            return gen_periodic_cell(grid, 10.0**self.contrast_exponent, porosity=self.porosity)
        if self.generator == FieldGenerator.FRACTURED:
            if self.slabs:
                slabs = [FractureSlab(tuple(s.lower), tuple(s.upper)) for s in self.slabs]
            else:
                slabs = random_fracture_slabs(grid, seed, self.fracture_count)
            return gen_fractured(grid, slabs, int(self.contrast_exponent), self.porosity)
        if self.generator == FieldGenerator.LOG_UNIFORM:
            return gen_log_uniform(grid, seed, self.contrast_exponent, self.anisotropic, self.porosity)
        if self.generator == FieldGenerator.SPE10_LIKE:
            return gen_spe10_like(grid, seed, self.log_range, self.anisotropy_log_max, self.correlation_cells)
        if self.path is None:
            raise ConfigError("field.path", "the raw generator needs a file path")
        if not Path(self.path).is_file():
            raise ConfigError("field.path", f"file not found: {self.path}")
        return load_raw(self.path, grid, self.layout, self.with_porosity)


class CoarseStrategy(str, Enum):
    FIXED = "fixed"
    THRESHOLD = "threshold"
    FULL = "full"


class CoarseSettings(_Section):
    """Eigenvector selection for both levels: counts `(l_c, l_cc)` or thresholds `(b_c, b_cc)`."""

    strategy: CoarseStrategy = CoarseStrategy.FIXED
    l_c: int = Field(default=4, ge=1)
    l_cc: int = Field(default=4, ge=1)
    b_c: float = Field(default=1e12, gt=0.0)
    b_cc: float = Field(default=1e12, gt=0.0)
    candidate_cap: int = Field(default=DEFAULT_CANDIDATE_CAP, ge=1)
    include_well_terms: bool = True

    def rules(self) -> Tuple[SelectionRule, SelectionRule]:
        if self.strategy == CoarseStrategy.FULL:
            return SelectionRule.full(), SelectionRule.full()
        if self.strategy == CoarseStrategy.THRESHOLD:
            return (
                SelectionRule.by_threshold(self.b_c, self.candidate_cap),
                SelectionRule.by_threshold(self.b_cc, self.candidate_cap),
            )
        return SelectionRule.fixed(self.l_c), SelectionRule.fixed(self.l_cc)


class SmootherSettings(_Section):
    sweeps: int = Field(default=1, ge=1)
    coarse_sweeps: int = Field(default=1, ge=1)
    damping: float = Field(default=1.0, gt=0.0, le=1.0)


class ProblemKind(str, Enum):
    SINGLE_PHASE = "single-phase"
    TWO_PHASE = "two-phase"
    VERIFY_THEORY = "verify-theory"


class PreconditionerKind(str, Enum):
    THREE_GRID = "three_grid"
    NONE = "none"


class ProblemSettings(_Section):
    kind: ProblemKind = ProblemKind.SINGLE_PHASE
    boundary: BoundaryCondition = Field(default_factory=BoundaryCondition)
    source_strength: float = 1.0
    preconditioner: PreconditionerKind = PreconditionerKind.THREE_GRID
    mode: PreconditionerMode = PreconditionerMode.INEXACT
    spectrum: Optional[SpectrumMode] = None


class OutputSettings(_Section):
    directory: str = "results"
    residual_history: bool = False
    eigenvalues: bool = False
    matrix: bool = False
    field: bool = False
    solution: bool = False
    snapshots: bool = True


class ExperimentConfig(_Section):
    """Fully resolved configuration of one run or sweep."""

    name: str = "default"
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    problem: ProblemSettings = Field(default_factory=ProblemSettings)
    grid: GridSettings = Field(default_factory=GridSettings)
    field: FieldSettings = Field(default_factory=FieldSettings)
    coarse: CoarseSettings = Field(default_factory=CoarseSettings)
    smoother: SmootherSettings = Field(default_factory=SmootherSettings)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    two_phase: TwoPhaseSettings = Field(default_factory=TwoPhaseSettings)
    output: OutputSettings = Field(default_factory=OutputSettings)
    sweep: Dict[str, List[Any]] = Field(default_factory=dict)

    @field_validator("sweep")
    @classmethod
    def _non_empty_sweeps(cls, value: Dict[str, List[Any]]) -> Dict[str, List[Any]]:
        empty = [key for key, values in value.items() if not values]
        if empty:
            raise ValueError(f"sweep lists must not be empty: {empty}")
        return value

    def preconditioner_settings(self) -> PreconditionerSettings:
        rule_c, rule_cc = self.coarse.rules()
        return PreconditionerSettings(
            coarse_rule=rule_c,
            coarse_coarse_rule=rule_cc,
            sweeps=self.smoother.sweeps,
            coarse_sweeps=self.smoother.coarse_sweeps,
            damping=self.smoother.damping,
            mode=self.problem.mode,
            include_well_terms=self.coarse.include_well_terms,
            workers=self.workers,
        )

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    def with_overrides(self, overrides: Dict[str, Any]) -> ExperimentConfig:
        values = self.to_dict()
        for key, value in overrides.items():
            set_path(values, key, value)
        return validate_experiment(values)


def validate_experiment(values: Dict[str, Any]) -> ExperimentConfig:
    """Validate a raw config mapping, reporting the first offending key as a dot path."""
    try:
        return ExperimentConfig.model_validate(values)
    except ValidationError as e:
        error = e.errors()[0]
        path = ".".join(str(part) for part in error["loc"]) or "<root>"
        raise ConfigError(path, error["msg"]) from e


def set_path(values: Dict[str, Any], key_path: str, value: Any) -> None:
    keys = key_path.split(".")
    target = values
    for key in keys[:-1]:
        child = target.get(key)
        if not isinstance(child, dict):
            child = {}
            target[key] = child
        target = child
    target[keys[-1]] = value


def deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text: str) -> Tuple[str, Any]:
    """Split `key=value`; the value is read as a YAML scalar or flow collection."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(text, "overrides must look like key=value")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(key.strip(), f"cannot parse value '{raw}': {e}") from e
    return key.strip(), value


class Config:
    @staticmethod
    def configure_logging(level: Optional[str] = None) -> str:
        """Configure the root handler that every `darcymg.*` module logger propagates to.

        `level` (the CLI `--log-level`) wins over `LOG_LEVEL`; an unknown name falls back to INFO. The
        default format carries the thread name of the sweep and block eigenproblem workers. Returns the
        level in effect.
        """
        requested = level if level is not None else os.getenv("LOG_LEVEL", "INFO")
        log_level = requested.split("#")[0].strip().upper()
        if log_level not in logging.getLevelNamesMapping():
            log_level = "INFO"
        log_format = os.getenv("LOG_FORMAT", DEFAULT_LOG_FORMAT)

        logging.basicConfig(level=getattr(logging, log_level), format=log_format, force=True)
        logger.debug(f"darcymg logging at {log_level}")
        return log_level

    def __init__(
        self,
        *,
        config_path: Optional[Union[str, Path]] = None,
        experiment_path: Optional[Union[str, Path]] = None,
        overrides: Optional[Sequence[str]] = None,
    ) -> None:
        """Load the defaults, merge an experiment file on top and apply `key=value` overrides.

        Args:
            config_path: Base configuration, `config/default.yaml` when omitted. A run manifest is a
                valid base configuration.
            experiment_path: Optional file whose keys override the base configuration.
            overrides: `key=value` strings applied last.
        """
        self._load_config(config_path, experiment_path)
        for text in overrides or []:
            key, value = parse_override(text)
            self.set(key, value)

    @staticmethod
    def _read_yaml(path: Union[str, Path]) -> Dict[str, Any]:
        file_path = Path(path)
        if not file_path.is_file():
            raise ConfigError("config", f"file not found: {file_path}")
        with open(file_path, "r", encoding="utf-8") as f:
            values = yaml.safe_load(f) or {}
        if not isinstance(values, dict):
            raise ConfigError("config", f"{file_path} must hold a mapping at the top level")
        return values

    def _resolve_config_reference(self, value: Any) -> Any:
        """Resolve references to other parts of the config using ${...} syntax"""
        if isinstance(value, str) and value.startswith("${") and value.endswith("}"):
            ref_path = value[2:-1]
            try:
                keys = ref_path.split(".")
                result = self._config
                for key in keys:
                    result = result[key]
                return result
            except (KeyError, TypeError):
                logger.warning(f"Could not resolve config reference: {ref_path}")
                return value
        return value

    def _process_config(self, config: Any) -> Any:
        """Recursively resolve references"""
        if isinstance(config, dict):
            return {key: self._process_config(value) for key, value in config.items()}
        if isinstance(config, list):
            return [self._process_config(item) for item in config]
        return self._resolve_config_reference(config)

    def _load_config(
        self, config_path: Optional[Union[str, Path]], experiment_path: Optional[Union[str, Path]]
    ) -> None:
        actual_path = config_path or CONFIG_PATH / "default.yaml"
        logger.info(f"Loading configuration from '{actual_path}'")
        self._config = self._read_yaml(actual_path)
        self._config.pop(MANIFEST_KEY, None)
        if experiment_path is not None:
            logger.info(f"Merging experiment configuration '{experiment_path}'")
            self._config = deep_merge(self._config, self._read_yaml(experiment_path))
        self._config = self._process_config(self._config)

    def get(self, key_path: str, default: Any = None) -> Any:
        """Get configuration value using dot notation"""
        try:
            keys = key_path.split(".")
            value = self._config
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any) -> None:
        """Set a configuration value using dot notation, creating intermediate sections"""
        logger.debug(f"Override {key_path} = {value!r}")
        set_path(self._config, key_path, value)

    def as_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self._config)

    def experiment(self) -> ExperimentConfig:
        return validate_experiment(self._config)


def save_manifest(path: Union[str, Path], experiment: ExperimentConfig, extra: Optional[Dict[str, Any]] = None) -> Path:
    """Write the resolved config plus run metadata; the file loads back as a base configuration."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    values = experiment.to_dict()
    values[MANIFEST_KEY] = {
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": experiment.seed,
        **(extra or {}),
    }
    with open(file_path, "w", encoding="utf-8") as f:
        yaml.safe_dump(values, f, sort_keys=False)
    logger.info(f"Wrote run manifest {file_path}")
    return file_path
