from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from darcymg.config import EXPERIMENTS_PATH, Config, ExperimentConfig, ProblemKind
from darcymg.errors import ConfigError, DarcyMGError
from darcymg.experiments.runner import ExperimentRunner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="darcymg", description="Spectral three-grid preconditioned Darcy flow solves, sweeps and simulations."
    )
    parser.add_argument("--log-level", type=str, default=None, help="Logging level (overrides LOG_LEVEL).")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", type=str, default=None, help="Base configuration file (default.yaml or a run manifest)."
    )
    common.add_argument(
        "--experiment",
        type=str,
        default=None,
        help=f"Experiment file merged on top of the base configuration, or a name under {EXPERIMENTS_PATH}.",
    )
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config key by dot path (repeatable); values are read as YAML.",
    )
    common.add_argument("--output", type=str, default=None, help="Output directory (overrides output.directory).")
    common.add_argument("--workers", type=int, default=None, help="Worker threads (overrides workers).")

    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("solve", parents=[common], help="Single-phase solve of one configuration.")
    subparsers.add_parser("sweep", parents=[common], help="Single-phase solves over every sweep point.")
    subparsers.add_parser("verify-theory", parents=[common], help="Dense check of the condition number bounds.")
    subparsers.add_parser("simulate", parents=[common], help="Two-phase water flood simulation.")
    subparsers.add_parser("compare", parents=[common], help="Exact two-grid against three-grid per sweep point.")
    return parser


def _experiment_path(value: Optional[str]) -> Optional[Path]:
    if value is None:
        return None
    path = Path(value)
    if path.is_file():
        return path
    named = EXPERIMENTS_PATH / (value if value.endswith(".yaml") else f"{value}.yaml")
    if named.is_file():
        return named
    raise ConfigError("experiment", f"no experiment file '{value}'")


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    config = Config(
        config_path=args.config, experiment_path=_experiment_path(args.experiment), overrides=args.overrides
    )
    if args.output is not None:
        config.set("output.directory", args.output)
    if args.workers is not None:
        config.set("workers", args.workers)
    if args.command == "solve":
        config.set("sweep", {})
    elif args.command == "verify-theory":
        config.set("problem.kind", ProblemKind.VERIFY_THEORY.value)
    elif args.command == "simulate":
        config.set("problem.kind", ProblemKind.TWO_PHASE.value)
    return config.experiment()


def run(command: str, experiment: ExperimentConfig) -> int:
    runner = ExperimentRunner(experiment)
    if command in ("solve", "sweep"):
        return runner.solve()
    if command == "verify-theory":
        return runner.verify_theory()
    if command == "simulate":
        return runner.simulate()
    return runner.compare()


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    Config.configure_logging(args.log_level)
    try:
        experiment = load_experiment(args)
        status = run(args.command, experiment)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except DarcyMGError as e:
        logger.error(str(e))
        return EXIT_SOLVER
    if status == EXIT_OK:
        logger.info(f"{args.command} finished, results in '{experiment.output.directory}'")
    return status


if __name__ == "__main__":
    sys.exit(main())
