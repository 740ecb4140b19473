"""Command-line surface: gen-data, degrade, train, eval, restore."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from app.cli.commands import COMMANDS
from app.cli.dependencies import configure_runtime, dep_observability, dep_run_id
from app.core.errors import (
    ArgumentError,
    CheckpointError,
    ConfigError,
    DatasetIOError,
    DomainError,
    NumericError,
    SampleValidationError,
    ShapeError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

USAGE_ERRORS = (
    ConfigError,
    DatasetIOError,
    CheckpointError,
    SampleValidationError,
    DomainError,
    ShapeError,
    ArgumentError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopres",
        description="Cooperative segmentation refinement and image restoration pipeline",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_runtime()
    try:
        return args.handler(args)
    except NumericError as e:
        # TrainingDivergedError included
        print(f"error: {e}", file=sys.stderr)
        dep_observability().log_error(e, dep_run_id(), {"command": args.command})
        return EXIT_NUMERIC
    except USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        dep_observability().log_error(e, dep_run_id(), {"command": args.command})
        logger.exception("Unhandled error in %s", args.command)
        return EXIT_FAILURE
