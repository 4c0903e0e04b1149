"""Command-line entry point: ``specgeo <experiment> --config <path>``.

Exit status is 0 when every acceptance criterion passes, 1 when one fails,
2 for an invalid config and 3 when the report cannot be written.
"""

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import get_args

from loguru import logger

from ._typing import ExperimentKind
from .config import load_config
from .errors import ConfigError, ReportError
from .runner import emit_report, plot_requests, run_experiment

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_REPORT = 3


def build_parser() -> argparse.ArgumentParser:
    """Argument parser of the ``specgeo`` command."""
    parser = argparse.ArgumentParser(
        prog="specgeo",
        description="Run one specgeo experiment and write CSV, SVG and summary.json.",
    )
    parser.add_argument("experiment", choices=get_args(ExperimentKind))
    parser.add_argument("--config", type=Path, required=True, help="JSON experiment config")
    parser.add_argument(
        "--out", type=Path, default=Path("results"), help="output directory (default: results)"
    )
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for independent rows")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    return parser


def configure_logging(verbose: bool) -> None:
    """Send logs to stderr at INFO, or DEBUG with ``--verbose``."""
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO")


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run the experiment and emit its report.

    Returns:
        Process exit status.
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    if args.jobs < 1:
        logger.error("--jobs must be at least 1")
        return EXIT_CONFIG
    try:
        config = load_config(args.config, args.experiment)
    except ConfigError as e:
        logger.error(f"config error at {e.key!r}: {e}")
        return EXIT_CONFIG
    table = run_experiment(config, jobs=args.jobs)
    try:
        summary = emit_report([table], plot_requests(config), args.out)
    except ReportError as e:
        logger.error(f"cannot write report ({e.path}): {e}")
        return EXIT_REPORT
    for criterion in table.criteria:
        log = logger.info if criterion.passed else logger.error
        log(
            f"{criterion.name}: {criterion.value} "
            f"(threshold {criterion.threshold}) {'pass' if criterion.passed else 'FAIL'}"
        )
    return EXIT_OK if summary.passed else EXIT_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
