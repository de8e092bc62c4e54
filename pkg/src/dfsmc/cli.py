"""Command line entry point for Monte Carlo benchmarks."""

import argparse
import logging
from collections.abc import Sequence

from .config import ConfigError, load_config, with_overrides
from .engine import SolverError
from .experiment import run_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected comma separated numbers, got {text!r}"
        ) from exc


def _name_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser of the `dfsmc-bench` command."""
    parser = argparse.ArgumentParser(
        prog="dfsmc-bench",
        description=(
            "Run direction-of-arrival estimators on simulated ULA snapshots with "
            "mutual coupling and write spectra, per-trial errors and a summary."
        ),
    )
    parser.add_argument("--config", help="JSON configuration file (defaults if omitted)")
    parser.add_argument(
        "--method",
        type=_name_list,
        help="Comma separated methods: dfsmc, sbl_on_grid, sbl_off_grid, music",
    )
    parser.add_argument("--trials", type=int, help="Number of Monte Carlo trials")
    parser.add_argument("--seed", type=int, help="Master seed (unsigned 64-bit)")
    parser.add_argument(
        "--snr", type=_float_list, help="SNR in dB; several values sweep it"
    )
    parser.add_argument(
        "--coupling-db",
        type=_float_list,
        help="Adjacent-antenna coupling strength in dB; several values sweep it",
    )
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--workers", type=int, help="Concurrent trials")
    parser.add_argument(
        "--trace", action="store_true", help="Write per-iteration traces of EM methods"
    )
    parser.add_argument(
        "--timing", action="store_true", help="Write per-method wall times to timing.csv"
    )
    parser.add_argument(
        "--progress", action="store_true", help="Show a progress bar over trials"
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log more (-v info, -vv debug)",
    )

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run the benchmark and return the process exit code."""
    args = build_parser().parse_args(argv)

    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose > 1:
        level = logging.DEBUG

    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        config = with_overrides(
            load_config(args.config),
            methods=args.method,
            trials=args.trials,
            seed=args.seed,
            snr_db=args.snr,
            coupling_alpha_db=args.coupling_db,
            output_dir=args.out,
            workers=args.workers,
        )
    except ConfigError as exc:
        logger.error("Invalid configuration: %s", exc)  # noqa: TRY400
        return EXIT_CONFIG

    try:
        summary, _ = run_experiment(
            config, trace=args.trace, timing=args.timing, progress=args.progress
        )
    except (SolverError, ValueError) as exc:
        logger.error("Experiment failed: %s", exc)  # noqa: TRY400
        return EXIT_FAILURE

    for method, values in summary.e2.items():
        logger.info(
            "%s e2 [deg]: %s", method, ", ".join(f"{value:.4f}" for value in values)
        )

    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
