# turbobw/cli.py
"""
Command line:

    main.py run --config <path> [--snr-db 2,4,6] [--mode joint] [--frames N]
                [--seed N] [--out <csv>] [--workers N]
    main.py validate --config <path>
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from .constants import DATA_DIR, LOG_PATH
from .errors import TurboBWError
from .experiments import parse_config, run_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OUTPUT = 3


def setup_logging(level: str = "INFO", log_path: Optional[str] = LOG_PATH):
    """Console at ``level``; everything from DEBUG up appended to the log file."""
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(console)

    if log_path:
        try:
            os.makedirs(os.path.dirname(log_path) or DATA_DIR, exist_ok=True)
            file_handler = logging.FileHandler(log_path, encoding="utf-8")
        except OSError as e:
            logger.warning("cannot open log file %s: %s", log_path, e)
        else:
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
            root.addHandler(file_handler)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turbobw",
        description="Joint blind channel estimation and turbo equalization experiments.",
    )
    parser.add_argument("--log-level", default="INFO", help="console log level (default INFO)")
    parser.add_argument("--log-file", default=LOG_PATH, help="log file path ('' disables it)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment sweep and write the CSV")
    run.add_argument("--config", help="key=value experiment file")
    run.add_argument("--snr-db", dest="snr_db", help="comma separated SNR grid in dB")
    run.add_argument(
        "--mode",
        dest="modes",
        action="append",
        help="joint | standalone | conventional (repeatable or comma separated)",
    )
    run.add_argument("--frames", dest="n_frames", help="Monte-Carlo frames per cell")
    run.add_argument("--seed", dest="seed", help="master seed")
    run.add_argument("--out", dest="output", help="CSV output path")
    run.add_argument("--workers", dest="workers", help="frame worker threads")

    validate = sub.add_parser("validate", help="parse and validate a config without running it")
    validate.add_argument("--config", required=True, help="key=value experiment file")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_file or None)

    try:
        if args.command == "validate":
            config = parse_config(args.config)
            print(f"{args.config}: OK")
            for key, value in vars(config).items():
                print(f"  {key} = {value}")
            return EXIT_OK

        overrides = {
            "snr_db": args.snr_db,
            "modes": ",".join(args.modes) if args.modes else None,
            "n_frames": args.n_frames,
            "seed": args.seed,
            "output": args.output,
            "workers": args.workers,
        }
        config = parse_config(args.config, overrides)
        run_experiment(config, sys.stdout)
        return EXIT_OK
    except TurboBWError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except OSError as e:
        logger.error("cannot write results: %s", e)
        return EXIT_OUTPUT
