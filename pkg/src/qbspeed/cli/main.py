"""
Command-line entry point.

Usage:
    python -m qbspeed.cli config/rabi_speed.json [--seed 7] [--jobs 4] [--output out/rabi]

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 verification failure.
Errors are printed to stderr as a single-line JSON object.
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

from qbspeed.errors import ConfigError, QBSpeedError

logger = logging.getLogger(__name__)


class CliArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports bad flags as a ConfigError instead of exiting."""

    def error(self, message: str):
        raise ConfigError(f"Invalid command line: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = CliArgumentParser(
        prog='qbspeed',
        description='Quantum battery energy-exchange speed experiments'
    )
    parser.add_argument(
        'config',
        help='Path to the experiment JSON file'
    )
    parser.add_argument(
        '--seed', '-s',
        type=int,
        default=None,
        help='Override the seed from the config file'
    )
    parser.add_argument(
        '--jobs', '-j',
        type=int,
        default=None,
        help='Worker threads for restarts and sweep points'
    )
    parser.add_argument(
        '--output', '-o',
        default=None,
        help='Output directory (overrides output_path)'
    )
    parser.add_argument(
        '--log-level',
        default=None,
        help='Logging level (defaults to QBSPEED_LOG_LEVEL)'
    )
    return parser


def _error_line(body: dict) -> None:
    print(json.dumps(body, sort_keys=True), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as e:
        parser.print_usage(sys.stderr)
        _error_line(e.to_dict())
        return e.exit_code

    # settings are read from the environment on import, after .env is loaded
    from qbspeed.cli.handlers import load_config, run_experiment
    from qbspeed.utils import configure_logging, dumps

    configure_logging(args.log_level)
    try:
        config = load_config(args.config, seed=args.seed, jobs=args.jobs, output=args.output)
        response = run_experiment(config)
    except QBSpeedError as e:
        logger.error(f"Experiment failed with {e.code}: {e.message}", exc_info=True)
        _error_line(e.to_dict())
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        _error_line({'error': 'unexpected-error', 'message': str(e), 'exit_code': 3})
        return 3

    sys.stdout.write(dumps(response))
    return response['exit_code']


if __name__ == '__main__':
    sys.exit(main())
