import argparse
import logging
import sys
from pathlib import Path

from dualsmooth.cli.commands import conjugate_plot, dual_estimate, estimate, fit_density, simulate, verify
from dualsmooth.cli.exception_handlers import handle_exception
from dualsmooth.engine.config import config

__version__ = "1.0.0"

logger = logging.getLogger(__name__)


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=config.app_name,
        description="MAP state smoothing under log-concave noise and its dual control problem",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")

    simulate.add_parser(subparsers)
    fit_density.add_parser(subparsers)
    estimate.add_parser(subparsers)
    dual_estimate.add_parser(subparsers)
    verify.add_parser(subparsers)
    conjugate_plot.add_parser(subparsers)
    return parser


def _input_path(args: argparse.Namespace) -> Path | None:
    for name in ("scenario_flag", "scenario_file", "samples_flag", "samples_file", "samples"):
        path = getattr(args, name, None)
        if path is not None:
            return path
    return None


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv``, dispatch to the subcommand and map failures to exit codes."""
    args = create_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if config.debug or args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logger.debug(f"Debug mode: {config.debug}")
    try:
        return args.func(args)
    except Exception as exc:
        return handle_exception(exc, _input_path(args))


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
