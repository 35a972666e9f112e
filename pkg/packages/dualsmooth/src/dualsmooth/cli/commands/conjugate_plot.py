import argparse
import logging
from pathlib import Path

from dualsmooth.cli.common import add_scenario_arguments, load_run, output_dir
from dualsmooth.engine.exceptions import ScenarioError
from dualsmooth.engine.io import read_samples, write_penalty_grids
from dualsmooth.engine.logconcave import fit_logconcave_mle, penalty_from_mle

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "conjugate-plot", help="Tabulate a one-dimensional penalty and its conjugate for plotting"
    )
    add_scenario_arguments(parser, solver=False)
    parser.add_argument("--samples", type=Path, help="Fit the penalty from a sample CSV instead of a scenario")
    parser.add_argument(
        "--which", choices=["process", "measurement"], default="measurement", help="Penalty bank to tabulate"
    )
    parser.add_argument("--step", type=int, default=0, help="Time step whose penalty is tabulated")
    parser.add_argument("--points", type=int, help="Grid size of the plot CSVs")
    parser.set_defaults(func=run_conjugate_plot)


def run_conjugate_plot(args: argparse.Namespace) -> int:
    """Write penalty.csv (x, value) and conjugate.csv (y, conjugate)."""
    if args.samples is not None:
        penalty = penalty_from_mle(fit_logconcave_mle(read_samples(args.samples)))
        out = args.out or Path("out")
    else:
        run = load_run(args)
        out = output_dir(args, run)
        bank = run.problem.f if args.which == "process" else run.problem.g
        if not 0 <= args.step < len(bank):
            raise ScenarioError(f"--step must lie in [0, {len(bank) - 1}], got {args.step}")
        penalty = bank[args.step]
    penalty_csv, conjugate_csv = write_penalty_grids(out, penalty, args.points)
    print(f"wrote {penalty_csv} and {conjugate_csv}")
    return 0
