import argparse
import logging
from pathlib import Path

import numpy as np
from dualsmooth.engine.io import read_samples, write_csv, write_json, write_penalty_grids
from dualsmooth.engine.logconcave import fit_logconcave_mle, penalty_from_mle
from dualsmooth.models import DensitySummary

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("fit-density", help="Fit a log-concave MLE density to a one-column sample CSV")
    parser.add_argument("samples_file", nargs="?", type=Path, help="One-column CSV of samples")
    parser.add_argument("--samples", dest="samples_flag", type=Path, help="One-column CSV of samples")
    parser.add_argument("--out", type=Path, default=Path("out"), help="Output directory")
    parser.add_argument("--points", type=int, help="Grid size of the plot CSVs")
    parser.set_defaults(func=run_fit_density, parser=parser)


def run_fit_density(args: argparse.Namespace) -> int:
    """Write density.csv (knot, log_density, penalty), penalty.csv, conjugate.csv and density.json."""
    path = args.samples_flag or args.samples_file
    if path is None:
        args.parser.error("a samples CSV is required (positional or --samples)")
    density = fit_logconcave_mle(read_samples(path))
    penalty = penalty_from_mle(density)

    out = args.out
    knots = np.column_stack([density.knots, density.log_values, -density.log_values])
    write_csv(out / "density.csv", ["knot", "log_density", "penalty"], knots)
    write_penalty_grids(out, penalty, args.points)
    summary = DensitySummary(
        sample_size=density.sample_size,
        knot_count=density.knots.size,
        support=density.support,
        integral=density.integral(),
        max_log_density=float(density.log_values.max()),
    )
    write_json(out / "density.json", summary)
    print(summary.model_dump_json())
    return 0
