import argparse
import logging

from dualsmooth.cli.common import add_scenario_arguments, load_run, output_dir, solver_options
from dualsmooth.engine.io import write_json, write_trace, write_trajectories
from dualsmooth.engine.problems import certify_strong_duality
from dualsmooth.engine.solver import solve_first_order, solve_quadratic_direct

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("estimate", help="Solve the MAP smoothing problem")
    add_scenario_arguments(parser)
    parser.add_argument(
        "--method",
        choices=["first-order", "direct"],
        default="first-order",
        help="direct solves the normal equations / KKT system (quadratic penalties only)",
    )
    parser.set_defaults(func=run_estimate)


def run_estimate(args: argparse.Namespace) -> int:
    """Write estimate.csv (t, x_*, w_*), dual.csv (t, u_*, y_*) and summary.json."""
    run = load_run(args)
    out = output_dir(args, run)
    opts = solver_options(args, run)
    if args.method == "direct":
        solution = solve_quadratic_direct(run.problem, opts)
        solution.certificate = certify_strong_duality(run.problem)
    else:
        solution = solve_first_order(run.problem, opts)

    write_trajectories(out / "estimate.csv", {"x": solution.x, "w": solution.w})
    write_trajectories(out / "dual.csv", {"u": solution.u, "y": solution.y})
    summary = solution.summary()
    write_json(out / "summary.json", summary)
    if args.trace:
        write_trace(out / "trace.csv", solution.history)
    print(summary.model_dump_json())
    return 0 if solution.converged else 1
