import argparse
import logging

from dualsmooth.cli.common import add_scenario_arguments, load_run, output_dir, solver_options
from dualsmooth.engine.io import write_json, write_trace, write_trajectories
from dualsmooth.engine.model import apply_dynamics
from dualsmooth.engine.penalty import POS_INF
from dualsmooth.engine.problems import (
    build_dual,
    dual_objective,
    gap_from_values,
    primal_objective,
    restore_primal,
)
from dualsmooth.engine.solver import reconstruct_primal_from_dual, relative_gap_met, solve_dual_first_order

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "dual-estimate", help="Solve the dual control problem and reconstruct the state estimate"
    )
    add_scenario_arguments(parser)
    parser.set_defaults(func=run_dual_estimate)


def run_dual_estimate(args: argparse.Namespace) -> int:
    """Write dual_estimate.csv (t, x_*, w_*), controls.csv (t, u_*, y_*) and summary_dual.json."""
    run = load_run(args)
    out = output_dir(args, run)
    problem = run.problem
    dual = build_dual(problem)
    opts = solver_options(args, run)
    solution = solve_dual_first_order(dual, opts)

    w, x = reconstruct_primal_from_dual(dual, solution.u)
    primal_value = primal_objective(problem, x)
    if primal_value == POS_INF:
        # Reconstruction can land just outside a bounded domain.
        restored = restore_primal(problem, x)
        if restored is not None:
            x, w = restored, apply_dynamics(run.system, restored)
            primal_value = primal_objective(problem, x)
    dual_value, y = dual_objective(dual, solution.u)

    solution.x, solution.w, solution.y = x, w, y
    solution.primal_value, solution.dual_value = primal_value, dual_value
    solution.gap = gap_from_values(primal_value, dual_value)
    solution.converged = relative_gap_met(primal_value, solution.gap, opts.tol_gap)
    logger.info(f"Reconstructed estimate: primal={primal_value:.10g} gap={solution.gap:.3e}")

    write_trajectories(out / "dual_estimate.csv", {"x": x, "w": w})
    write_trajectories(out / "controls.csv", {"u": solution.u, "y": y})
    summary = solution.summary()
    write_json(out / "summary_dual.json", summary)
    if args.trace:
        write_trace(out / "trace_dual.csv", solution.history)
    print(summary.model_dump_json())
    return 0 if solution.converged else 1
