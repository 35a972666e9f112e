"""Arguments and helpers shared by the scenario subcommands."""

import argparse
import logging
from pathlib import Path

from dualsmooth.engine.exceptions import ScenarioError
from dualsmooth.engine.io import ScenarioRun, assemble, load_scenario
from dualsmooth.models import SolverOptions

logger = logging.getLogger(__name__)


def add_scenario_arguments(parser: argparse.ArgumentParser, solver: bool = True) -> None:
    parser.add_argument("scenario_file", nargs="?", type=Path, help="Scenario JSON file")
    parser.add_argument("--scenario", dest="scenario_flag", type=Path, help="Scenario JSON file")
    parser.add_argument("--out", type=Path, help="Output directory (default: the scenario's output_dir)")
    parser.add_argument("--seed", type=int, help="Override the scenario seed")
    if solver:
        parser.add_argument("--tol", type=float, help="Relative duality-gap tolerance")
        parser.add_argument("--max-iters", type=int, help="Iteration cap")
        parser.add_argument("--trace", action="store_true", help="Write the convergence trace CSV")


def scenario_path(args: argparse.Namespace) -> Path:
    path = args.scenario_flag or args.scenario_file
    if path is None:
        raise ScenarioError("a scenario file is required (positional or --scenario)")
    return path


def load_run(args: argparse.Namespace) -> ScenarioRun:
    path = scenario_path(args)
    scenario = load_scenario(path)
    return assemble(scenario, base_dir=path.parent, seed=args.seed)


def output_dir(args: argparse.Namespace, run: ScenarioRun) -> Path:
    out = args.out if args.out is not None else run.base_dir / run.scenario.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def solver_options(args: argparse.Namespace, run: ScenarioRun) -> SolverOptions:
    overrides = {}
    if getattr(args, "tol", None) is not None:
        overrides["tol_gap"] = args.tol
    if getattr(args, "max_iters", None) is not None:
        overrides["max_iters"] = args.max_iters
    # Validate overrides through the schema.
    return SolverOptions.model_validate(run.scenario.solver.model_dump() | overrides)
