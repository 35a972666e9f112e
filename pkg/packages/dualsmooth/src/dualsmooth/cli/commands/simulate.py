import argparse
import logging

from dualsmooth.cli.common import add_scenario_arguments, scenario_path
from dualsmooth.engine.exceptions import ScenarioError
from dualsmooth.engine.io import load_scenario, simulation_seed, write_trajectories
from dualsmooth.engine.model import LinearSystem
from dualsmooth.engine.sim import simulate

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("simulate", help="Draw a ground-truth trajectory and noisy measurements")
    add_scenario_arguments(parser, solver=False)
    parser.set_defaults(func=run_simulate)


def run_simulate(args: argparse.Namespace) -> int:
    """Write truth.csv (t, x_*), noise.csv (t, w_*, v_*) and measurements.csv (t, z_*)."""
    path = scenario_path(args)
    scenario = load_scenario(path)
    if scenario.process_noise is None or scenario.measurement_noise is None:
        raise ScenarioError("simulate needs process_noise and measurement_noise in the scenario")
    seed = simulation_seed(scenario, args.seed)
    system = LinearSystem.from_spec(scenario.system)
    result = simulate(system, scenario.process_noise, scenario.measurement_noise, seed)

    out = args.out if args.out is not None else path.parent / scenario.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_trajectories(out / "truth.csv", {"x": result.states})
    write_trajectories(out / "noise.csv", {"w": result.process_noise, "v": result.measurement_noise})
    write_trajectories(out / "measurements.csv", {"z": result.measurements})
    logger.info(f"Simulated T={system.horizon} with seed {seed} into {out}")
    print(f"simulated {system.num_blocks} steps (seed {seed}) -> {out}")
    return 0
