import argparse
import logging

import numpy as np
from dualsmooth.cli.common import add_scenario_arguments, load_run, output_dir, solver_options
from dualsmooth.engine.config import config
from dualsmooth.engine.exceptions import InvalidPenaltyError, NonDifferentiableConjugateError
from dualsmooth.engine.io import ScenarioRun, write_json
from dualsmooth.engine.penalty import (
    Penalty,
    Quadratic,
    SeparablePenalty,
    conjugate_query_points,
    max_conjugate_deviation,
    validate_density,
)
from dualsmooth.engine.problems import build_dual, certify_strong_duality
from dualsmooth.engine.sim import SAMPLE_STREAM, make_rng
from dualsmooth.engine.solver import (
    Solution,
    reconstruct_primal_from_dual,
    solve_dual_first_order,
    solve_first_order,
    solve_quadratic_direct,
)
from dualsmooth.models import CheckResult, CheckStatus, SolverOptions, VerificationReport

logger = logging.getLogger(__name__)

DIRECT_TOLERANCE = 1e-6
RECONSTRUCTION_TOLERANCE = 1e-5


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("verify", help="Run the self-checks of a scenario and print a PASS/FAIL table")
    add_scenario_arguments(parser)
    parser.set_defaults(func=run_verify)


def _relative_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / (1.0 + np.linalg.norm(b)))


def _status(ok: bool) -> CheckStatus:
    return CheckStatus.PASS if ok else CheckStatus.FAIL


def check_certificate(run: ScenarioRun) -> CheckResult:
    certificate = certify_strong_duality(run.problem)
    return CheckResult(
        name="strong duality certificate",
        status=_status(certificate.certified),
        detail=f"{certificate.status.value}: {certificate.detail}" if certificate.detail else certificate.status.value,
    )


def check_gap(solution: Solution, opts: SolverOptions) -> CheckResult:
    relative = solution.gap / (1.0 + abs(solution.primal_value)) if np.isfinite(solution.gap) else np.inf
    return CheckResult(
        name="first-order duality gap",
        status=_status(solution.converged),
        value=relative,
        tolerance=opts.tol_gap,
        detail=f"{solution.termination.value} after {solution.iterations} iterations",
    )


def check_direct(run: ScenarioRun, solution: Solution) -> CheckResult:
    name = "direct oracle agreement"
    try:
        direct = solve_quadratic_direct(run.problem)
    except InvalidPenaltyError as e:
        return CheckResult(name=name, status=CheckStatus.SKIP, detail=e.detail)
    distance = _relative_distance(solution.x, direct.x)
    return CheckResult(
        name=name, status=_status(distance <= DIRECT_TOLERANCE), value=distance, tolerance=DIRECT_TOLERANCE
    )


def check_reconstruction(run: ScenarioRun, solution: Solution, opts: SolverOptions) -> CheckResult:
    name = "dual reconstruction"
    if not all(isinstance(f_t, Quadratic) and f_t.is_positive_definite for f_t in run.problem.f):
        return CheckResult(name=name, status=CheckStatus.SKIP, detail="process penalty conjugate is not smooth")
    try:
        d = build_dual(run.problem)
        dual = solve_dual_first_order(d, opts)
        _, x = reconstruct_primal_from_dual(d, dual.u)
    except NonDifferentiableConjugateError as e:
        return CheckResult(name=name, status=CheckStatus.SKIP, detail=e.detail)
    distance = _relative_distance(x, solution.x)
    return CheckResult(
        name=name,
        status=_status(distance <= RECONSTRUCTION_TOLERANCE),
        value=distance,
        tolerance=RECONSTRUCTION_TOLERANCE,
    )


def _distinct(bank: SeparablePenalty) -> list[Penalty]:
    return list({id(penalty): penalty for penalty in bank}.values())


def check_conjugates(label: str, bank: SeparablePenalty) -> list[CheckResult]:
    step, margin = config.oracle_grid_step, config.oracle_grid_margin
    results = []
    for index, penalty in enumerate(_distinct(bank)):
        name = f"{label} conjugate #{index} vs grid oracle"
        if penalty.dimension != 1:
            results.append(CheckResult(name=name, status=CheckStatus.SKIP, detail="grid oracle is one-dimensional"))
            continue
        deviation = max_conjugate_deviation(penalty, conjugate_query_points(penalty), step, margin)
        results.append(
            CheckResult(name=name, status=_status(deviation <= 2 * step), value=deviation, tolerance=2 * step)
        )
    return results


def check_densities(label: str, bank: SeparablePenalty, seed: int) -> list[CheckResult]:
    rng = make_rng(seed, SAMPLE_STREAM)
    results = []
    for index, penalty in enumerate(_distinct(bank)):
        name = f"{label} penalty #{index} is a density"
        try:
            validate_density(penalty, rng)
        except InvalidPenaltyError as e:
            results.append(CheckResult(name=name, status=CheckStatus.FAIL, detail=e.detail))
        else:
            results.append(CheckResult(name=name, status=CheckStatus.PASS))
    return results


def _print_table(report: VerificationReport) -> None:
    width = max(len(check.name) for check in report.checks)
    for check in report.checks:
        measured = "" if check.value is None else f"  {check.value:.3e}"
        bound = "" if check.tolerance is None else f" <= {check.tolerance:.1e}"
        note = f"  ({check.detail})" if check.detail and check.status != CheckStatus.PASS else ""
        print(f"{check.status.value:<4}  {check.name:<{width}}{measured}{bound}{note}")
    print("PASS" if report.passed else "FAIL")


def run_verify(args: argparse.Namespace) -> int:
    """Print the check table, write verify.json and exit 0 only when no check failed."""
    run = load_run(args)
    out = output_dir(args, run)
    opts = solver_options(args, run)

    solution = solve_first_order(run.problem, opts)
    checks = [check_certificate(run), check_gap(solution, opts)]
    checks.append(check_direct(run, solution))
    checks.append(check_reconstruction(run, solution, opts))
    checks += check_conjugates("process", run.problem.f)
    checks += check_conjugates("measurement", run.problem.g)
    checks += check_densities("process", run.problem.f, run.seed)
    checks += check_densities("measurement", run.problem.g, run.seed)

    name = run.scenario.name or str(args.scenario_flag or args.scenario_file)
    report = VerificationReport(scenario=name, checks=checks)
    write_json(out / "verify.json", report)
    _print_table(report)
    failed = [check.name for check in checks if check.status == CheckStatus.FAIL]
    if failed:
        logger.info(f"Failed checks: {', '.join(failed)}")
    return 0 if report.passed else 1
