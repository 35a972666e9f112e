"""Scenario loading, penalty assembly and CSV/JSON outputs."""

import csv
import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from dualsmooth.engine.config import config
from dualsmooth.engine.exceptions import DimensionMismatchError, InvalidPenaltyError, ScenarioError
from dualsmooth.engine.logconcave import fit_logconcave_mle, penalty_from_mle
from dualsmooth.engine.model import LinearSystem
from dualsmooth.engine.penalty import (
    Monitoring,
    Penalty,
    PiecewiseLinear1D,
    Quadratic,
    ZeroIndicator,
    gaussian_penalty,
    huber_penalty,
    laplace_penalty,
    validate_density,
)
from dualsmooth.engine.problems import PrimalProblem, build_primal
from dualsmooth.engine.sim import SAMPLE_STREAM, SimulationResult, make_rng, sample_noise, simulate
from dualsmooth.models import (
    ConvergenceRecord,
    GaussianSpec,
    HuberSpec,
    LaplaceSpec,
    LogConcaveMLESpec,
    MonitoringSpec,
    PenaltySpec,
    PiecewiseLinearSpec,
    QuadraticSpec,
    Scenario,
    ZeroSpec,
)
from numpy.typing import NDArray
from pydantic import BaseModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScenarioRun:
    """A scenario resolved into numerical objects."""

    scenario: Scenario
    system: LinearSystem
    problem: PrimalProblem
    simulation: SimulationResult | None
    seed: int
    base_dir: Path


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file.

    ``json.JSONDecodeError`` and ``pydantic.ValidationError`` propagate so the
    caller can anchor them in the file.
    """
    text = Path(path).read_text()
    return Scenario.model_validate(json.loads(text))


def read_samples(path: str | Path) -> NDArray[np.float64]:
    """One-column CSV of sample values; a non-numeric first row is taken as a header."""
    values = []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError as e:
                if lineno == 1:
                    continue
                raise ScenarioError(f"{path}:{lineno}: not a number: {row[0]!r}") from e
    return np.asarray(values)


def read_measurements(path: str | Path, num_blocks: int, meas_dim: int) -> NDArray[np.float64]:
    """CSV with header t,z_0,...,z_{n_z-1} and one row per time step."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        expected = ["t"] + [f"z_{i}" for i in range(meas_dim)]
        if header is None or [h.strip() for h in header] != expected:
            raise ScenarioError(f"{path}:1: expected header {','.join(expected)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as e:
                raise ScenarioError(f"{path}:{lineno}: {e}") from e
            if t != len(rows) or len(values) != meas_dim:
                raise ScenarioError(f"{path}:{lineno}: expected t={len(rows)} followed by {meas_dim} values")
            rows.append(values)
    if len(rows) != num_blocks:
        raise DimensionMismatchError(f"measurements in {path}", (num_blocks, meas_dim), (len(rows), meas_dim))
    return np.asarray(rows, dtype=float)


def _mle_samples(spec: LogConcaveMLESpec, base_dir: Path) -> NDArray:
    if spec.samples is not None:
        return np.asarray(spec.samples, dtype=float)
    if spec.samples_path is not None:
        return read_samples(base_dir / spec.samples_path)
    draw = spec.sample
    return sample_noise(draw.noise, 1, make_rng(draw.seed, SAMPLE_STREAM), draw.size)[:, 0]


def penalty_from_spec(spec: PenaltySpec, dim: int, base_dir: Path = Path(".")) -> Penalty:
    match spec:
        case QuadraticSpec():
            penalty = Quadratic(spec.M)
        case MonitoringSpec():
            lower = [-math.inf if lo is None else lo for lo in spec.lower]
            upper = [math.inf if hi is None else hi for hi in spec.upper]
            penalty = Monitoring(lower, upper, spec.M_diag)
        case PiecewiseLinearSpec():
            penalty = PiecewiseLinear1D(spec.knots, spec.values)
        case ZeroSpec():
            penalty = ZeroIndicator(spec.dimension or dim)
        case GaussianSpec():
            penalty = gaussian_penalty(spec.covariance)
        case LaplaceSpec():
            penalty = laplace_penalty(spec.scale, spec.dimension or dim)
        case HuberSpec():
            penalty = huber_penalty(spec.kappa, spec.dimension or dim)
        case LogConcaveMLESpec():
            penalty = penalty_from_mle(fit_logconcave_mle(_mle_samples(spec, base_dir)))
        case _:
            raise InvalidPenaltyError(f"unsupported penalty spec {spec!r}")
    if penalty.dimension != dim:
        raise DimensionMismatchError(f"{spec.kind} penalty", (dim,), (penalty.dimension,))
    return penalty


def _penalty_bank(scenario: Scenario, name: str, dim: int, base_dir: Path) -> list[Penalty]:
    # Equal spec objects share one penalty, so MLE fits run once.
    built: dict[int, Penalty] = {}
    bank = []
    for spec in scenario.penalty_specs(name):
        if id(spec) not in built:
            built[id(spec)] = penalty_from_spec(spec, dim, base_dir)
        bank.append(built[id(spec)])
    return bank


def _warn_non_density(penalties: Sequence[Penalty], name: str, seed: int) -> None:
    rng = make_rng(seed, SAMPLE_STREAM)
    for penalty in {id(p): p for p in penalties}.values():
        try:
            validate_density(penalty, rng)
        except InvalidPenaltyError as e:
            logger.warning(f"{name}: {e.detail}")


def simulation_seed(scenario: Scenario, override: int | None = None) -> int:
    """An explicit override wins, then the measurement source seed, then the scenario seed."""
    if override is not None:
        return override
    source_seed = getattr(scenario.measurements, "seed", None)
    return scenario.seed if source_seed is None else source_seed


def assemble(scenario: Scenario, base_dir: str | Path = ".", seed: int | None = None) -> ScenarioRun:
    base_dir = Path(base_dir)
    sim_seed = simulation_seed(scenario, seed)
    seed = scenario.seed if seed is None else seed
    system = LinearSystem.from_spec(scenario.system)
    f = _penalty_bank(scenario, "process_penalty", system.state_dim, base_dir)
    g = _penalty_bank(scenario, "measurement_penalty", system.meas_dim, base_dir)
    _warn_non_density(f, "process penalty", seed)
    _warn_non_density(g, "measurement penalty", seed)

    simulation = None
    source = scenario.measurements
    match source.source:
        case "file":
            z = read_measurements(base_dir / source.path, system.num_blocks, system.meas_dim)
        case "inline":
            z = np.asarray(source.values, dtype=float)
        case _:
            simulation = simulate(system, scenario.process_noise, scenario.measurement_noise, sim_seed)
            z = simulation.measurements
    problem = build_primal(system, f, g, z)
    name = scenario.name or "<unnamed>"
    logger.info(f"Assembled scenario {name}: T={system.horizon}, n_x={system.state_dim}, n_z={system.meas_dim}")
    return ScenarioRun(
        scenario=scenario, system=system, problem=problem, simulation=simulation, seed=seed, base_dir=base_dir
    )


def _fmt(value: float | int) -> str:
    if isinstance(value, (int, np.integer)):
        return str(value)
    return format(float(value), config.csv_float_format)


def write_csv(path: str | Path, header: Sequence[str], rows: Sequence[Sequence[float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows([_fmt(v) for v in row] for row in rows)
    logger.debug(f"Wrote {path}")
    return path


def write_trajectories(path: str | Path, columns: dict[str, NDArray]) -> Path:
    """One row per time step: t followed by <prefix>_<i> columns for every supervector."""
    header = ["t"]
    for prefix, array in columns.items():
        header += [f"{prefix}_{i}" for i in range(array.shape[1])]
    steps = next(iter(columns.values())).shape[0]
    rows = [[t, *np.concatenate([array[t] for array in columns.values()])] for t in range(steps)]
    return write_csv(path, header, rows)


def write_trace(path: str | Path, history: Sequence[ConvergenceRecord]) -> Path:
    fields = list(ConvergenceRecord.model_fields)
    return write_csv(path, fields, [[getattr(record, name) for name in fields] for record in history])


def write_json(path: str | Path, model: BaseModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2))
    return path


def _plot_window(lower: float, upper: float) -> tuple[float, float]:
    if math.isfinite(lower) and math.isfinite(upper):
        pad = 0.1 * max(upper - lower, 1.0)
        return lower - pad, upper + pad
    width = config.oracle_grid_margin
    lo = lower - 1.0 if math.isfinite(lower) else (upper - 2 * width if math.isfinite(upper) else -width)
    hi = upper + 1.0 if math.isfinite(upper) else (lower + 2 * width if math.isfinite(lower) else width)
    return lo, hi


def write_penalty_grids(out_dir: str | Path, penalty: Penalty, points: int | None = None) -> tuple[Path, Path]:
    """Tabulate a 1-D penalty and its conjugate as penalty.csv (x, value) and conjugate.csv (y, conjugate)."""
    if penalty.dimension != 1:
        raise InvalidPenaltyError(f"only one-dimensional penalties can be tabulated, got dimension {penalty.dimension}")
    points = points or config.plot_points
    out_dir = Path(out_dir)
    lower, upper = penalty.domain_box()
    xs = np.linspace(*_plot_window(lower[0], upper[0]), points)
    if isinstance(penalty, PiecewiseLinear1D):
        y_window = (penalty.slopes[0] - 1.0, penalty.slopes[-1] + 1.0)
    else:
        y_lower, y_upper = penalty.conjugate_domain_box()
        y_window = _plot_window(y_lower[0], y_upper[0])
    ys = np.linspace(*y_window, points)
    values = penalty.value(xs[:, None])
    conjugates = penalty.conjugate_value(ys[:, None])
    return (
        write_csv(out_dir / "penalty.csv", ["x", "value"], np.column_stack([xs, values])),
        write_csv(out_dir / "conjugate.csv", ["y", "conjugate"], np.column_stack([ys, conjugates])),
    )
