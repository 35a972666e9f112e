from dualsmooth.engine.logconcave import MLEDensity, fit_logconcave_mle, penalty_from_mle
from dualsmooth.engine.model import LinearSystem, adjoint_states, residuals, states_from_noise
from dualsmooth.engine.penalty import (
    Monitoring,
    Penalty,
    PiecewiseLinear1D,
    Quadratic,
    SeparablePenalty,
    ZeroIndicator,
)
from dualsmooth.engine.problems import (
    DualityCertificate,
    DualProblem,
    PrimalProblem,
    build_dual,
    build_primal,
    certify_strong_duality,
    dual_objective,
    duality_gap,
    primal_objective,
)
from dualsmooth.engine.sim import SimulationResult, simulate
from dualsmooth.engine.solver import (
    Solution,
    reconstruct_primal_from_dual,
    solve_dual_first_order,
    solve_first_order,
    solve_quadratic_direct,
)

__all__ = [
    # System
    "LinearSystem",
    "states_from_noise",
    "adjoint_states",
    "residuals",
    # Penalties
    "Penalty",
    "Quadratic",
    "Monitoring",
    "PiecewiseLinear1D",
    "ZeroIndicator",
    "SeparablePenalty",
    # Problems
    "PrimalProblem",
    "DualProblem",
    "DualityCertificate",
    "build_primal",
    "build_dual",
    "primal_objective",
    "dual_objective",
    "duality_gap",
    "certify_strong_duality",
    # Solvers
    "Solution",
    "solve_first_order",
    "solve_dual_first_order",
    "solve_quadratic_direct",
    "reconstruct_primal_from_dual",
    # Densities and simulation
    "MLEDensity",
    "fit_logconcave_mle",
    "penalty_from_mle",
    "SimulationResult",
    "simulate",
]
