import numpy as np
import pytest
from dualsmooth.engine.model import LinearSystem
from dualsmooth.engine.penalty import Quadratic, laplace_penalty
from dualsmooth.engine.problems import build_primal

from tests.engine.generators import EXAMPLE_DYNAMICS, EXAMPLE_MEASUREMENT, PENALTY_CASES, generate_system


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def example_system():
    return LinearSystem.time_invariant(EXAMPLE_DYNAMICS, EXAMPLE_MEASUREMENT, horizon=10)


@pytest.fixture
def scalar_problem():
    """T=0, f = x^2/2, g = v^2/2, H = 1, z = 1; optimum x = u = 0.5 with value 0.25."""
    system = LinearSystem(dynamics=np.zeros((0, 1, 1)), measurement=np.ones((1, 1, 1)))
    return build_primal(system, Quadratic([[1.0]]), Quadratic([[1.0]]), [[1.0]])


@pytest.fixture
def gaussian_problem(rng):
    system = generate_system(rng, horizon=6, state_dim=2, meas_dim=1)
    z = rng.standard_normal((system.num_blocks, 1))
    return build_primal(system, Quadratic(np.eye(2)), Quadratic([[2.0]]), z)


@pytest.fixture
def laplace_problem(example_system, rng):
    z = rng.standard_normal((example_system.num_blocks, 1))
    return build_primal(example_system, Quadratic(np.eye(2)), laplace_penalty(1.0), z)


@pytest.fixture(params=sorted(PENALTY_CASES))
def penalty(request):
    return PENALTY_CASES[request.param]()
