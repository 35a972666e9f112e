import numpy as np
import pytest
from dualsmooth.engine.exceptions import DimensionMismatchError
from dualsmooth.engine.model import (
    BlockStructure,
    LinearSystem,
    adjoint_states,
    apply_dynamics,
    apply_dynamics_adjoint,
    apply_measurement,
    apply_measurement_adjoint,
    as_supervector,
    build_dynamics_supermatrix,
    build_measurement_supermatrix,
    residuals,
    solve_dynamics_adjoint,
    states_from_noise,
)
from dualsmooth.models import SystemSpec

from tests.engine.generators import generate_system


class TestLinearSystem:
    def test_from_spec_broadcasts(self):
        spec = SystemSpec(horizon=3, dynamics=[[1.0, 1.0], [0.0, 1.0]], measurement=[[1.0, 1.0]])
        system = LinearSystem.from_spec(spec)
        assert system.horizon == 3
        assert system.num_blocks == 4
        assert system.state_dim == 2
        assert system.meas_dim == 1
        assert system.dynamics.shape == (3, 2, 2)

    def test_horizon_zero(self):
        system = LinearSystem.from_spec(SystemSpec(horizon=0, measurement=[[1.0, 0.0]]))
        assert system.dynamics.shape == (0, 2, 2)

    def test_arrays_are_read_only(self, example_system):
        with pytest.raises(ValueError):
            example_system.dynamics[0, 0, 0] = 5.0

    def test_dynamics_shape_checked(self):
        with pytest.raises(DimensionMismatchError):
            LinearSystem(dynamics=np.zeros((2, 2, 2)), measurement=np.zeros((2, 1, 2)))


class TestSupermatrices:
    def test_dynamics_scalar_example(self):
        system = LinearSystem(dynamics=np.array([[[2.0]], [[3.0]]]), measurement=np.ones((3, 1, 1)))
        A = build_dynamics_supermatrix(system)
        np.testing.assert_array_equal(A.dense, [[1, 0, 0], [-2, 1, 0], [0, -3, 1]])
        assert A.structure == BlockStructure.LOWER_BIDIAGONAL

    def test_measurement_sum_of_components(self):
        system = LinearSystem.time_invariant([[1.0, 1.0], [0.0, 1.0]], [[1.0, 1.0]], horizon=1)
        H = build_measurement_supermatrix(system)
        np.testing.assert_array_equal(H.dense, [[1, 1, 0, 0], [0, 0, 1, 1]])
        assert H.structure == BlockStructure.BLOCK_DIAGONAL
        np.testing.assert_array_equal(H.block(1, 1), [[1, 1]])

    def test_measurement_identity_at_horizon_zero(self):
        system = LinearSystem(dynamics=np.zeros((0, 3, 3)), measurement=np.eye(3)[None])
        np.testing.assert_array_equal(build_measurement_supermatrix(system).dense, np.eye(3))

    def test_scalar_measurement_diagonal(self):
        system = LinearSystem(dynamics=np.ones((2, 1, 1)), measurement=np.array([[[2.0]], [[3.0]], [[4.0]]]))
        np.testing.assert_array_equal(build_measurement_supermatrix(system).dense, np.diag([2.0, 3.0, 4.0]))

    def test_recursions_match_dense(self, rng):
        system = generate_system(rng, horizon=5, state_dim=3, meas_dim=2)
        A = build_dynamics_supermatrix(system)
        H = build_measurement_supermatrix(system)
        x = rng.standard_normal((6, 3))
        u = rng.standard_normal((6, 2))
        y = rng.standard_normal((6, 3))
        np.testing.assert_allclose(apply_dynamics(system, x), A @ x, atol=1e-12)
        np.testing.assert_allclose(apply_measurement(system, x), H @ x, atol=1e-12)
        np.testing.assert_allclose(apply_dynamics_adjoint(system, y).ravel(), A.dense.T @ y.ravel(), atol=1e-12)
        np.testing.assert_allclose(apply_measurement_adjoint(system, u).ravel(), H.dense.T @ u.ravel(), atol=1e-12)


class TestStatesFromNoise:
    def test_hand_example(self):
        system = LinearSystem.time_invariant([[1.0, 1.0], [0.0, 1.0]], [[1.0, 1.0]], horizon=1)
        x = states_from_noise(system, [[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(x, [[1.0, 0.0], [1.0, 1.0]])

    def test_initial_noise_only(self, rng):
        system = generate_system(rng, horizon=4, state_dim=2, meas_dim=1)
        w = np.zeros((5, 2))
        w[0] = [1.0, -2.0]
        x = states_from_noise(system, w)
        expected = w[0]
        for t in range(4):
            expected = system.dynamics[t] @ expected
            np.testing.assert_allclose(x[t + 1], expected, atol=1e-14)

    def test_zero_noise(self, example_system):
        np.testing.assert_array_equal(states_from_noise(example_system, np.zeros((11, 2))), 0.0)

    def test_matches_dense_solve(self, rng):
        system = generate_system(rng, horizon=8, state_dim=3, meas_dim=1)
        w = rng.standard_normal((9, 3))
        dense = np.linalg.solve(build_dynamics_supermatrix(system).dense, w.ravel())
        np.testing.assert_allclose(states_from_noise(system, w).ravel(), dense, atol=1e-10)

    def test_dimension_mismatch(self, example_system):
        with pytest.raises(DimensionMismatchError):
            states_from_noise(example_system, np.zeros((10, 2)))


class TestResiduals:
    def test_round_trip(self, rng):
        system = generate_system(rng, horizon=7, state_dim=2, meas_dim=2)
        w = rng.standard_normal((8, 2))
        z = rng.standard_normal((8, 2))
        w_back, _ = residuals(system, states_from_noise(system, w), z)
        np.testing.assert_allclose(w_back, w, atol=1e-12)

    def test_exact_measurements_leave_no_residual(self, example_system, rng):
        x = rng.standard_normal((11, 2))
        _, v = residuals(example_system, x, apply_measurement(example_system, x))
        np.testing.assert_array_equal(v, 0.0)

    def test_scalar_example(self):
        system = LinearSystem(dynamics=np.zeros((0, 2, 2)), measurement=np.array([[[1.0, 1.0]]]))
        _, v = residuals(system, [[1.0, 2.0]], [[5.0]])
        np.testing.assert_array_equal(v, [[2.0]])


class TestAdjointStates:
    def test_dual_feasibility_is_exact(self, rng):
        system = generate_system(rng, horizon=9, state_dim=3, meas_dim=2)
        u = rng.standard_normal((10, 2))
        y = adjoint_states(system, u)
        mismatch = apply_dynamics_adjoint(system, y) - apply_measurement_adjoint(system, u)
        assert np.linalg.norm(mismatch) <= 1e-12 * max(1.0, np.linalg.norm(u))

    def test_terminal_condition(self, rng):
        system = generate_system(rng, horizon=3, state_dim=2, meas_dim=1)
        u = rng.standard_normal((4, 1))
        y = adjoint_states(system, u)
        np.testing.assert_allclose(y[-1], system.measurement[-1].T @ u[-1])
        np.testing.assert_allclose(y[1], system.dynamics[1].T @ y[2] + system.measurement[1].T @ u[1])

    def test_solve_adjoint_inverts_transpose(self, rng):
        system = generate_system(rng, horizon=4, state_dim=2, meas_dim=1)
        r = rng.standard_normal((5, 2))
        np.testing.assert_allclose(apply_dynamics_adjoint(system, solve_dynamics_adjoint(system, r)), r, atol=1e-12)


class TestAsSupervector:
    def test_flat_vector_reshaped(self):
        assert as_supervector(np.arange(6.0), 3, 2).shape == (3, 2)

    def test_scalar_blocks_accept_flat(self):
        assert as_supervector([1.0, 2.0, 3.0], 3, 1).shape == (3, 1)

    def test_mismatch_raises(self):
        with pytest.raises(DimensionMismatchError):
            as_supervector(np.zeros((3, 2)), 2, 3)
