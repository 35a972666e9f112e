import numpy as np
import pytest
from dualsmooth.engine.exceptions import InvalidPenaltyError, NonDifferentiableConjugateError
from dualsmooth.engine.model import LinearSystem, apply_measurement, build_dynamics_supermatrix
from dualsmooth.engine.penalty import POS_INF, PiecewiseLinear1D, Quadratic, ZeroIndicator, laplace_penalty
from dualsmooth.engine.problems import (
    build_dual,
    build_primal,
    dual_objective,
    duality_gap,
    primal_objective,
    restore_dual,
)
from dualsmooth.engine.solver import (
    _best_dual,
    _best_primal,
    operator_norm_estimate,
    reconstruct_primal_from_dual,
    relative_gap_met,
    solve_dual_first_order,
    solve_first_order,
    solve_quadratic_direct,
)
from dualsmooth.models import CertificateStatus, SolverOptions, TerminationReason

from tests.engine.generators import generate_spd, generate_system


def _relative_distance(a, b):
    return np.linalg.norm(a - b) / (1.0 + np.linalg.norm(b))


class TestOperatorNorm:
    def test_bounds_spectral_norm(self, rng):
        K = rng.standard_normal((12, 7))
        exact = np.linalg.norm(K, 2)
        estimate = operator_norm_estimate(K)
        assert exact <= estimate <= 1.02 * exact

    def test_zero_operator(self):
        assert operator_norm_estimate(np.zeros((3, 3))) == 0.0

    def test_dynamics_supermatrix(self, example_system):
        A = build_dynamics_supermatrix(example_system).dense
        assert operator_norm_estimate(A) >= np.linalg.norm(A, 2)


class TestSolveFirstOrder:
    def test_scalar_problem(self, scalar_problem):
        solution = solve_first_order(scalar_problem)
        assert solution.converged
        assert solution.termination == TerminationReason.GAP
        np.testing.assert_allclose(solution.x, [[0.5]], atol=1e-6)
        np.testing.assert_allclose(solution.u, [[0.5]], atol=1e-6)
        assert solution.primal_value == pytest.approx(0.25, abs=1e-8)

    def test_matches_direct_oracle(self, gaussian_problem):
        solution = solve_first_order(gaussian_problem)
        direct = solve_quadratic_direct(gaussian_problem)
        assert solution.converged
        assert _relative_distance(solution.x, direct.x) <= 1e-6
        assert solution.gap <= 1e-8 * (1.0 + abs(solution.primal_value))

    def test_converged_gap_is_self_certifying(self, laplace_problem):
        opts = SolverOptions()
        solution = solve_first_order(laplace_problem, opts)
        assert solution.converged
        recomputed = duality_gap(laplace_problem, solution.x, solution.u)
        assert recomputed <= opts.tol_gap * (1.0 + abs(solution.primal_value))
        assert recomputed >= -1e-10 * (1.0 + abs(solution.primal_value))

    def test_returned_states_are_consistent(self, laplace_problem):
        solution = solve_first_order(laplace_problem)
        F = np.array([[1.0, 1.0], [0.0, 1.0]])
        np.testing.assert_allclose(solution.w[1:], solution.x[1:] - solution.x[:-1] @ F.T)
        assert solution.primal_value == pytest.approx(primal_objective(laplace_problem, solution.x))

    def test_reported_pair_carries_the_best_gap(self, laplace_problem):
        solution = solve_first_order(laplace_problem, SolverOptions(check_every=5))
        assert solution.history
        assert all(record.iteration % 5 == 0 for record in solution.history[:-1])
        assert solution.history[-1].best_gap == solution.gap
        assert all(record.gap >= solution.gap for record in solution.history)
        recomputed = duality_gap(laplace_problem, solution.x, solution.u)
        assert recomputed == pytest.approx(solution.gap, rel=1e-12, abs=1e-15)

    def test_deterministic(self, laplace_problem):
        opts = SolverOptions(max_iters=400, check_every=7, seed=3)
        first = solve_first_order(laplace_problem, opts)
        second = solve_first_order(laplace_problem, opts)
        np.testing.assert_array_equal(first.x, second.x)
        np.testing.assert_array_equal(first.u, second.u)
        assert first.history == second.history

    def test_history_can_be_disabled(self, scalar_problem):
        assert solve_first_order(scalar_problem, SolverOptions(record_history=False)).history == []

    def test_iteration_cap(self, laplace_problem):
        solution = solve_first_order(laplace_problem, SolverOptions(max_iters=5))
        assert solution.iterations == 5
        assert not solution.converged
        assert solution.termination == TerminationReason.MAX_ITERS

    def test_bounded_measurement_domain(self, example_system, rng):
        g = PiecewiseLinear1D([-2.0, -0.5, 0.0, 1.0, 2.5], [3.0, 0.6, 0.0, 0.8, 4.0])
        z = rng.uniform(-1.5, 1.5, (11, 1))
        p = build_primal(example_system, Quadratic(np.eye(2)), g, z)
        solution = solve_first_order(p)
        assert solution.converged
        assert np.isfinite(solution.primal_value)
        assert np.isfinite(solution.dual_value)

    def test_hard_constraints(self, example_system, rng):
        z = rng.standard_normal((11, 1))
        p = build_primal(example_system, Quadratic(np.eye(2)), ZeroIndicator(1), z)
        solution = solve_first_order(p)
        direct = solve_quadratic_direct(p)
        assert solution.converged
        np.testing.assert_allclose(apply_measurement(example_system, solution.x), z, atol=1e-8)
        assert _relative_distance(solution.x, direct.x) <= 1e-6

    def test_infeasible_problem_does_not_converge(self):
        system = LinearSystem.time_invariant([[1.0]], [[1.0]], horizon=2)
        p = build_primal(system, ZeroIndicator(1), ZeroIndicator(1), [[0.0], [1.0], [0.0]])
        solution = solve_first_order(p, SolverOptions(max_iters=500))
        assert not solution.converged
        assert solution.certificate.status == CertificateStatus.UNKNOWN
        assert solution.termination in (TerminationReason.MAX_ITERS, TerminationReason.DIVERGED)

    def test_summary(self, scalar_problem):
        summary = solve_first_order(scalar_problem).summary()
        assert summary.method == "first-order"
        assert summary.horizon == 0
        assert summary.state_dim == 1
        assert summary.converged
        assert summary.certificate == CertificateStatus.PLQ_AUTOMATIC


class TestCandidateSelection:
    @pytest.fixture
    def boundary_problem(self):
        """x^2/2 subject to 2 - x in [-1, 1]; the optimum x = 1 sits on the domain boundary."""
        system = LinearSystem(dynamics=np.zeros((0, 1, 1)), measurement=np.ones((1, 1, 1)))
        return build_primal(system, Quadratic([[1.0]]), PiecewiseLinear1D([-1.0, 1.0], [0.0, 0.0]), [[2.0]])

    def test_restored_last_iterate_beats_poor_average(self, boundary_problem):
        infeasible, poor = np.array([[0.9]]), np.array([[2.0]])
        assert primal_objective(boundary_problem, infeasible) == POS_INF
        value, x = _best_primal(boundary_problem, [infeasible, poor], restore=True)
        assert value == pytest.approx(0.5, abs=1e-6)
        assert 1.0 <= x[0, 0] <= 1.0 + 1e-6

    def test_no_restoration_when_not_allowed(self, boundary_problem):
        value, x = _best_primal(boundary_problem, [np.array([[0.9]]), np.array([[2.0]])], restore=False)
        assert value == pytest.approx(2.0)
        np.testing.assert_array_equal(x, [[2.0]])

    def test_dual_candidates_are_restored(self, laplace_problem, rng):
        d = build_dual(laplace_problem)
        outside = np.full((11, 1), 3.0)
        feasible = rng.uniform(-0.5, 0.5, (11, 1))
        value, u = _best_dual(d, [outside, feasible], restore=True)
        candidates = [dual_objective(d, feasible)[0], dual_objective(d, restore_dual(d, outside))[0]]
        assert value == pytest.approx(max(candidates))
        assert np.all(np.abs(u) <= 1.0)


class TestSolveQuadraticDirect:
    def test_scalar_problem(self, scalar_problem):
        solution = solve_quadratic_direct(scalar_problem)
        np.testing.assert_allclose(solution.x, [[0.5]])
        np.testing.assert_allclose(solution.u, [[0.5]])
        assert solution.gap == pytest.approx(0.0, abs=1e-14)

    def test_converged_uses_gap_tolerance(self, scalar_problem):
        solution = solve_quadratic_direct(scalar_problem, SolverOptions(tol_gap=1e-12))
        assert solution.converged is relative_gap_met(solution.primal_value, solution.gap, 1e-12)
        assert solution.converged

    @pytest.mark.parametrize(
        ("primal_value", "gap", "expected"),
        [(1.0, 1e-9, True), (1.0, -1e-12, True), (1.0, 1e-7, False), (1e6, 1e-3, True), (1.0, float("inf"), False)],
    )
    def test_relative_gap_met(self, primal_value, gap, expected):
        assert relative_gap_met(primal_value, gap, 1e-8) is expected

    def test_time_varying_weights(self, rng):
        system = generate_system(rng, horizon=5, state_dim=3, meas_dim=2)
        f = [Quadratic(generate_spd(rng, 3)) for _ in range(6)]
        g = [Quadratic(generate_spd(rng, 2)) for _ in range(6)]
        p = build_primal(system, f, g, rng.standard_normal((6, 2)))
        solution = solve_quadratic_direct(p)
        assert abs(solution.gap) <= 1e-9 * (1.0 + abs(solution.primal_value))

    def test_kalman_constraints(self, example_system, rng):
        z = rng.standard_normal((11, 1))
        p = build_primal(example_system, Quadratic(np.eye(2)), ZeroIndicator(1), z)
        solution = solve_quadratic_direct(p)
        np.testing.assert_allclose(apply_measurement(example_system, solution.x), z, atol=1e-10)
        assert abs(solution.gap) <= 1e-9 * (1.0 + abs(solution.primal_value))

    def test_rejects_non_quadratic(self, laplace_problem):
        with pytest.raises(InvalidPenaltyError):
            solve_quadratic_direct(laplace_problem)

    def test_rejects_singular_process_weight(self, example_system):
        p = build_primal(example_system, Quadratic(np.zeros((2, 2))), Quadratic([[1.0]]), np.zeros((11, 1)))
        with pytest.raises(InvalidPenaltyError):
            solve_quadratic_direct(p)


class TestSolveDualFirstOrder:
    def test_scalar_problem(self, scalar_problem):
        solution = solve_dual_first_order(build_dual(scalar_problem))
        assert solution.converged
        assert solution.method == "dual-first-order"
        np.testing.assert_allclose(solution.u, [[0.5]], atol=1e-6)

    def test_agrees_with_primal(self, gaussian_problem):
        dual = solve_dual_first_order(build_dual(gaussian_problem))
        direct = solve_quadratic_direct(gaussian_problem)
        assert dual.converged
        assert dual.dual_value == pytest.approx(direct.primal_value, rel=1e-7, abs=1e-7)

    def test_laplace_measurements(self, laplace_problem):
        dual = solve_dual_first_order(build_dual(laplace_problem))
        primal = solve_first_order(laplace_problem)
        assert dual.converged
        assert dual.termination == TerminationReason.GAP
        assert np.all(np.abs(dual.u) <= 1.0 + 1e-12)
        assert dual.dual_value == pytest.approx(primal.primal_value, rel=1e-6, abs=1e-6)


class TestReconstruction:
    def test_recovers_direct_solution(self, gaussian_problem):
        d = build_dual(gaussian_problem)
        dual = solve_dual_first_order(d)
        direct = solve_quadratic_direct(gaussian_problem)
        w, x = reconstruct_primal_from_dual(d, dual.u)
        assert _relative_distance(x, direct.x) <= 1e-5
        np.testing.assert_allclose(w, dual.w, atol=1e-5)

    def test_exact_at_direct_controls(self, gaussian_problem):
        direct = solve_quadratic_direct(gaussian_problem)
        _, x = reconstruct_primal_from_dual(build_dual(gaussian_problem), direct.u)
        np.testing.assert_allclose(x, direct.x, atol=1e-9)

    def test_singular_process_weight_raises(self, example_system):
        p = build_primal(example_system, Quadratic(np.zeros((2, 2))), Quadratic([[1.0]]), np.zeros((11, 1)))
        with pytest.raises(NonDifferentiableConjugateError):
            reconstruct_primal_from_dual(build_dual(p), np.ones((11, 1)))

    def test_explicit_penalties(self, gaussian_problem):
        direct = solve_quadratic_direct(gaussian_problem)
        f = [Quadratic(np.eye(2))] * gaussian_problem.system.num_blocks
        _, x = reconstruct_primal_from_dual(build_dual(gaussian_problem), direct.u, f)
        np.testing.assert_allclose(x, direct.x, atol=1e-9)

    def test_laplace_process_noise_is_not_smooth(self, example_system):
        p = build_primal(example_system, laplace_penalty(1.0, dimension=2), Quadratic([[1.0]]), np.zeros((11, 1)))
        u = np.zeros((11, 1))
        u[-1] = 5.0
        with pytest.raises(NonDifferentiableConjugateError):
            reconstruct_primal_from_dual(build_dual(p), u)
