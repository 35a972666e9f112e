"""Primal-dual solvers for the smoothing problem and its dual control problem."""

import logging
import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from itertools import islice

import numpy as np
import scipy.linalg
from dualsmooth.engine.config import config
from dualsmooth.engine.exceptions import InvalidPenaltyError, SingularSystemError
from dualsmooth.engine.model import (
    Supervector,
    adjoint_states,
    apply_dynamics,
    apply_dynamics_adjoint,
    apply_measurement,
    apply_measurement_adjoint,
    as_supervector,
    build_dynamics_supermatrix,
    build_measurement_supermatrix,
    states_from_noise,
)
from dualsmooth.engine.penalty import POS_INF, Penalty, Quadratic, SeparablePenalty, ZeroIndicator
from dualsmooth.engine.problems import (
    NEG_INF,
    DualityCertificate,
    DualProblem,
    PrimalProblem,
    build_dual,
    certify_strong_duality,
    dual_objective,
    primal_objective,
    restore_dual,
    restore_primal,
)
from dualsmooth.models import (
    CertificateStatus,
    ConvergenceRecord,
    SolutionSummary,
    SolverOptions,
    TerminationReason,
)
from numpy.typing import ArrayLike, NDArray
from scipy.sparse.linalg import LinearOperator, aslinearoperator

logger = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e12
CONDITION_LIMIT = 1e14
# Consecutive stalled gap checks without a better gap before a run ends as RESIDUAL.
STALL_CHECKS = 10


@dataclass(eq=False)
class Solution:
    x: Supervector
    w: Supervector
    u: Supervector
    y: Supervector
    primal_value: float
    dual_value: float
    gap: float
    iterations: int
    converged: bool
    termination: TerminationReason
    method: str
    history: list[ConvergenceRecord] = field(default_factory=list)
    certificate: DualityCertificate | None = None

    def summary(self) -> SolutionSummary:
        return SolutionSummary(
            method=self.method,
            horizon=self.x.shape[0] - 1,
            state_dim=self.x.shape[1],
            primal_value=self.primal_value,
            dual_value=self.dual_value,
            gap=self.gap,
            iterations=self.iterations,
            converged=self.converged,
            termination=self.termination,
            certificate=self.certificate.status if self.certificate else None,
        )


def _gap(primal_value: float, dual_value: float) -> float:
    if primal_value == POS_INF or dual_value == NEG_INF:
        return POS_INF
    return primal_value - dual_value


def relative_gap_met(primal_value: float, gap: float, tol: float) -> bool:
    return bool(math.isfinite(gap) and gap <= tol * (1.0 + abs(primal_value)))


def operator_norm_estimate(
    K: LinearOperator | ArrayLike,
    max_iter: int = 200,
    tol: float = 1e-12,
    inflation: float = 1.01,
    seed: int = 0,
) -> float:
    """Power iteration on K'K; the estimate is inflated so it bounds ||K|| safely."""
    K = aslinearoperator(K)
    v = np.random.default_rng(seed).standard_normal(K.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for i in range(max_iter):
        w = K.rmatvec(K.matvec(v))
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        previous, estimate = estimate, math.sqrt(norm_w)
        v = w / norm_w
        if abs(estimate - previous) <= tol * estimate:
            logger.debug(f"Power iteration converged after {i + 1} iterations")
            break
    return inflation * estimate


def _pdhg_iterates(
    op: Callable[[NDArray], NDArray],
    adj: Callable[[NDArray], NDArray],
    prox_primal: Callable[[NDArray, float], NDArray],
    prox_dual: Callable[[NDArray, float], NDArray],
    x: NDArray,
    lam: NDArray,
    tau: float,
    sigma: float,
    theta: float,
) -> Iterator[tuple[int, NDArray, NDArray, NDArray, NDArray, float]]:
    """Chambolle-Pock iterates with running ergodic averages.

    Yields (k, x, lam, x_avg, lam_avg, residual), where residual is the
    relative size of the last step.
    """
    x_bar = x.copy()
    x_sum = np.zeros_like(x)
    lam_sum = np.zeros_like(lam)
    k = 0
    while True:
        k += 1
        lam_new = prox_dual(lam + sigma * op(x_bar), sigma)
        x_new = prox_primal(x - tau * adj(lam_new), tau)
        x_bar = x_new + theta * (x_new - x)
        step = math.sqrt(np.sum((x_new - x) ** 2) + np.sum((lam_new - lam) ** 2))
        scale = 1.0 + math.sqrt(np.sum(x_new**2) + np.sum(lam_new**2))
        x, lam = x_new, lam_new
        x_sum += x
        lam_sum += lam
        yield k, x, lam, x_sum / k, lam_sum / k, step / scale


@dataclass
class _Best:
    primal_value: float
    x: Supervector
    dual_value: float
    u: Supervector

    @property
    def gap(self) -> float:
        return _gap(self.primal_value, self.dual_value)


def _best_primal(p: PrimalProblem, candidates: list[Supervector], restore: bool) -> tuple[float, Supervector]:
    """Lowest primal value among the candidates, restoring each infeasible one when allowed."""
    best_value, best_x = POS_INF, candidates[0]
    for x in candidates:
        value = primal_objective(p, x)
        if value == POS_INF and restore:
            restored = restore_primal(p, x)
            if restored is not None:
                x, value = restored, primal_objective(p, restored)
        if value < best_value:
            best_value, best_x = value, x
    return best_value, best_x


def _best_dual(d: DualProblem, candidates: list[Supervector], restore: bool) -> tuple[float, Supervector]:
    best_value, best_u = NEG_INF, candidates[0]
    for u in candidates:
        value = dual_objective(d, u)[0]
        if value == NEG_INF and restore:
            restored = restore_dual(d, u)
            if restored is not None:
                u, value = restored, dual_objective(d, restored)[0]
        if value > best_value:
            best_value, best_u = value, u
    return best_value, best_u


def _run(
    p: PrimalProblem,
    opts: SolverOptions,
    method: str,
    norm: float,
    op: Callable[[NDArray], NDArray],
    adj: Callable[[NDArray], NDArray],
    prox_primal: Callable[[NDArray, float], NDArray],
    prox_dual: Callable[[NDArray, float], NDArray],
    primal0: NDArray,
    dual0: NDArray,
    estimates: Callable[[NDArray, NDArray], tuple[Supervector, Supervector]],
) -> Solution:
    d = build_dual(p)
    tau = 1.0 / (norm * math.sqrt(opts.step_ratio))
    sigma = math.sqrt(opts.step_ratio) / norm
    logger.info(f"Starting {method}: T={p.system.horizon}, |K|~{norm:.4g}, tau={tau:.4g}, sigma={sigma:.4g}")

    x0, u0 = estimates(primal0, dual0)
    best = _Best(primal_objective(p, x0), x0, dual_objective(d, u0)[0], u0)
    history: list[ConvergenceRecord] = []
    termination = TerminationReason.MAX_ITERS
    iterations = 0
    stalled_checks = 0
    iterates = _pdhg_iterates(op, adj, prox_primal, prox_dual, primal0, dual0, tau, sigma, opts.theta)
    for k, var, lam, var_avg, lam_avg, residual in islice(iterates, opts.max_iters):
        iterations = k
        if not (np.all(np.isfinite(var)) and np.all(np.isfinite(lam))) or max(
            np.max(np.abs(var)), np.max(np.abs(lam))
        ) > DIVERGENCE_BOUND:
            logger.warning(f"{method} diverged at iteration {k}; the problem may be infeasible")
            termination = TerminationReason.DIVERGED
            break
        last = k == opts.max_iters
        if k % opts.check_every and not last:
            continue

        stalled = residual <= opts.tol_residual
        restore = last or stalled or residual <= config.restore_residual
        x_last, u_last = estimates(var, lam)
        x_avg, u_avg = estimates(var_avg, lam_avg)
        primal_value, x = _best_primal(p, [x_last, x_avg], restore)
        dual_value, u = _best_dual(d, [u_last, u_avg], restore)
        previous_gap = best.gap
        if primal_value < best.primal_value:
            best.primal_value, best.x = primal_value, x
        if dual_value > best.dual_value:
            best.dual_value, best.u = dual_value, u
        # Only stalls that no longer shrink the best gap count towards RESIDUAL.
        stalled_checks = stalled_checks + 1 if stalled and not best.gap < previous_gap else 0

        if opts.record_history:
            history.append(
                ConvergenceRecord(
                    iteration=k,
                    primal_value=primal_value,
                    dual_value=dual_value,
                    gap=_gap(primal_value, dual_value),
                    best_gap=best.gap,
                    residual=residual,
                )
            )
        logger.debug(
            f"{method} k={k}: primal={primal_value:.10g} dual={dual_value:.10g} gap={best.gap:.3e} res={residual:.3e}"
        )
        if relative_gap_met(best.primal_value, best.gap, opts.tol_gap):
            # A certified gap still waits for the iterates to settle.
            if residual <= opts.tol_step or last or stalled_checks >= STALL_CHECKS:
                termination = TerminationReason.GAP
                break
        elif stalled_checks >= STALL_CHECKS:
            termination = TerminationReason.RESIDUAL
            break

    converged = relative_gap_met(best.primal_value, best.gap, opts.tol_gap)
    if converged:
        logger.info(f"{method} converged in {iterations} iterations, gap {best.gap:.3e}")
    else:
        logger.warning(f"{method} stopped ({termination.value}) after {iterations} iterations, gap {best.gap:.3e}")
    return Solution(
        x=best.x,
        w=apply_dynamics(p.system, best.x),
        u=best.u,
        y=adjoint_states(p.system, best.u),
        primal_value=best.primal_value,
        dual_value=best.dual_value,
        gap=best.gap,
        iterations=iterations,
        converged=converged,
        termination=termination,
        method=method,
        history=history,
    )


def _certify(p: PrimalProblem) -> DualityCertificate:
    certificate = certify_strong_duality(p)
    if certificate.status == CertificateStatus.UNKNOWN:
        logger.warning("Strong duality could not be certified; solving anyway")
    return certificate


def solve_first_order(p: PrimalProblem, opts: SolverOptions | None = None) -> Solution:
    """Primal-dual hybrid gradient on min_x f(Ax) + g(z - Hx).

    The dual variable is split as (lambda_A, lambda_H); the returned controls
    are u = -lambda_H, and y is regenerated from u by the backward recursion.
    """
    opts = opts or SolverOptions()
    system = p.system
    n, m, blocks = system.state_dim, system.meas_dim, system.num_blocks
    certificate = _certify(p)

    def op(x: NDArray) -> NDArray:
        return np.hstack([apply_dynamics(system, x), apply_measurement(system, x)])

    def adj(lam: NDArray) -> NDArray:
        return apply_dynamics_adjoint(system, lam[:, :n]) + apply_measurement_adjoint(system, lam[:, n:])

    def prox_dual(v: NDArray, sigma: float) -> NDArray:
        # prox of sigma * g~* with g~(q) = g(z - q), g~*(l) = z'l + g*(-l)
        return np.hstack([p.f.conjugate_prox(v[:, :n], sigma), -p.g.conjugate_prox(sigma * p.z - v[:, n:], sigma)])

    K = LinearOperator(
        shape=(blocks * (n + m), blocks * n),
        matvec=lambda x: op(x.reshape(blocks, n)).ravel(),
        rmatvec=lambda lam: adj(lam.reshape(blocks, n + m)).ravel(),
        dtype=float,
    )
    solution = _run(
        p,
        opts,
        "first-order",
        operator_norm_estimate(K, seed=opts.seed),
        op,
        adj,
        lambda x, tau: x,
        prox_dual,
        np.zeros((blocks, n)),
        np.zeros((blocks, n + m)),
        lambda x, lam: (x, -lam[:, n:]),
    )
    solution.certificate = certificate
    return solution


def solve_dual_first_order(d: DualProblem, opts: SolverOptions | None = None) -> Solution:
    """Primal-dual hybrid gradient on the dual control problem min_u g*(u) - z'u + f*(Bu).

    B maps controls to adjoint states. The auxiliary variable converges to the
    optimal process noise w, from which the reported x is propagated.
    """
    opts = opts or SolverOptions()
    system = d.system
    n, m, blocks = system.state_dim, system.meas_dim, system.num_blocks
    p = PrimalProblem(system=system, f=d.f, g=d.g, z=d.z)
    certificate = _certify(p)

    def op(u: NDArray) -> NDArray:
        return adjoint_states(system, u)

    def adj(omega: NDArray) -> NDArray:
        return apply_measurement(system, states_from_noise(system, omega))

    B = LinearOperator(
        shape=(blocks * n, blocks * m),
        matvec=lambda u: op(u.reshape(blocks, m)).ravel(),
        rmatvec=lambda omega: adj(omega.reshape(blocks, n)).ravel(),
        dtype=float,
    )
    solution = _run(
        p,
        opts,
        "dual-first-order",
        operator_norm_estimate(B, seed=opts.seed),
        op,
        adj,
        lambda v, tau: d.g.conjugate_prox(v + tau * d.z, tau),
        d.f.prox,
        np.zeros((blocks, m)),
        np.zeros((blocks, n)),
        lambda u, omega: (states_from_noise(system, omega), u),
    )
    solution.certificate = certificate
    return solution


def _block_diag(matrices: list[NDArray]) -> NDArray:
    if not matrices:
        return np.zeros((0, 0))
    return scipy.linalg.block_diag(*matrices)


def _solve_checked(matrix: NDArray, rhs: NDArray, what: str) -> NDArray:
    cond = np.linalg.cond(matrix)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularSystemError(
            f"{what} is singular or ill-conditioned (condition number {cond:.3e}); "
            "measurements may be inconsistent or the states underdetermined",
            context={"condition_number": float(cond) if np.isfinite(cond) else None},
        )
    try:
        return scipy.linalg.solve(matrix, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise SingularSystemError(f"{what} could not be solved: {e}") from e


def solve_quadratic_direct(p: PrimalProblem, opts: SolverOptions | None = None) -> Solution:
    """Normal equations (Gaussian g) or KKT system (hard measurement constraints).

    Only ``opts.tol_gap`` is used: it decides ``converged`` for the exact solve.
    """
    opts = opts or SolverOptions()
    system = p.system
    n, m, blocks = system.state_dim, system.meas_dim, system.num_blocks
    for t, f_t in enumerate(p.f):
        if not isinstance(f_t, Quadratic) or not f_t.is_positive_definite:
            raise InvalidPenaltyError(f"direct solve needs positive definite quadratic process penalties (step {t})")
    quadratic = [t for t, g_t in enumerate(p.g) if isinstance(g_t, Quadratic)]
    hard = [t for t, g_t in enumerate(p.g) if isinstance(g_t, ZeroIndicator)]
    if len(quadratic) + len(hard) != blocks:
        raise InvalidPenaltyError("direct solve needs quadratic or zero-indicator measurement penalties")

    A = build_dynamics_supermatrix(system).dense
    H = build_measurement_supermatrix(system).dense
    z = p.z.ravel()

    def rows(steps: list[int]) -> NDArray:
        if not steps:
            return np.zeros(0, dtype=int)
        return np.concatenate([np.arange(t * m, (t + 1) * m) for t in steps])

    q_rows, e_rows = rows(quadratic), rows(hard)
    M_f = _block_diag([f_t.M for f_t in p.f])
    M_g = _block_diag([p.g[t].M for t in quadratic])
    H_q, H_e = H[q_rows], H[e_rows]

    S = A.T @ M_f @ A + H_q.T @ M_g @ H_q
    rhs = H_q.T @ M_g @ z[q_rows]
    if hard:
        kkt = np.block([[S, H_e.T], [H_e, np.zeros((len(e_rows), len(e_rows)))]])
        sol = _solve_checked(kkt, np.concatenate([rhs, z[e_rows]]), "KKT system")
        x_flat, nu = sol[: blocks * n], sol[blocks * n :]
    else:
        x_flat, nu = _solve_checked(S, rhs, "normal equations"), np.zeros(0)

    u_flat = np.zeros(blocks * m)
    u_flat[q_rows] = M_g @ (z[q_rows] - H_q @ x_flat)
    u_flat[e_rows] = -nu
    x = x_flat.reshape(blocks, n)
    u = u_flat.reshape(blocks, m)
    primal_value = primal_objective(p, x)
    dual_value, y = dual_objective(build_dual(p), u)
    gap = _gap(primal_value, dual_value)
    logger.info(f"Direct solve: primal={primal_value:.10g} dual={dual_value:.10g} gap={gap:.3e}")
    return Solution(
        x=x,
        w=apply_dynamics(system, x),
        u=u,
        y=y,
        primal_value=primal_value,
        dual_value=dual_value,
        gap=gap,
        iterations=0,
        converged=relative_gap_met(primal_value, gap, opts.tol_gap),
        termination=TerminationReason.GAP,
        method="direct",
    )


def reconstruct_primal_from_dual(
    d: DualProblem,
    u: ArrayLike,
    f_penalties: SeparablePenalty | list[Penalty] | None = None,
) -> tuple[Supervector, Supervector]:
    """(w, x) with w_t the gradient of f_t* at the adjoint state y_t and x = A^{-1} w."""
    f = d.f if f_penalties is None else f_penalties
    if not isinstance(f, SeparablePenalty):
        f = SeparablePenalty(f)
    u = as_supervector(u, d.system.num_blocks, d.system.meas_dim, "u")
    y = adjoint_states(d.system, u)
    w = f.conjugate_gradient(y)
    return w, states_from_noise(d.system, w)
