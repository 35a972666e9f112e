"""MAP smoothing problem, its dual control problem, and the duality gap.

The primal problem minimizes f(Ax) + g(z - Hx) over state supervectors x.
The dual maximizes z'u - f*(y) - g*(u) over controls u, with the adjoint
states y generated from u by the backward recursion so that A'y = H'u holds
by construction.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from dualsmooth.engine.config import config
from dualsmooth.engine.exceptions import DimensionMismatchError, UndefinedGapError
from dualsmooth.engine.model import (
    LinearSystem,
    Supervector,
    adjoint_states,
    apply_dynamics,
    apply_measurement,
    as_supervector,
    build_dynamics_supermatrix,
    build_measurement_supermatrix,
    residuals,
    states_from_noise,
)
from dualsmooth.engine.penalty import POS_INF, Penalty, SeparablePenalty
from dualsmooth.models import CertificateStatus
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

NEG_INF = -math.inf

PenaltyBank = SeparablePenalty | Sequence[Penalty] | Penalty


@dataclass(frozen=True, eq=False)
class PrimalProblem:
    system: LinearSystem
    f: SeparablePenalty
    g: SeparablePenalty
    z: Supervector

    @property
    def is_plq(self) -> bool:
        return self.f.is_plq and self.g.is_plq


@dataclass(frozen=True, eq=False)
class DualProblem:
    """Dual control problem; f and g are the primal penalties, used through their conjugates."""

    system: LinearSystem
    f: SeparablePenalty
    g: SeparablePenalty
    z: Supervector


@dataclass(frozen=True, eq=False)
class DualityCertificate:
    status: CertificateStatus
    witness: tuple[Supervector, Supervector] | None = None
    strict_witness: tuple[Supervector, Supervector] | None = None
    detail: str = ""

    @property
    def certified(self) -> bool:
        return self.status != CertificateStatus.UNKNOWN


def _as_bank(penalties: PenaltyBank, num_blocks: int, block_dim: int, what: str) -> SeparablePenalty:
    if isinstance(penalties, Penalty):
        bank = SeparablePenalty.repeated(penalties, num_blocks)
    elif isinstance(penalties, SeparablePenalty):
        bank = penalties
    else:
        penalties = list(penalties)
        if len(penalties) == 1:
            penalties = penalties * num_blocks
        bank = SeparablePenalty(penalties)
    if bank.num_blocks != num_blocks or bank.block_dim != block_dim:
        raise DimensionMismatchError(what, (num_blocks, block_dim), (bank.num_blocks, bank.block_dim))
    return bank


def build_primal(
    system: LinearSystem, f_penalties: PenaltyBank, g_penalties: PenaltyBank, z: ArrayLike
) -> PrimalProblem:
    """Assemble the smoothing problem; a single penalty is applied at every time step."""
    blocks = system.num_blocks
    f = _as_bank(f_penalties, blocks, system.state_dim, "process penalties")
    g = _as_bank(g_penalties, blocks, system.meas_dim, "measurement penalties")
    z = np.array(as_supervector(z, blocks, system.meas_dim, "z"), copy=True)
    z.setflags(write=False)
    return PrimalProblem(system=system, f=f, g=g, z=z)


def build_dual(p: PrimalProblem) -> DualProblem:
    return DualProblem(system=p.system, f=p.f, g=p.g, z=p.z)


def primal_objective(p: PrimalProblem, x: ArrayLike) -> float:
    w, v = residuals(p.system, x, p.z)
    f_value = p.f.value(w)
    if f_value == POS_INF:
        return POS_INF
    g_value = p.g.value(v)
    return POS_INF if g_value == POS_INF else f_value + g_value


def dual_objective(d: DualProblem, u: ArrayLike) -> tuple[float, Supervector]:
    """Return z'u - f*(y) - g*(u) and the adjoint states y of u."""
    u = as_supervector(u, d.system.num_blocks, d.system.meas_dim, "u")
    y = adjoint_states(d.system, u)
    g_conj = d.g.conjugate_value(u)
    if g_conj == POS_INF:
        return NEG_INF, y
    f_conj = d.f.conjugate_value(y)
    if f_conj == POS_INF:
        return NEG_INF, y
    return float(np.sum(d.z * u)) - f_conj - g_conj, y


def gap_from_values(primal_value: float, dual_value: float) -> float:
    if primal_value == POS_INF and dual_value == NEG_INF:
        raise UndefinedGapError()
    if primal_value == POS_INF or dual_value == NEG_INF:
        return POS_INF
    return primal_value - dual_value


def duality_gap(p: PrimalProblem, x: ArrayLike, u: ArrayLike) -> float:
    dual_value, _ = dual_objective(build_dual(p), u)
    return gap_from_values(primal_objective(p, x), dual_value)


def saddle_value(p: PrimalProblem, w: ArrayLike, x: ArrayLike, u: ArrayLike, y: ArrayLike) -> float:
    """Lagrangian f(w) + z'u - g*(u) - u'Hx + y'(Ax - w)."""
    system = p.system
    w = as_supervector(w, system.num_blocks, system.state_dim, "w")
    x = as_supervector(x, system.num_blocks, system.state_dim, "x")
    u = as_supervector(u, system.num_blocks, system.meas_dim, "u")
    y = as_supervector(y, system.num_blocks, system.state_dim, "y")
    f_value = p.f.value(w)
    g_conj = p.g.conjugate_value(u)
    if f_value == POS_INF and g_conj == POS_INF:
        raise UndefinedGapError("saddle value is undefined: f(w) = +inf and g*(u) = +inf")
    if f_value == POS_INF:
        return POS_INF
    if g_conj == POS_INF:
        return NEG_INF
    coupling = np.sum(y * (apply_dynamics(system, x) - w)) - np.sum(u * apply_measurement(system, x))
    return float(f_value + np.sum(p.z * u) - g_conj + coupling)


# Feasibility restoration. Every penalty domain is a box, so the feasible
# sets are preimages of boxes under linear maps.


def _shrink(lower: NDArray, upper: NDArray, margin: float) -> tuple[NDArray, NDArray]:
    lower, upper = lower.copy(), upper.copy()
    open_rows = lower < upper
    lo = np.where(open_rows & np.isfinite(lower), lower + margin * (1.0 + np.abs(lower)), lower)
    hi = np.where(open_rows & np.isfinite(upper), upper - margin * (1.0 + np.abs(upper)), upper)
    collapsed = lo > hi
    mid = 0.5 * (lower + upper)
    lo[collapsed] = mid[collapsed]
    hi[collapsed] = mid[collapsed]
    return lo, hi


def _project_equalities(E: NDArray, b: NDArray, x: NDArray) -> NDArray | None:
    x = x + np.linalg.lstsq(E, b - E @ x, rcond=None)[0]
    if np.max(np.abs(E @ x - b)) > 1e-10 * (1.0 + np.max(np.abs(b))):
        return None
    return x


def project_onto_box_preimage(G: NDArray, lower: NDArray, upper: NDArray, x0: NDArray, margin: float) -> NDArray | None:
    """Point close to ``x0`` with ``lower <= G x <= upper``, or None if none is found.

    Open intervals are shrunk inward by ``margin`` (relative) first. Pure
    equality systems are solved by an exact least-squares projection; mixed
    systems go through SLSQP followed by an equality polish.
    """
    lower, upper = _shrink(lower, upper, margin)
    eq = np.isfinite(lower) & (lower == upper)
    has_lo = np.isfinite(lower) & ~eq
    has_hi = np.isfinite(upper) & ~eq
    E, b = G[eq], lower[eq]
    if not (has_lo.any() or has_hi.any()):
        return _project_equalities(E, b, x0) if eq.any() else x0

    G_ineq = np.vstack([G[has_lo], -G[has_hi]])
    h_ineq = np.concatenate([lower[has_lo], -upper[has_hi]])
    constraints = [
        {"type": "ineq", "fun": lambda x: G_ineq @ x - h_ineq, "jac": lambda x: G_ineq},
    ]
    if eq.any():
        constraints.append({"type": "eq", "fun": lambda x: E @ x - b, "jac": lambda x: E})
    result = minimize(
        lambda x: 0.5 * np.sum((x - x0) ** 2),
        x0,
        jac=lambda x: x - x0,
        method="SLSQP",
        constraints=constraints,
        options={"maxiter": 500, "ftol": 1e-14},
    )
    x = result.x
    if eq.any():
        x = _project_equalities(E, b, x)
        if x is None:
            return None
    slack = G_ineq @ x - h_ineq
    if np.any(slack < -1e-12 * (1.0 + np.abs(h_ineq))):
        logger.debug(f"Restoration failed: {result.message}")
        return None
    return x


def restore_primal(p: PrimalProblem, x: ArrayLike, margin: float | None = None) -> Supervector | None:
    """Nearby x with a finite primal objective, or None."""
    margin = config.restore_margin if margin is None else margin
    system = p.system
    x = as_supervector(x, system.num_blocks, system.state_dim, "x")
    if primal_objective(p, x) < POS_INF:
        return x
    A = build_dynamics_supermatrix(system).dense
    H = build_measurement_supermatrix(system).dense
    f_lo, f_hi = p.f.domain_box()
    g_lo, g_hi = p.g.domain_box()
    z = p.z.ravel()
    G = np.vstack([A, -H])
    lower = np.concatenate([f_lo.ravel(), g_lo.ravel() - z])
    upper = np.concatenate([f_hi.ravel(), g_hi.ravel() - z])
    restored = project_onto_box_preimage(G, lower, upper, x.ravel(), margin)
    if restored is None:
        return None
    restored = restored.reshape(x.shape)
    return restored if primal_objective(p, restored) < POS_INF else None


def dual_control_matrix(system: LinearSystem) -> NDArray:
    """Dense B = A^{-T} H', the map from flat controls u to flat adjoint states y."""
    A = build_dynamics_supermatrix(system).dense
    H = build_measurement_supermatrix(system).dense
    return scipy.linalg.solve_triangular(A.T, H.T, lower=False)


def restore_dual(d: DualProblem, u: ArrayLike, margin: float | None = None) -> Supervector | None:
    """Nearby u with a finite dual objective, or None."""
    margin = config.restore_margin if margin is None else margin
    system = d.system
    u = as_supervector(u, system.num_blocks, system.meas_dim, "u")
    if dual_objective(d, u)[0] > NEG_INF:
        return u
    B = dual_control_matrix(system)
    g_lo, g_hi = d.g.conjugate_domain_box()
    f_lo, f_hi = d.f.conjugate_domain_box()
    G = np.vstack([np.eye(B.shape[1]), B])
    lower = np.concatenate([g_lo.ravel(), f_lo.ravel()])
    upper = np.concatenate([g_hi.ravel(), f_hi.ravel()])
    restored = project_onto_box_preimage(G, lower, upper, u.ravel(), margin)
    if restored is None:
        return None
    restored = restored.reshape(u.shape)
    return restored if dual_objective(d, restored)[0] > NEG_INF else None


def _surrogate_point(p: PrimalProblem) -> Supervector | None:
    """Minimize |Ax - c_f|^2 + |z - Hx - c_g|^2 over x, c the domain-box centers.

    Coordinates whose domain is a single point enter as equality constraints.
    """
    system = p.system
    A = build_dynamics_supermatrix(system).dense
    H = build_measurement_supermatrix(system).dense
    f_lo, f_hi = p.f.domain_box()
    g_lo, g_hi = p.g.domain_box()
    G = np.vstack([A, -H])
    target = np.concatenate([p.f.domain_point().ravel(), p.g.domain_point().ravel() - p.z.ravel()])
    fixed = np.concatenate([(f_lo == f_hi).ravel(), (g_lo == g_hi).ravel()])
    free_rows, fixed_rows = G[~fixed], G[fixed]
    if not fixed.any():
        return np.linalg.lstsq(free_rows, target, rcond=None)[0].reshape(system.num_blocks, system.state_dim)
    x_part = np.linalg.lstsq(fixed_rows, target[fixed], rcond=None)[0]
    if np.max(np.abs(fixed_rows @ x_part - target[fixed])) > 1e-10 * (1.0 + np.max(np.abs(target[fixed]))):
        return None
    basis = scipy.linalg.null_space(fixed_rows)
    if basis.shape[1] > 0 and free_rows.shape[0] > 0:
        coeffs = np.linalg.lstsq(free_rows @ basis, target[~fixed] - free_rows @ x_part, rcond=None)[0]
        x_part = x_part + basis @ coeffs
    return x_part.reshape(system.num_blocks, system.state_dim)


def strict_feasibility_witness(p: PrimalProblem) -> tuple[Supervector, Supervector] | None:
    """(x, w) with w in int dom f, Ax = w and z - Hx in int dom g, if the interior points give one."""
    w = p.f.interior_point()
    if w is None:
        return None
    x = states_from_noise(p.system, w)
    v = p.z - apply_measurement(p.system, x)
    return (x, w) if p.g.in_interior(v) else None


def certify_strong_duality(p: PrimalProblem) -> DualityCertificate:
    """Zero-gap certificate for p.

    The PLQ test runs first, so a problem that is both PLQ and strictly feasible (the
    Gaussian smoother, for one) reports PLQ_AUTOMATIC. A strict witness, when found,
    is attached as ``strict_witness`` whatever the status.
    """
    strict = strict_feasibility_witness(p)
    if p.is_plq:
        x = _surrogate_point(p)
        if x is not None:
            x = restore_primal(p, x)
        if x is not None:
            return DualityCertificate(
                status=CertificateStatus.PLQ_AUTOMATIC,
                witness=(x, apply_dynamics(p.system, x)),
                strict_witness=strict,
                detail="all penalties are piecewise linear-quadratic and the primal problem is feasible",
            )
    if strict is not None:
        return DualityCertificate(
            status=CertificateStatus.STRICT_FEASIBILITY,
            witness=strict,
            strict_witness=strict,
            detail="found a strictly feasible primal point",
        )
    return DualityCertificate(status=CertificateStatus.UNKNOWN, detail="no feasible point found")
