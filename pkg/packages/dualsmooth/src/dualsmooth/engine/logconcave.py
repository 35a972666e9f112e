"""Univariate log-concave maximum-likelihood density estimation.

The estimate is exp(phi) with phi concave and piecewise linear between the
unique sample points. With knot values v the fit minimizes

    sigma(v) = -sum_j w_j v_j + integral of exp(phi_v)

over the cone of concave v, where w_j is the fraction of the sample at knot j.
The solve is an active-set method: Newton runs only on the values at the
current kinks, kinks are added along the steepest concave hinge and dropped
when they would turn convex, so close sample points never enter a linear system.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from dualsmooth.engine.exceptions import ConvergenceError, DegenerateSampleError
from dualsmooth.engine.penalty import PiecewiseLinear1D
from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

J_SERIES_BELOW = 1e-5
K_SERIES_BELOW = 0.05
NEWTON_TOL = 1e-12
LEVENBERG_START = 1e-12
LEVENBERG_TRIES = 30
KINK_TOL = 1e-12
DIRECTION_TOL = 1e-9
ACTIVE_SET_STEPS_PER_KNOT = 20
NEWTON_MAX_STEPS = 100
ARMIJO = 0.25
NORMALIZATION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class MLEDensity:
    knots: NDArray[np.float64]
    log_values: NDArray[np.float64]
    weights: NDArray[np.float64]
    sample_size: int

    @property
    def support(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def integral(self) -> float:
        return exp_integral(self.knots, self.log_values)

    def log_density(self, x: ArrayLike) -> float | NDArray:
        x = np.asarray(x, dtype=float)
        inside = (x >= self.knots[0]) & (x <= self.knots[-1])
        result = np.where(inside, np.interp(x, self.knots, self.log_values), -np.inf)
        return float(result) if result.ndim == 0 else result

    def density(self, x: ArrayLike) -> float | NDArray:
        return np.exp(self.log_density(x))


def _check_knots(knots: NDArray) -> NDArray:
    if knots.ndim != 1 or knots.size < 2:
        raise DegenerateSampleError("need at least two knots")
    if np.any(np.diff(knots) <= 0):
        raise DegenerateSampleError("knots must be strictly increasing")
    return np.diff(knots)


def _mean_exp(a: NDArray, b: NDArray) -> NDArray:
    """J(a, b) = (e^b - e^a) / (b - a), J(a, a) = e^a."""
    top = np.maximum(a, b)
    d = np.abs(b - a)
    small = d < J_SERIES_BELOW
    safe = np.where(small, 1.0, d)
    ratio = np.where(small, 1.0 - d / 2 + d**2 / 6 - d**3 / 24 + d**4 / 120, -np.expm1(-safe) / safe)
    return np.exp(top) * ratio


def _moments(a: NDArray, b: NDArray) -> tuple[NDArray, NDArray, NDArray]:
    """J, K1, K2 with K_i = integral over t in [0, 1] of t^i exp(a + t (b - a))."""
    d = b - a
    small = np.abs(d) < K_SERIES_BELOW
    safe = np.where(small, 1.0, d)
    ea, eb = np.exp(a), np.exp(b)
    k1 = np.where(
        small,
        ea * (1 / 2 + d / 3 + d**2 / 8 + d**3 / 30 + d**4 / 144 + d**5 / 840),
        (eb * (safe - 1.0) + ea) / safe**2,
    )
    k2 = np.where(
        small,
        ea * (1 / 3 + d / 4 + d**2 / 10 + d**3 / 36 + d**4 / 168 + d**5 / 960),
        (eb * (safe**2 - 2.0 * safe + 2.0) - 2.0 * ea) / safe**3,
    )
    return _mean_exp(a, b), k1, k2


def exp_integral(knots: ArrayLike, values: ArrayLike) -> float:
    """Exact integral over [knots[0], knots[-1]] of exp of the linear interpolant of values."""
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    widths = _check_knots(knots)
    if values.shape != knots.shape:
        raise DegenerateSampleError("need one value per knot")
    return float(np.sum(widths * _mean_exp(values[:-1], values[1:])))


def mle_objective(knots: NDArray, weights: NDArray, v: NDArray) -> float:
    return float(-weights @ v + exp_integral(knots, v))


def mle_gradient(knots: NDArray, weights: NDArray, v: NDArray) -> NDArray:
    widths = np.diff(knots)
    j, k1, _ = _moments(v[:-1], v[1:])
    grad = -weights.copy()
    grad[:-1] += widths * (j - k1)
    grad[1:] += widths * k1
    return grad


def _mle_hessian(knots: NDArray, v: NDArray) -> NDArray:
    widths = np.diff(knots)
    j, k1, k2 = _moments(v[:-1], v[1:])
    diag = np.zeros_like(v)
    diag[:-1] += widths * (j - 2.0 * k1 + k2)
    diag[1:] += widths * k2
    off = widths * (k1 - k2)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def concavity_matrix(knots: NDArray) -> NDArray:
    """C with (Cv)_j = slope_j - slope_{j+1}; v is concave iff Cv >= 0."""
    widths = np.diff(knots)
    m = knots.size
    slopes = np.zeros((m - 1, m))
    rows = np.arange(m - 1)
    slopes[rows, rows] = -1.0 / widths
    slopes[rows, rows + 1] = 1.0 / widths
    return slopes[:-1] - slopes[1:]


def hinge_directions(knots: NDArray) -> NDArray:
    """Generators of the concave directions at the knots: hinges -(t - t_k)_+, -(t_k - t)_+ and +-1, +-t."""
    t = np.asarray(knots, dtype=float)
    right = -np.maximum(t[None, :] - t[:, None], 0.0)
    left = -np.maximum(t[:, None] - t[None, :], 0.0)
    ones = np.ones_like(t)
    return np.vstack([right, left, ones, -ones, t, -t])


def directional_derivatives(density: MLEDensity) -> NDArray:
    """Derivative of the fitting objective along each hinge direction; all >= 0 at the optimum."""
    grad = mle_gradient(density.knots, density.weights, density.log_values)
    directions = hinge_directions(density.knots)
    norms = np.max(np.abs(directions), axis=1)
    return directions @ grad / np.where(norms > 0, norms, 1.0)


def _hinge_slack(knots: NDArray, weights: NDArray, v: NDArray) -> NDArray:
    """Scaled derivative of sigma along the right and left hinge at each knot, whichever is smaller."""
    grad = mle_gradient(knots, weights, v)
    s = knots - knots[0]
    tail = np.cumsum(grad[::-1])[::-1]
    tail_s = np.cumsum((grad * s)[::-1])[::-1]
    head = np.cumsum(grad)
    head_s = np.cumsum(grad * s)
    right_reach = s[-1] - s
    right = np.divide(s * tail - tail_s, right_reach, out=np.zeros_like(s), where=right_reach > 0)
    left = np.divide(head_s - s * head, s, out=np.zeros_like(s), where=s > 0)
    return np.minimum(right, left)


def _fold_weights(knots: NDArray, weights: NDArray, active: NDArray) -> NDArray:
    """Weights seen by values at the active knots when the other knots are interpolated between them."""
    anchors = knots[active]
    right = np.clip(np.searchsorted(anchors, knots, side="right"), 1, anchors.size - 1)
    left = right - 1
    share = (knots - anchors[left]) / (anchors[right] - anchors[left])
    folded = np.zeros(anchors.size)
    np.add.at(folded, left, weights * (1.0 - share))
    np.add.at(folded, right, weights * share)
    return folded


def _levenberg_solve(hess: NDArray, grad: NDArray) -> NDArray:
    """Cholesky solve, shifting the diagonal until the factorization succeeds."""
    shift = 0.0
    floor = LEVENBERG_START * max(float(np.max(np.abs(np.diag(hess)))), np.finfo(float).tiny)
    for _ in range(LEVENBERG_TRIES):
        try:
            factor = scipy.linalg.cho_factor(hess + shift * np.eye(grad.size))
            return scipy.linalg.cho_solve(factor, grad)
        except (scipy.linalg.LinAlgError, ValueError):
            shift = floor if shift == 0.0 else 10.0 * shift
    raise ConvergenceError(f"Newton system stays singular after a diagonal shift of {shift:.1e}")


def _newton(knots: NDArray, weights: NDArray, v: NDArray) -> tuple[NDArray, float]:
    """Unconstrained damped Newton on sigma over the piecewise-linear functions with these knots."""
    decrement = math.inf
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(NEWTON_MAX_STEPS):
            grad = mle_gradient(knots, weights, v)
            step = -_levenberg_solve(_mle_hessian(knots, v), grad)
            slope = float(grad @ step)
            decrement = -slope / 2
            current = mle_objective(knots, weights, v)
            if decrement <= NEWTON_TOL:
                # Quadratic phase: one more full step reaches round-off.
                if mle_objective(knots, weights, v + step) <= current:
                    v = v + step
                break
            t = 1.0
            while not mle_objective(knots, weights, v + t * step) <= current + ARMIJO * t * slope:
                t *= 0.5
                if t < 1e-12:
                    return v, decrement
            v = v + t * step
    return v, decrement


def _slope_scale(knots: NDArray, v: NDArray) -> float:
    return 1.0 + float(np.max(np.abs(np.diff(v) / np.diff(knots))))


def _fit_on_active(
    knots: NDArray, weights: NDArray, active: NDArray, theta: NDArray
) -> tuple[NDArray, NDArray, float]:
    """Best concave fit whose kinks lie in the active set; theta must be concave on entry.

    Kinks that would turn convex are flattened by stepping back to the first one that
    straightens, dropping it, and solving again on the smaller set.
    """
    while True:
        anchors = knots[active]
        candidate, decrement = _newton(anchors, _fold_weights(knots, weights, active), theta)
        C = concavity_matrix(anchors)
        kinks = C @ candidate
        if np.all(kinks >= -KINK_TOL * _slope_scale(anchors, candidate)):
            return active, candidate, decrement
        before = np.maximum(C @ theta, 0.0)
        violated = np.flatnonzero(kinks < 0)
        ratios = before[violated] / (before[violated] - kinks[violated])
        t = float(np.clip(ratios.min(), 0.0, 1.0))
        theta = theta + t * (candidate - theta)
        flat = C @ theta <= KINK_TOL * _slope_scale(anchors, theta)
        flat[violated[ratios <= ratios.min()]] = True
        keep = np.concatenate([[True], ~flat, [True]])
        active, theta = active[keep], theta[keep]


def _active_set_fit(knots: NDArray, weights: NDArray) -> tuple[NDArray, float]:
    # Uniform start: no kinks, integral 1.
    active = np.array([0, knots.size - 1])
    theta = np.full(2, -math.log(knots[-1] - knots[0]))
    added = -1
    for _ in range(ACTIVE_SET_STEPS_PER_KNOT * knots.size):
        active, theta, decrement = _fit_on_active(knots, weights, active, theta)
        v = np.interp(knots, knots[active], theta)
        if added >= 0 and added not in active:
            logger.debug(f"Kink at knot {added} flattened right after it was added; stopping at {active.size} kinks")
            return v, decrement
        slack = _hinge_slack(knots, weights, v)
        slack[active] = np.inf
        added = int(np.argmin(slack))
        if slack[added] >= -DIRECTION_TOL:
            logger.debug(f"Active set settled with {active.size} of {knots.size} knots")
            return v, decrement
        position = int(np.searchsorted(active, added))
        active = np.insert(active, position, added)
        theta = np.insert(theta, position, v[added])
    raise ConvergenceError(
        f"active set did not settle after {ACTIVE_SET_STEPS_PER_KNOT * knots.size} steps",
        context={"knots": int(knots.size), "active": int(active.size)},
    )


def fit_logconcave_mle(samples: ArrayLike) -> MLEDensity:
    """Log-concave maximum-likelihood density with knots at the unique sample points."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 3:
        raise DegenerateSampleError(f"need at least 3 samples, got {samples.size}")
    if not np.all(np.isfinite(samples)):
        raise DegenerateSampleError("samples must be finite")
    knots, counts = np.unique(samples, return_counts=True)
    if knots.size < 2:
        raise DegenerateSampleError(f"all samples are equal to {knots[0]:g}")
    weights = counts / samples.size

    log_values, decrement = _active_set_fit(knots, weights)

    integral = exp_integral(knots, log_values)
    if decrement > 1e-8 or abs(integral - 1.0) > NORMALIZATION_TOL:
        raise ConvergenceError(
            f"log-concave fit did not converge (Newton decrement {decrement:.2e}, integral {integral:.8f})",
            context={"decrement": decrement, "integral": integral},
        )
    logger.info(f"Fitted log-concave density: n={samples.size}, knots={knots.size}, integral={integral:.10f}")
    return MLEDensity(knots=knots, log_values=log_values, weights=weights, sample_size=int(samples.size))


def penalty_from_mle(density: MLEDensity) -> PiecewiseLinear1D:
    return PiecewiseLinear1D(density.knots, -density.log_values)
