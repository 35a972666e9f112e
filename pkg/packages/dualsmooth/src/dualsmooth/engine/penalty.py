"""Extended-real-valued convex penalties.

Every penalty acts on arrays of shape ``(..., dimension)`` and reduces the
last axis, so a whole supervector (or a grid of points) is evaluated in one
call. ``+inf`` is returned only by explicit domain tests; the finite formulas
run under ``np.errstate(over="raise")`` so an overflow is never mistaken for
leaving the domain.
"""

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Iterator, Sequence

import numpy as np
from dualsmooth.engine.exceptions import (
    DimensionMismatchError,
    InvalidPenaltyError,
    NonDifferentiableConjugateError,
)
from dualsmooth.models import PenaltyKind
from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

POS_INF = math.inf
PSD_FLOOR = -1e-10
SLOPE_TOLERANCE = 1e-12
ZERO_TOLERANCE = 1e-9


def extended_sum(values: ArrayLike) -> float:
    values = np.asarray(values, dtype=float)
    if np.any(values == POS_INF):
        return POS_INF
    return float(np.sum(values))


def _reduce(result: NDArray) -> float | NDArray:
    return float(result) if np.ndim(result) == 0 else result


class Penalty(ABC):
    kind: PenaltyKind
    is_plq: bool = True

    def __init__(self, dimension: int):
        if dimension < 1:
            raise InvalidPenaltyError(f"penalty dimension must be >= 1, got {dimension}")
        self.dimension = dimension

    def _points(self, x: ArrayLike, what: str = "x") -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 and self.dimension == 1:
            x = x.reshape(1)
        if x.ndim == 0 or x.shape[-1] != self.dimension:
            raise DimensionMismatchError(what, (..., self.dimension), x.shape)
        return x

    @abstractmethod
    def value(self, x: ArrayLike) -> float | NDArray:
        """f(x) in R or +inf."""

    @abstractmethod
    def conjugate_value(self, y: ArrayLike) -> float | NDArray:
        """f*(y) = sup_x {x'y - f(x)} in R or +inf."""

    @abstractmethod
    def prox(self, v: ArrayLike, step: float) -> NDArray:
        """argmin_w f(w) + |w - v|^2 / (2 step)."""

    def conjugate_prox(self, v: ArrayLike, step: float) -> NDArray:
        """prox of step * f*, by the Moreau decomposition."""
        v = self._points(v, "v")
        _check_step(step)
        return v - step * self.prox(v / step, 1.0 / step)

    @abstractmethod
    def conjugate_gradient(self, y: ArrayLike) -> NDArray:
        """The unique element of the subdifferential of f* at y."""

    @abstractmethod
    def domain_box(self) -> tuple[NDArray, NDArray]:
        """Coordinate bounds (lower, upper) of dom f."""

    @abstractmethod
    def conjugate_domain_box(self) -> tuple[NDArray, NDArray]:
        """Coordinate bounds (lower, upper) of dom f*."""

    def interior_point(self) -> NDArray | None:
        lower, upper = self.domain_box()
        if np.any(lower >= upper):
            return None
        return _box_center(lower, upper)

    def domain_point(self) -> NDArray:
        lower, upper = self.domain_box()
        return _box_center(lower, upper)

    def in_interior(self, x: ArrayLike) -> bool | NDArray:
        x = self._points(x)
        lower, upper = self.domain_box()
        inside = np.all((x > lower) & (x < upper), axis=-1)
        return bool(inside) if np.ndim(inside) == 0 else inside

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(dimension={self.dimension})"


def _check_step(step: float) -> None:
    if not step > 0:
        raise ValueError(f"prox step must be positive, got {step}")


def _box_center(lower: NDArray, upper: NDArray) -> NDArray:
    point = np.zeros_like(lower)
    both = np.isfinite(lower) & np.isfinite(upper)
    only_lower = np.isfinite(lower) & ~np.isfinite(upper)
    only_upper = ~np.isfinite(lower) & np.isfinite(upper)
    point[both] = 0.5 * (lower[both] + upper[both])
    point[only_lower] = lower[only_lower] + 1.0
    point[only_upper] = upper[only_upper] - 1.0
    return point


class Quadratic(Penalty):
    """x'Mx / 2 with M symmetric positive semidefinite."""

    kind = PenaltyKind.QUADRATIC

    def __init__(self, M: ArrayLike):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidPenaltyError(f"quadratic weight must be square, got shape {M.shape}")
        scale = max(1.0, float(np.max(np.abs(M))))
        if not np.allclose(M, M.T, atol=1e-10 * scale):
            raise InvalidPenaltyError("quadratic weight must be symmetric")
        super().__init__(M.shape[0])
        self.M = 0.5 * (M + M.T)
        eigvals, self._eigvecs = np.linalg.eigh(self.M)
        if eigvals.min() < PSD_FLOOR * scale:
            raise InvalidPenaltyError(
                f"quadratic weight is not positive semidefinite (min eigenvalue {eigvals.min():.3e})",
                context={"min_eigenvalue": float(eigvals.min())},
            )
        self._eigvals = np.clip(eigvals, 0.0, None)
        rank_tol = 1e-12 * max(1.0, float(self._eigvals.max()))
        positive = self._eigvals > rank_tol
        vecs = self._eigvecs[:, positive]
        self._pinv = (vecs / self._eigvals[positive]) @ vecs.T
        self._nullspace = self._eigvecs[:, ~positive]

    @property
    def is_positive_definite(self) -> bool:
        return self._nullspace.shape[1] == 0

    def value(self, x):
        x = self._points(x)
        with np.errstate(over="raise"):
            return _reduce(0.5 * np.einsum("...i,ij,...j->...", x, self.M, x))

    def conjugate_value(self, y):
        y = self._points(y, "y")
        with np.errstate(over="raise"):
            result = 0.5 * np.einsum("...i,ij,...j->...", y, self._pinv, y)
        if not self.is_positive_definite:
            off_range = np.linalg.norm(y @ self._nullspace, axis=-1)
            scale = 1.0 + np.linalg.norm(y, axis=-1)
            result = np.where(off_range <= 1e-9 * scale, result, POS_INF)
        return _reduce(result)

    def prox(self, v, step):
        v = self._points(v, "v")
        _check_step(step)
        return ((v @ self._eigvecs) / (1.0 + step * self._eigvals)) @ self._eigvecs.T

    def conjugate_gradient(self, y):
        if not self.is_positive_definite:
            raise NonDifferentiableConjugateError("quadratic weight is singular; its conjugate is not differentiable")
        return self._points(y, "y") @ self._pinv

    def domain_box(self):
        return np.full(self.dimension, -np.inf), np.full(self.dimension, np.inf)

    def conjugate_domain_box(self):
        return np.full(self.dimension, -np.inf), np.full(self.dimension, np.inf)


class Monitoring(Penalty):
    """sup_{u in [lower, upper]} {x'u - u'Mu / 2} with M = diag(m)."""

    kind = PenaltyKind.MONITORING

    def __init__(self, lower: ArrayLike, upper: ArrayLike, m_diag: ArrayLike | None = None):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise InvalidPenaltyError("monitoring box bounds must be vectors of equal length")
        super().__init__(lower.size)
        m_diag = np.zeros(self.dimension) if m_diag is None else np.atleast_1d(np.asarray(m_diag, dtype=float))
        if m_diag.shape != lower.shape:
            raise InvalidPenaltyError("monitoring M_diag must match the box dimension")
        if np.any(lower > upper) or np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise InvalidPenaltyError("monitoring box U must be nonempty")
        if np.any(m_diag < PSD_FLOOR):
            raise InvalidPenaltyError("monitoring M must be positive semidefinite")
        self.lower = lower
        self.upper = upper
        self.m = np.clip(m_diag, 0.0, None)

    def value(self, x):
        x = self._points(x)
        curved = self.m > 0
        safe_m = np.where(curved, self.m, 1.0)
        with np.errstate(invalid="ignore", over="raise"):
            c = np.clip(x / safe_m, self.lower, self.upper)
            quadratic = x * c - 0.5 * self.m * c * c
            linear = np.where(x > 0, x * self.upper, np.where(x < 0, x * self.lower, 0.0))
        # Round-off around 0 stays inside a half-line or singleton domain.
        linear = np.where((np.abs(x) <= ZERO_TOLERANCE) & np.isinf(linear), 0.0, linear)
        coords = np.where(curved, quadratic, linear)
        return _reduce(np.where(np.any(coords == POS_INF, axis=-1), POS_INF, np.sum(coords, axis=-1)))

    def conjugate_value(self, y):
        y = self._points(y, "y")
        # Points within ZERO_TOLERANCE (relative to the bound) of U are snapped onto it.
        snapped = np.clip(y, self.lower, self.upper)
        outside = np.abs(y - snapped) > ZERO_TOLERANCE * np.maximum(1.0, np.abs(snapped))
        inside = ~np.any(outside, axis=-1)
        return _reduce(np.where(inside, 0.5 * np.sum(self.m * snapped * snapped, axis=-1), POS_INF))

    def prox(self, v, step):
        v = self._points(v, "v")
        _check_step(step)
        return v - step * np.clip(v / (step + self.m), self.lower, self.upper)

    def conjugate_prox(self, v, step):
        v = self._points(v, "v")
        _check_step(step)
        return np.clip(v / (1.0 + step * self.m), self.lower, self.upper)

    def conjugate_gradient(self, y):
        y = self._points(y, "y")
        if not np.all((y > self.lower) & (y < self.upper)):
            raise NonDifferentiableConjugateError("monitoring conjugate is not differentiable on or outside the box")
        return self.m * y

    def domain_box(self):
        curved = self.m > 0
        lower = np.where(curved | np.isfinite(self.lower), -np.inf, 0.0)
        upper = np.where(curved | np.isfinite(self.upper), np.inf, 0.0)
        return lower, upper

    def conjugate_domain_box(self):
        return self.lower.copy(), self.upper.copy()


class PiecewiseLinear1D(Penalty):
    """Convex interpolant of (knots, values); +inf outside [knots[0], knots[-1]]."""

    kind = PenaltyKind.PIECEWISE_LINEAR

    def __init__(self, knots: ArrayLike, values: ArrayLike):
        super().__init__(1)
        knots = np.asarray(knots, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if knots.size < 2 or knots.shape != values.shape:
            raise InvalidPenaltyError("piecewise-linear penalty needs >= 2 knots with one value each")
        if np.any(np.diff(knots) <= 0):
            raise InvalidPenaltyError("knots must be strictly increasing")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(knots)):
            raise InvalidPenaltyError("knots and values must be finite")
        slopes = np.diff(values) / np.diff(knots)
        jumps = np.diff(slopes)
        bound = SLOPE_TOLERANCE * np.maximum(1.0, np.maximum(np.abs(slopes[:-1]), np.abs(slopes[1:])))
        if np.any(jumps < -bound):
            worst = int(np.argmin(jumps)) + 1
            raise InvalidPenaltyError(
                f"piecewise-linear penalty is not convex at knot {worst}",
                context={"knot": float(knots[worst]), "slope_change": float(jumps[worst - 1])},
            )
        self.knots = knots
        self.values = values
        self.slopes = np.maximum.accumulate(slopes)

    def value(self, x):
        x = self._points(x)[..., 0]
        inside = (x >= self.knots[0]) & (x <= self.knots[-1])
        return _reduce(np.where(inside, np.interp(x, self.knots, self.values), POS_INF))

    def conjugate_value(self, y):
        y = self._points(y, "y")
        return _reduce(np.max(y * self.knots - self.values, axis=-1))

    def prox(self, v, step):
        v = self._points(v, "v")
        _check_step(step)
        s = v[..., 0]
        # Knot j absorbs v in [knot_j + step*slope_{j-1}, knot_j + step*slope_j].
        upper = self.knots + step * np.append(self.slopes, np.inf)
        lower = self.knots + step * np.insert(self.slopes, 0, -np.inf)
        j = np.searchsorted(upper, s, side="left")
        slope_before = np.insert(self.slopes, 0, 0.0)[j]
        w = np.where(s >= lower[j], self.knots[j], s - step * slope_before)
        return w[..., None]

    def conjugate_gradient(self, y):
        y = self._points(y, "y")
        if y.ndim != 1:
            raise ValueError("conjugate_gradient of a piecewise-linear penalty takes a single point")
        scores = y[0] * self.knots - self.values
        best = scores.max()
        ties = np.flatnonzero(scores >= best - 1e-12 * (1.0 + abs(best)))
        if ties.size > 1:
            raise NonDifferentiableConjugateError(
                f"conjugate is not differentiable at y={y[0]:.6g}: maximized at knots {self.knots[ties].tolist()}"
            )
        return self.knots[ties[:1]]

    def domain_box(self):
        return self.knots[:1].copy(), self.knots[-1:].copy()

    def conjugate_domain_box(self):
        return np.array([-np.inf]), np.array([np.inf])


class ZeroIndicator(Penalty):
    """Indicator of {0}; membership is tested to an absolute ZERO_TOLERANCE."""

    kind = PenaltyKind.ZERO

    def value(self, x):
        x = self._points(x)
        return _reduce(np.where(np.max(np.abs(x), axis=-1) <= ZERO_TOLERANCE, 0.0, POS_INF))

    def conjugate_value(self, y):
        y = self._points(y, "y")
        return _reduce(np.zeros(y.shape[:-1]))

    def prox(self, v, step):
        _check_step(step)
        return np.zeros_like(self._points(v, "v"))

    def conjugate_prox(self, v, step):
        _check_step(step)
        return np.array(self._points(v, "v"), copy=True)

    def conjugate_gradient(self, y):
        return np.zeros_like(self._points(y, "y"))

    def domain_box(self):
        return np.zeros(self.dimension), np.zeros(self.dimension)

    def conjugate_domain_box(self):
        return np.full(self.dimension, -np.inf), np.full(self.dimension, np.inf)


def gaussian_penalty(covariance: ArrayLike) -> Quadratic:
    """Negative log-density of N(0, covariance), up to a constant."""
    covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
    try:
        np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError as e:
        raise InvalidPenaltyError("gaussian covariance must be positive definite") from e
    return Quadratic(np.linalg.inv(covariance))


def laplace_penalty(scale: float = 1.0, dimension: int = 1) -> Monitoring:
    """|x|_1 / scale, i.e. the monitoring function of the box [-1/scale, 1/scale]."""
    bound = np.full(dimension, 1.0 / scale)
    return Monitoring(-bound, bound)


def huber_penalty(kappa: float = 1.0, dimension: int = 1) -> Monitoring:
    bound = np.full(dimension, kappa)
    return Monitoring(-bound, bound, np.ones(dimension))


def numeric_conjugate_oracle(penalty: Penalty, y: float, lower: float, upper: float, step: float) -> float:
    """Brute-force sup_x {x y - f(x)} over a grid of [lower, upper] with spacing ``step``."""
    if penalty.dimension != 1:
        raise InvalidPenaltyError("the grid oracle only handles one-dimensional penalties")
    grid = np.linspace(lower, upper, int(round((upper - lower) / step)) + 1)
    with np.errstate(invalid="ignore"):
        scores = grid * y - penalty.value(grid[:, None])
    best = int(np.argmax(scores))
    if grid.size > 1 and best in (0, grid.size - 1):
        logger.warning(f"Conjugate oracle maximum at grid endpoint x={grid[best]:.4g} for y={y:.4g}; widen the grid")
    return float(scores[best])


def conjugate_query_points(penalty: Penalty, count: int = 20) -> NDArray:
    """Points strictly inside the conjugate domain of a 1-D penalty."""
    if isinstance(penalty, PiecewiseLinear1D):
        lower, upper = penalty.slopes[0] - 1.0, penalty.slopes[-1] + 1.0
    else:
        lower, upper = (float(b[0]) for b in penalty.conjugate_domain_box())
    if lower == upper:
        return np.array([lower])
    if math.isfinite(lower) and math.isfinite(upper):
        return np.linspace(lower, upper, count + 2)[1:-1]
    if math.isfinite(lower):
        return lower + np.linspace(0.1, 2.0, count)
    if math.isfinite(upper):
        return upper - np.linspace(0.1, 2.0, count)
    return np.linspace(-2.0, 2.0, count)


def max_conjugate_deviation(penalty: Penalty, ys: ArrayLike, step: float, margin: float) -> float:
    """Largest gap between the closed-form conjugate and the grid oracle over ``ys``.

    The grid is centred on the maximizer when the conjugate is differentiable
    and clipped to the domain box. Points where the closed form is +inf are
    skipped.
    """
    lower, upper = (float(b[0]) for b in penalty.domain_box())
    worst = 0.0
    for y in np.atleast_1d(np.asarray(ys, dtype=float)):
        closed = penalty.conjugate_value([y])
        if closed == POS_INF:
            continue
        try:
            center = float(penalty.conjugate_gradient(np.array([y]))[0])
        except NonDifferentiableConjugateError:
            center = 0.0
        lo = max(center - margin, lower)
        hi = min(center + margin, upper)
        if isinstance(penalty, PiecewiseLinear1D):
            lo, hi = lower, upper
        worst = max(worst, abs(closed - numeric_conjugate_oracle(penalty, y, lo, hi, step)))
    return worst


def check_level_bounded(
    penalty: Penalty,
    rng: np.random.Generator,
    rays: int = 16,
    inner: float = 1e2,
    outer: float = 1e3,
) -> bool:
    """True when the penalty grows along every sampled ray."""
    directions = rng.standard_normal((rays, penalty.dimension))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    near = np.atleast_1d(penalty.value(inner * directions))
    far = np.atleast_1d(penalty.value(outer * directions))
    return bool(np.all((far == POS_INF) | (far > near)))


def validate_density(penalty: Penalty, rng: np.random.Generator) -> None:
    """Runtime checks that exp(-penalty) can be normalized into a density."""
    if penalty.value(penalty.domain_point()) == POS_INF:
        raise InvalidPenaltyError(f"{penalty!r} is not proper: +inf on its whole domain box")
    if not check_level_bounded(penalty, rng):
        raise InvalidPenaltyError(f"{penalty!r} is not level-bounded; exp(-f) has infinite mass")


class SeparablePenalty:
    """Sum over time blocks of per-step penalties, f(w) = sum_t f_t(w_t).

    Blocks sharing the same penalty object are evaluated in one vectorized
    call.
    """

    def __init__(self, penalties: Sequence[Penalty]):
        self.penalties = tuple(penalties)
        if not self.penalties:
            raise InvalidPenaltyError("a separable penalty needs at least one block")
        dims = {p.dimension for p in self.penalties}
        if len(dims) != 1:
            raise DimensionMismatchError("separable penalty blocks", (dims.pop(),), tuple(sorted(dims)))
        self.block_dim = dims.pop()
        groups: dict[int, tuple[Penalty, list[int]]] = {}
        for t, p in enumerate(self.penalties):
            groups.setdefault(id(p), (p, []))[1].append(t)
        self._groups = [(p, np.asarray(idx)) for p, idx in groups.values()]

    @classmethod
    def repeated(cls, penalty: Penalty, num_blocks: int) -> "SeparablePenalty":
        return cls([penalty] * num_blocks)

    @property
    def num_blocks(self) -> int:
        return len(self.penalties)

    @property
    def is_plq(self) -> bool:
        return all(p.is_plq for p in self.penalties)

    def __len__(self) -> int:
        return len(self.penalties)

    def __getitem__(self, t: int) -> Penalty:
        return self.penalties[t]

    def __iter__(self) -> Iterator[Penalty]:
        return iter(self.penalties)

    def _blocks(self, x: ArrayLike, what: str) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_blocks, self.block_dim):
            raise DimensionMismatchError(what, (self.num_blocks, self.block_dim), x.shape)
        return x

    def _map(self, method: str, x: NDArray, *args) -> NDArray:
        out = None
        for p, idx in self._groups:
            result = np.asarray(getattr(p, method)(x[idx], *args))
            if out is None:
                out = np.empty((self.num_blocks, *result.shape[1:]))
            out[idx] = result
        return out

    def block_values(self, x: ArrayLike) -> NDArray:
        return self._map("value", self._blocks(x, "x"))

    def value(self, x: ArrayLike) -> float:
        return extended_sum(self.block_values(x))

    def block_conjugate_values(self, y: ArrayLike) -> NDArray:
        return self._map("conjugate_value", self._blocks(y, "y"))

    def conjugate_value(self, y: ArrayLike) -> float:
        return extended_sum(self.block_conjugate_values(y))

    def prox(self, v: ArrayLike, step: float) -> NDArray:
        return self._map("prox", self._blocks(v, "v"), step)

    def conjugate_prox(self, v: ArrayLike, step: float) -> NDArray:
        return self._map("conjugate_prox", self._blocks(v, "v"), step)

    def conjugate_gradient(self, y: ArrayLike) -> NDArray:
        y = self._blocks(y, "y")
        out = np.empty_like(y)
        for t, p in enumerate(self.penalties):
            try:
                out[t] = p.conjugate_gradient(y[t])
            except NonDifferentiableConjugateError as e:
                raise NonDifferentiableConjugateError(f"time step {t}: {e.detail}", step=t) from e
        return out

    def domain_box(self) -> tuple[NDArray, NDArray]:
        boxes = [p.domain_box() for p in self.penalties]
        return np.array([b[0] for b in boxes]), np.array([b[1] for b in boxes])

    def conjugate_domain_box(self) -> tuple[NDArray, NDArray]:
        boxes = [p.conjugate_domain_box() for p in self.penalties]
        return np.array([b[0] for b in boxes]), np.array([b[1] for b in boxes])

    def interior_point(self) -> NDArray | None:
        points = [p.interior_point() for p in self.penalties]
        if any(point is None for point in points):
            return None
        return np.array(points)

    def domain_point(self) -> NDArray:
        return np.array([p.domain_point() for p in self.penalties])

    def in_interior(self, x: ArrayLike) -> bool:
        x = self._blocks(x, "x")
        return all(bool(p.in_interior(x[t])) for t, p in enumerate(self.penalties))
