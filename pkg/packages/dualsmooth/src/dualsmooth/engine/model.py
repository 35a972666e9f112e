"""Linear time-varying system and its supervector block operators.

States are indexed 0..T and stored as supervectors: arrays of shape
``(T + 1, block_dim)``, one row per time step. The stacked dynamics operator
``A`` maps states to process noise (``(Ax)_0 = x_0``,
``(Ax)_{t+1} = x_{t+1} - F_t x_t``) and ``H`` is block-diagonal in ``H_t``.
Both are applied by recursions; dense assembly is only for inspection and
for the direct solver.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from dualsmooth.engine.exceptions import DimensionMismatchError
from dualsmooth.models import SystemSpec
from numpy.typing import ArrayLike, NDArray

Supervector = NDArray[np.float64]


class BlockStructure(str, Enum):
    LOWER_BIDIAGONAL = "lower-bidiagonal"
    BLOCK_DIAGONAL = "block-diagonal"


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    dense: NDArray[np.float64]
    structure: BlockStructure
    num_blocks: int
    block_shape: tuple[int, int]

    @property
    def shape(self) -> tuple[int, int]:
        return self.dense.shape

    def block(self, row: int, col: int) -> NDArray[np.float64]:
        r, c = self.block_shape
        return self.dense[row * r : (row + 1) * r, col * c : (col + 1) * c]

    def __matmul__(self, other: ArrayLike) -> NDArray[np.float64]:
        other = np.asarray(other, dtype=float)
        if other.ndim == 2 and other.shape[0] == self.num_blocks and other.shape[1] == self.block_shape[1]:
            return (self.dense @ other.reshape(-1)).reshape(self.num_blocks, self.block_shape[0])
        return self.dense @ other


def _frozen(array: NDArray) -> NDArray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """x_0 = w_0, x_{t+1} = F_t x_t + w_{t+1}, z_t = H_t x_t + v_t."""

    dynamics: NDArray[np.float64]
    measurement: NDArray[np.float64]

    def __post_init__(self):
        measurement = np.array(self.measurement, dtype=float)
        if measurement.ndim != 3 or measurement.shape[0] < 1:
            raise DimensionMismatchError("measurement", ("T+1", "n_z", "n_x"), measurement.shape)
        _, meas_dim, state_dim = measurement.shape
        dynamics = np.array(self.dynamics, dtype=float)
        if dynamics.size == 0:
            dynamics = dynamics.reshape(0, state_dim, state_dim)
        expected = (measurement.shape[0] - 1, state_dim, state_dim)
        if dynamics.shape != expected:
            raise DimensionMismatchError("dynamics", expected, dynamics.shape)
        if meas_dim < 1 or state_dim < 1:
            raise DimensionMismatchError("measurement", ("T+1", ">=1", ">=1"), measurement.shape)
        object.__setattr__(self, "dynamics", _frozen(dynamics))
        object.__setattr__(self, "measurement", _frozen(measurement))

    @classmethod
    def from_spec(cls, spec: SystemSpec) -> "LinearSystem":
        state_dim = spec.state_dim
        dynamics = spec.dynamics_sequence()
        return cls(
            dynamics=np.array(dynamics, dtype=float).reshape(spec.horizon, state_dim, state_dim),
            measurement=np.array(spec.measurement_sequence(), dtype=float),
        )

    @classmethod
    def time_invariant(cls, dynamics: ArrayLike, measurement: ArrayLike, horizon: int) -> "LinearSystem":
        f = np.atleast_2d(np.asarray(dynamics, dtype=float))
        h = np.atleast_2d(np.asarray(measurement, dtype=float))
        return cls(
            dynamics=np.broadcast_to(f, (horizon, *f.shape)).copy(),
            measurement=np.broadcast_to(h, (horizon + 1, *h.shape)).copy(),
        )

    @property
    def horizon(self) -> int:
        return self.measurement.shape[0] - 1

    @property
    def num_blocks(self) -> int:
        return self.measurement.shape[0]

    @property
    def state_dim(self) -> int:
        return self.measurement.shape[2]

    @property
    def meas_dim(self) -> int:
        return self.measurement.shape[1]


def as_supervector(values: ArrayLike, num_blocks: int, block_dim: int, what: str = "supervector") -> Supervector:
    """Coerce ``values`` to a ``(num_blocks, block_dim)`` float array.

    A flat vector of length ``num_blocks * block_dim`` is reshaped; for
    ``block_dim == 1`` a length-``num_blocks`` vector is accepted as well.
    """
    array = np.asarray(values, dtype=float)
    if array.shape == (num_blocks, block_dim):
        return array
    if array.ndim == 1 and array.size == num_blocks * block_dim:
        return array.reshape(num_blocks, block_dim)
    raise DimensionMismatchError(what, (num_blocks, block_dim), array.shape)


def build_dynamics_supermatrix(system: LinearSystem) -> BlockMatrix:
    n, blocks = system.state_dim, system.num_blocks
    dense = np.eye(n * blocks)
    for t, f in enumerate(system.dynamics):
        dense[(t + 1) * n : (t + 2) * n, t * n : (t + 1) * n] = -f
    return BlockMatrix(dense, BlockStructure.LOWER_BIDIAGONAL, blocks, (n, n))


def build_measurement_supermatrix(system: LinearSystem) -> BlockMatrix:
    rows, cols, blocks = system.meas_dim, system.state_dim, system.num_blocks
    dense = np.zeros((rows * blocks, cols * blocks))
    for t, h in enumerate(system.measurement):
        dense[t * rows : (t + 1) * rows, t * cols : (t + 1) * cols] = h
    return BlockMatrix(dense, BlockStructure.BLOCK_DIAGONAL, blocks, (rows, cols))


def apply_dynamics(system: LinearSystem, x: Supervector) -> Supervector:
    """Ax."""
    out = np.array(x, dtype=float, copy=True)
    out[1:] -= np.einsum("tij,tj->ti", system.dynamics, x[:-1])
    return out


def apply_dynamics_adjoint(system: LinearSystem, y: Supervector) -> Supervector:
    """A'y, i.e. (A'y)_t = y_t - F_t' y_{t+1} and (A'y)_T = y_T."""
    out = np.array(y, dtype=float, copy=True)
    out[:-1] -= np.einsum("tji,tj->ti", system.dynamics, y[1:])
    return out


def apply_measurement(system: LinearSystem, x: Supervector) -> Supervector:
    return np.einsum("tij,tj->ti", system.measurement, x)


def apply_measurement_adjoint(system: LinearSystem, u: Supervector) -> Supervector:
    return np.einsum("tji,tj->ti", system.measurement, u)


def states_from_noise(system: LinearSystem, w: ArrayLike) -> Supervector:
    """Solve Ax = w by forward substitution."""
    w = as_supervector(w, system.num_blocks, system.state_dim, "w")
    x = np.empty_like(w)
    x[0] = w[0]
    for t, f in enumerate(system.dynamics):
        x[t + 1] = f @ x[t] + w[t + 1]
    return x


def solve_dynamics_adjoint(system: LinearSystem, r: ArrayLike) -> Supervector:
    """Solve A'y = r by backward substitution."""
    r = as_supervector(r, system.num_blocks, system.state_dim, "r")
    y = np.empty_like(r)
    y[-1] = r[-1]
    for t in range(system.horizon - 1, -1, -1):
        y[t] = system.dynamics[t].T @ y[t + 1] + r[t]
    return y


def adjoint_states(system: LinearSystem, u: ArrayLike) -> Supervector:
    """Dual states of a control sequence u.

    y_T = H_T' u_T and y_t = F_t' y_{t+1} + H_t' u_t, so that A'y = H'u holds
    exactly.
    """
    u = as_supervector(u, system.num_blocks, system.meas_dim, "u")
    return solve_dynamics_adjoint(system, apply_measurement_adjoint(system, u))


def residuals(system: LinearSystem, x: ArrayLike, z: ArrayLike) -> tuple[Supervector, Supervector]:
    """Process noise w = Ax and measurement residual v_t = z_t - H_t x_t."""
    x = as_supervector(x, system.num_blocks, system.state_dim, "x")
    z = as_supervector(z, system.num_blocks, system.meas_dim, "z")
    return apply_dynamics(system, x), z - apply_measurement(system, x)
