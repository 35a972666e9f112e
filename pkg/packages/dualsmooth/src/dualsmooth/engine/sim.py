"""Seeded simulation of state trajectories and noisy measurements.

All randomness comes from numpy's counter-based Philox generator. A seed
selects the key; independent streams are obtained by jumping the counter,
so process noise, measurement noise and sample draws never overlap.
"""

import logging
from dataclasses import dataclass

import numpy as np
from dualsmooth.engine.exceptions import DimensionMismatchError, InvalidNoiseError
from dualsmooth.engine.model import LinearSystem, Supervector, apply_measurement, states_from_noise
from dualsmooth.models import NoiseKind, NoiseSpec
from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

PROCESS_STREAM = 0
MEASUREMENT_STREAM = 1
SAMPLE_STREAM = 2
CHOLESKY_JITTER = 1e-12


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed).jumped(stream))


@dataclass(frozen=True, eq=False)
class SimulationResult:
    states: Supervector
    measurements: Supervector
    process_noise: Supervector
    measurement_noise: Supervector


def _covariance_factor(covariance: NDArray) -> NDArray:
    scale = max(1.0, float(np.max(np.abs(covariance)))) if covariance.size else 1.0
    if not np.allclose(covariance, covariance.T, atol=1e-10 * scale):
        raise InvalidNoiseError("covariance must be symmetric")
    eigvals, eigvecs = np.linalg.eigh(covariance)
    if eigvals.min() < -1e-10 * scale:
        raise InvalidNoiseError(
            f"covariance is not positive semidefinite (min eigenvalue {eigvals.min():.3e})",
            context={"min_eigenvalue": float(eigvals.min())},
        )
    try:
        return np.linalg.cholesky(covariance + CHOLESKY_JITTER * np.eye(covariance.shape[0]))
    except np.linalg.LinAlgError:
        # Singular covariance: fall back to the symmetric square root.
        return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def sample_gaussian(dim: int, covariance: ArrayLike, rng: np.random.Generator, size: int | None = None) -> NDArray:
    """Draw N(0, covariance) vectors; ``size`` adds a leading axis."""
    covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
    if covariance.shape != (dim, dim):
        raise DimensionMismatchError("covariance", (dim, dim), covariance.shape)
    if not np.any(covariance):
        return np.zeros((dim,) if size is None else (size, dim))
    factor = _covariance_factor(covariance)
    normals = rng.standard_normal((dim,) if size is None else (size, dim))
    return normals @ factor.T


def laplace_from_uniform(p: ArrayLike, scale: float = 1.0) -> NDArray | float:
    """Inverse CDF of Laplace(0, scale); p is clipped into (0, 1) so the tails stay finite."""
    eps = np.finfo(float).eps
    p = np.clip(np.asarray(p, dtype=float), eps, 1.0 - eps)
    centered = p - 0.5
    result = -scale * np.sign(centered) * np.log1p(-2.0 * np.abs(centered))
    return float(result) if result.ndim == 0 else result


def sample_laplace(
    scale: float, rng: np.random.Generator, size: int | tuple[int, ...] | None = None
) -> NDArray | float:
    if not scale > 0:
        raise InvalidNoiseError(f"laplace scale must be positive, got {scale}")
    return laplace_from_uniform(rng.random(size), scale)


def sample_noise(spec: NoiseSpec, dim: int, rng: np.random.Generator, size: int) -> NDArray:
    """``size`` draws of dimension ``dim`` from the noise model."""
    dim = spec.resolved_dimension(dim)
    match spec.kind:
        case NoiseKind.NONE:
            return np.zeros((size, dim))
        case NoiseKind.GAUSSIAN:
            return sample_gaussian(dim, spec.covariance, rng, size=size)
        case NoiseKind.LAPLACE:
            return np.asarray(sample_laplace(spec.scale, rng, size=(size, dim)))
    raise InvalidNoiseError(f"unknown noise kind {spec.kind}")


def simulate(system: LinearSystem, process_noise: NoiseSpec, meas_noise: NoiseSpec, seed: int = 0) -> SimulationResult:
    """Draw w and v, propagate x = A^{-1} w and measure z = Hx + v."""
    blocks = system.num_blocks
    for spec, dim, what in (
        (process_noise, system.state_dim, "process noise"),
        (meas_noise, system.meas_dim, "measurement noise"),
    ):
        if spec.dimension is not None and spec.dimension != dim:
            raise DimensionMismatchError(what, (dim,), (spec.dimension,))
    w = sample_noise(process_noise, system.state_dim, make_rng(seed, PROCESS_STREAM), blocks)
    v = sample_noise(meas_noise, system.meas_dim, make_rng(seed, MEASUREMENT_STREAM), blocks)
    x = states_from_noise(system, w)
    z = apply_measurement(system, x) + v
    logger.debug(f"Simulated T={system.horizon} with seed {seed}")
    return SimulationResult(states=x, measurements=z, process_noise=w, measurement_noise=v)
