"""
Increments of a d-dimensional symmetric alpha-stable Levy process.

Every increment is a pure function of (seed, particle_id, step): each particle
owns a Philox stream keyed by (seed, particle_id) and every step consumes a
fixed, 4-aligned block of uniforms, so step k starts at a known counter.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from numpy.random import Generator, Philox

from levy_particles.core.exceptions import DimensionError, ValidationError
from levy_particles.schemas.noise import SpectralMode, StableParams


logger = logging.getLogger(__name__)

NOISE_LANE = 0
INIT_LANE = 1


@dataclass(frozen=True)
class NoiseStream:
    """Counter-based uniform stream of one particle."""

    seed: int
    particle_id: int

    def uniforms(self, start: int, count: int, width: int, lane: int = NOISE_LANE) -> np.ndarray:
        """
        Uniforms in the open interval (0, 1) for blocks [start, start + count).

        Args:
            start: First block (step) index
            count: Number of blocks
            width: Uniforms per block
            lane: Independent sub-stream (noise, initial state, ...)

        Returns:
            Array of shape (count, width)
        """
        padded = _padded(width)
        bit_generator = Philox(
            key=self._key(),
            counter=np.array([start * (padded // 4), 0, lane, 0], dtype=np.uint64),
        )
        u = Generator(bit_generator).random((count, padded))[:, :width]

        # 0 is the parametrization endpoint; re-draw it from its own counter slot
        rows, cols = np.nonzero(u == 0.0)
        for row, col in zip(rows, cols):
            u[row, col] = self._redraw(start + int(row), int(col), lane)
        return u

    def _key(self) -> np.ndarray:
        return np.array([self.seed, self.particle_id], dtype=np.uint64)

    def _redraw(self, block: int, column: int, lane: int) -> float:
        attempt = 1
        while True:
            gen = Generator(Philox(
                key=self._key(),
                counter=np.array([block, column, lane, attempt], dtype=np.uint64),
            ))
            value = gen.random()
            if value > 0.0:
                logger.debug(
                    f"Re-drew endpoint uniform (particle {self.particle_id}, "
                    f"block {block}, column {column})"
                )
                return value
            attempt += 1


def _padded(width: int) -> int:
    return 4 * math.ceil(width / 4)


def uniforms_per_step(params: StableParams) -> int:
    """Uniforms consumed by one increment."""
    if params.spectral_mode == SpectralMode.PER_AXIS:
        return 2 * params.dim
    # subordinator (angle, exponential) + Box-Muller pairs
    return 2 + 2 * math.ceil(params.dim / 2)


def characteristic_exponent(params: StableParams, u: Sequence[float]) -> float:
    """
    Levy symbol Psi(u): scale*|u|^alpha (isotropic) or scale*sum|u_i|^alpha (per axis).
    """
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.shape[0] != params.dim:
        raise DimensionError(detail=f"u has length {u.shape[0]}, expected {params.dim}")
    if params.spectral_mode == SpectralMode.PER_AXIS:
        return float(params.scale * np.sum(np.abs(u) ** params.alpha))
    return float(params.scale * np.linalg.norm(u) ** params.alpha)


def cms_symmetric(alpha: float, u_angle: np.ndarray, u_exp: np.ndarray) -> np.ndarray:
    """
    Chambers-Mallows-Stuck transform for a standard symmetric stable variable.

    The result has characteristic function exp(-|t|^alpha). Flipping the angle
    uniform (u -> 1 - u) negates the sample.
    """
    theta = np.pi * (u_angle - 0.5)
    w = -np.log(u_exp)
    return (
        np.sin(alpha * theta) / np.cos(theta) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * theta) / w) ** ((1.0 - alpha) / alpha)
    )


def kanter_positive(a: float, u_angle: np.ndarray, u_exp: np.ndarray) -> np.ndarray:
    """
    Kanter representation of a positive a-stable variable, a in (0, 1).

    The result S satisfies E exp(-lam*S) = exp(-lam^a).
    """
    theta = np.pi * u_angle
    w = -np.log(u_exp)
    return (
        np.sin(a * theta) / np.sin(theta) ** (1.0 / a)
        * (np.sin((1.0 - a) * theta) / w) ** ((1.0 - a) / a)
    )


def box_muller(u_radius: np.ndarray, u_angle: np.ndarray) -> np.ndarray:
    """Pairs of independent standard normals, stacked on the last axis."""
    r = np.sqrt(-2.0 * np.log(u_radius))
    phase = 2.0 * np.pi * u_angle
    return np.stack([r * np.cos(phase), r * np.sin(phase)], axis=-1)


def increments_from_uniforms(params: StableParams, dt: float, u: np.ndarray) -> np.ndarray:
    """
    Map uniform blocks of shape (..., uniforms_per_step) to increments (..., dim).
    """
    d = params.dim
    factor = (params.scale * dt) ** (1.0 / params.alpha)
    if params.spectral_mode == SpectralMode.PER_AXIS:
        x = cms_symmetric(params.alpha, u[..., 0:2 * d:2], u[..., 1:2 * d:2])
        return factor * x

    # sub-Gaussian construction: sqrt(2 S) * Z with S positive (alpha/2)-stable
    s = kanter_positive(params.alpha / 2.0, u[..., 0], u[..., 1])
    pairs = math.ceil(d / 2)
    z = box_muller(u[..., 2:2 + 2 * pairs:2], u[..., 3:3 + 2 * pairs:2])
    z = z.reshape(z.shape[:-2] + (2 * pairs,))[..., :d]
    return factor * np.sqrt(2.0 * s)[..., None] * z


def _check_dt(dt: float) -> None:
    if not dt > 0.0:
        raise ValidationError(detail=f"dt must be positive, got {dt}")


def sample_increment(params: StableParams, dt: float, stream: NoiseStream, step: int = 0) -> np.ndarray:
    """
    One increment L_{dt} of the stream at the given fine-step index.

    Args:
        params: Stable process parameters
        dt: Time increment
        stream: Particle stream
        step: Fine-step index

    Returns:
        Vector of length params.dim
    """
    return sample_increments(params, dt, stream, step, 1)[0]


def sample_increments(
    params: StableParams,
    dt: float,
    stream: NoiseStream,
    start: int,
    count: int,
) -> np.ndarray:
    """Consecutive increments for steps [start, start + count); shape (count, dim)."""
    _check_dt(dt)
    u = stream.uniforms(start, count, uniforms_per_step(params))
    return increments_from_uniforms(params, dt, u)


def lattice_increments(
    params: StableParams,
    dt: float,
    seed: int,
    particle_ids: Iterable[int],
    n_steps: int,
) -> np.ndarray:
    """
    Increments of several particles on a lattice of n_steps steps of size dt.

    Returns:
        Array of shape (n_steps, N, dim); entry [k, i] depends only on (seed, particle_ids[i], k)
    """
    _check_dt(dt)
    width = uniforms_per_step(params)
    blocks = [
        NoiseStream(seed, int(pid)).uniforms(0, n_steps, width)
        for pid in particle_ids
    ]
    u = np.stack(blocks, axis=1)
    return increments_from_uniforms(params, dt, u)


def empirical_cf(samples: np.ndarray, u: Sequence[float]) -> float:
    """
    Real part of the empirical characteristic function, (1/M) sum cos<u, x_m>.

    Raises:
        ValidationError: If there are no samples
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValidationError(detail="empty sample set")
    if samples.ndim == 1:
        samples = samples.reshape(-1, 1)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if samples.shape[1] != u.shape[0]:
        raise DimensionError(detail=f"samples have dim {samples.shape[1]}, u has {u.shape[0]}")
    return float(np.mean(np.cos(samples @ u)))


def cf_check_grid(params: StableParams) -> np.ndarray:
    """Fixed 8-point u-grid: four magnitudes along e_1 and along the diagonal."""
    magnitudes = (0.25, 0.5, 1.0, 2.0)
    axis = np.zeros(params.dim)
    axis[0] = 1.0
    diagonal = np.full(params.dim, 1.0 / math.sqrt(params.dim))
    return np.array([m * direction for direction in (axis, diagonal) for m in magnitudes])


class StableNoise:
    """Service for sampling increments of one stable process."""

    def __init__(self, params: StableParams):
        self.params = params

    @property
    def width(self) -> int:
        return uniforms_per_step(self.params)

    def symbol(self, u: Sequence[float]) -> float:
        return characteristic_exponent(self.params, u)

    def increments(self, dt: float, stream: NoiseStream, start: int, count: int) -> np.ndarray:
        """Consecutive increments of one stream; shape (count, dim)."""
        return sample_increments(self.params, dt, stream, start, count)

    def lattice(self, dt: float, seed: int, particle_ids: Iterable[int], n_steps: int) -> np.ndarray:
        """Increments of several particles; shape (n_steps, N, dim)."""
        return lattice_increments(self.params, dt, seed, particle_ids, n_steps)

    def check_cf(self, samples: np.ndarray, dt: float) -> List[Tuple[np.ndarray, float, float]]:
        """
        Empirical against theoretical characteristic function on the check grid.

        Returns:
            (u, empirical, exp(-dt * Psi(u))) for every grid point
        """
        return [
            (u, empirical_cf(samples, u), float(np.exp(-dt * self.symbol(u))))
            for u in cf_check_grid(self.params)
        ]
