"""
Continuous-time EM scheme for the N-interacting particle system.

    X_{k+1} = X_k + delta * b(X_k, mu_k) + (L_{(k+1)delta} - L_{k delta}),
    mu_k = (1/N) sum_j delta_{X_k^j}

The Levy increment of a coarse step is applied as its fine sub-increments, in
order, so that paths sharing a noise lattice agree bit-for-bit when the drift
vanishes.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from levy_particles.core.exceptions import DimensionError, IntegratorError, ValidationError
from levy_particles.schemas.drift import DriftSpec
from levy_particles.schemas.noise import SpectralMode, StableParams
from levy_particles.schemas.system import (
    GaussianLaw,
    InitialLaw,
    PointMass,
    StableLaw,
    SystemConfig,
    UniformLaw,
)
from levy_particles.services.drift_models import eval_drift_batch
from levy_particles.services.empirical_measure import (
    EmpiricalMeasure,
    WassersteinCalculator,
)
from levy_particles.services.stable_noise import (
    INIT_LANE,
    NoiseStream,
    box_muller,
    increments_from_uniforms,
    lattice_increments,
    uniforms_per_step,
)


logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class LatticePath:
    """
    Lattice values of an EM run, stored time-major.

    Attributes:
        step: Coarse step delta
        times: Lattice times, shape (K+1,)
        states: Particle states, shape (K+1, N, dim)
        increments: Fine noise sub-increments per coarse step, shape (K, N, m, dim)
        drifts: Drift used on each step, shape (K, N, dim)
        particle_ids: Stream id of every particle
    """

    step: float
    times: np.ndarray
    states: np.ndarray
    increments: np.ndarray
    drifts: np.ndarray
    particle_ids: Tuple[int, ...]

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def particle_count(self) -> int:
        return self.states.shape[1]

    @property
    def substeps(self) -> int:
        return self.increments.shape[2]

    @property
    def initial(self) -> np.ndarray:
        return self.states[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    @property
    def step_increments(self) -> np.ndarray:
        """Levy increment of each coarse step, shape (K, N, dim)."""
        return self.increments.sum(axis=2)

    def measure_flow(self) -> List[EmpiricalMeasure]:
        """Empirical measure at every lattice time."""
        return [EmpiricalMeasure(self.states[k]) for k in range(self.n_steps + 1)]

    def on_fine_lattice(self) -> np.ndarray:
        """
        Continuous-time interpolation X_{t_delta} + (t - t_delta) b + (L_t - L_{t_delta})
        evaluated on the noise lattice; shape (K*m + 1, N, dim).
        """
        k_steps, n, m, d = self.increments.shape
        out = np.empty((k_steps * m + 1, n, d))
        for k in range(k_steps):
            partial = self.states[k]
            out[k * m] = partial
            for r in range(1, m):
                partial = partial + self.increments[k, :, r - 1]
                out[k * m + r] = partial + (r * self.step / m) * self.drifts[k]
        out[-1] = self.states[-1]
        return out


@dataclass(frozen=True)
class FlowIteration:
    """Outcome of the distribution iteration over measure flows."""
    path: LatticePath
    gaps: List[float]
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.gaps)


# ============ Initial laws ============

def _coordinate(value, dim: int) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64).reshape(-1)
    if arr.shape[0] == 1:
        return np.full(dim, arr[0])
    if arr.shape[0] != dim:
        raise DimensionError(detail=f"initial law coordinate has length {arr.shape[0]}, expected {dim}")
    return arr


def sample_initial(law: InitialLaw, dim: int, seed: int, particle_ids: Sequence[int]) -> np.ndarray:
    """
    I.i.d. initial states, one per particle, drawn from lane INIT_LANE of each stream.

    Returns:
        Array of shape (N, dim)
    """
    n = len(particle_ids)
    if isinstance(law, PointMass):
        return np.tile(_coordinate(law.x0, dim), (n, 1))

    if isinstance(law, GaussianLaw):
        width = 2 * math.ceil(dim / 2)
    elif isinstance(law, UniformLaw):
        width = dim
    else:
        stable = StableParams(dim=dim, alpha=law.alpha, spectral_mode=SpectralMode.ISOTROPIC, scale=law.scale)
        width = uniforms_per_step(stable)

    u = np.stack([
        NoiseStream(seed, int(pid)).uniforms(0, 1, width, lane=INIT_LANE)[0]
        for pid in particle_ids
    ])

    if isinstance(law, GaussianLaw):
        z = box_muller(u[:, 0::2], u[:, 1::2]).reshape(n, -1)[:, :dim]
        return _coordinate(law.mean, dim) + law.sd * z
    if isinstance(law, UniformLaw):
        return law.lo + (law.hi - law.lo) * u
    if isinstance(law, StableLaw):
        return increments_from_uniforms(stable, 1.0, u)
    raise ValidationError(detail=f"unsupported initial law {law!r}")


# ============ EM step ============

def _advance(
    states: np.ndarray,
    empirical: EmpiricalMeasure,
    drift: DriftSpec,
    step: float,
    increments: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    if increments.ndim == 2:
        increments = increments[:, None, :]
    if increments.shape[0] != states.shape[0] or increments.shape[2] != states.shape[1]:
        raise DimensionError(
            detail=f"increments {increments.shape} do not match states {states.shape}"
        )
    b = eval_drift_batch(drift, states, empirical)
    if b.size and float(np.max(np.abs(b))) > drift.sup_bound + BOUND_SLACK:
        raise IntegratorError(
            detail=f"drift sup-norm {float(np.max(np.abs(b)))} exceeds bound {drift.sup_bound}"
        )
    new_states = states + step * b
    for j in range(increments.shape[1]):
        new_states = new_states + increments[:, j]
    return new_states, b


def em_step(
    states: np.ndarray,
    empirical: EmpiricalMeasure,
    drift: DriftSpec,
    step: float,
    increments: np.ndarray,
) -> np.ndarray:
    """
    One EM step with the drift frozen at the left endpoint.

    Args:
        states: Current states, shape (N, dim)
        empirical: Measure the drift sees (the current states for the interacting system)
        drift: Drift specification
        step: Step size delta
        increments: Levy increments, shape (N, dim) or fine sub-increments (N, m, dim)

    Returns:
        New states, shape (N, dim)
    """
    states = np.asarray(states, dtype=np.float64)
    increments = np.asarray(increments, dtype=np.float64)
    return _advance(states, empirical, drift, step, increments)[0]


# ============ Runs ============

def _integrate(
    step: float,
    drift: DriftSpec,
    initial: np.ndarray,
    increments: np.ndarray,
    particle_ids: Sequence[int],
    flow: Optional[Sequence[EmpiricalMeasure]],
) -> LatticePath:
    k_steps, n, _, d = increments.shape
    states = np.empty((k_steps + 1, n, d))
    drifts = np.empty((k_steps, n, d))
    states[0] = initial
    for k in range(k_steps):
        measure = EmpiricalMeasure(states[k]) if flow is None else flow[k]
        states[k + 1], drifts[k] = _advance(states[k], measure, drift, step, increments[k])
    return LatticePath(
        step=step,
        times=np.arange(k_steps + 1) * step,
        states=states,
        increments=np.ascontiguousarray(increments),
        drifts=drifts,
        particle_ids=tuple(int(i) for i in particle_ids),
    )


class ParticleIntegrator:
    """Service running the EM scheme for one system configuration."""

    def __init__(self, config: SystemConfig):
        self.config = config

    def particle_ids(self, particle_ids: Optional[Sequence[int]] = None) -> Tuple[int, ...]:
        """Stream ids of the particles, 0..N-1 by default."""
        count = self.config.particle_count
        if particle_ids is None:
            return tuple(range(count))
        if len(particle_ids) != count:
            raise DimensionError(detail=f"{len(particle_ids)} particle ids for {count} particles")
        return tuple(int(i) for i in particle_ids)

    def initial_states(self, particle_ids: Sequence[int]) -> np.ndarray:
        config = self.config
        return sample_initial(config.init, config.dim, config.seed, particle_ids)

    def noise(self, particle_ids: Sequence[int], substeps: int) -> np.ndarray:
        """Noise on the lattice step/substeps, shape (K*substeps, N, dim)."""
        config = self.config
        return lattice_increments(
            config.noise,
            config.step / substeps,
            config.seed,
            particle_ids,
            config.n_steps * substeps,
        )

    def integrate(
        self,
        initial: np.ndarray,
        noise: np.ndarray,
        particle_ids: Sequence[int],
        flow: Optional[Sequence[EmpiricalMeasure]] = None,
    ) -> LatticePath:
        """
        Integrate the EM scheme on a noise lattice at least as fine as config.step.

        Args:
            initial: Initial states, shape (N, dim)
            noise: Noise increments, shape (K*m, N, dim) for m sub-steps per step
            particle_ids: Stream ids, recorded on the path
            flow: External measure per lattice time; None for the interacting system

        Returns:
            The lattice path
        """
        k_steps = self.config.n_steps
        if noise.shape[0] % k_steps != 0:
            raise ValidationError(
                detail=f"noise lattice of {noise.shape[0]} steps does not nest {k_steps} steps"
            )
        m = noise.shape[0] // k_steps
        n, d = initial.shape
        if flow is not None and len(flow) != k_steps + 1:
            raise ValidationError(detail=f"flow has {len(flow)} measures, expected {k_steps + 1}")

        increments = noise.reshape(k_steps, m, n, d).transpose(0, 2, 1, 3)
        return _integrate(self.config.step, self.config.drift, initial, increments, particle_ids, flow)

    def simulate_interacting(self, particle_ids: Optional[Sequence[int]] = None) -> LatticePath:
        """
        Simulate the N-interacting particle system.

        Returns:
            Lattice path, a deterministic function of (config, particle_ids)
        """
        config = self.config
        ids = self.particle_ids(particle_ids)
        logger.debug(
            f"Interacting run: N={config.particle_count} K={config.n_steps} "
            f"m={config.fine_substeps} T={config.adjusted_horizon}"
        )
        return self.integrate(self.initial_states(ids), self.noise(ids, config.fine_substeps), ids)

    def simulate_frozen_flow(
        self,
        flow: Sequence[EmpiricalMeasure],
        particle_ids: Optional[Sequence[int]] = None,
    ) -> LatticePath:
        """
        Evolve non-interacting particles against an external measure flow.

        Raises:
            ValidationError: If the flow does not hold one measure per lattice time
        """
        ids = self.particle_ids(particle_ids)
        expected = self.config.n_steps + 1
        if len(flow) != expected:
            raise ValidationError(detail=f"flow has {len(flow)} measures, expected {expected}")
        noise = self.noise(ids, self.config.fine_substeps)
        return self.integrate(self.initial_states(ids), noise, ids, flow=flow)

    def coupled_refinement(self, factor: int) -> Tuple[LatticePath, LatticePath]:
        """
        Coarse (step delta) and fine (step delta/factor) paths driven by one Levy path.

        Both runs end at the coarse adjusted horizon K*delta.

        Returns:
            (coarse, fine)
        """
        if factor < 2:
            raise ValidationError(detail=f"refinement factor must be >= 2, got {factor}")
        config = self.config
        fine = ParticleIntegrator(config.model_copy(update={
            "step": config.step / factor,
            "horizon": config.adjusted_horizon,
        }))
        if fine.config.n_steps != config.n_steps * factor:
            raise ValidationError(detail="refined lattice does not nest the coarse lattice")

        ids = self.particle_ids()
        initial = self.initial_states(ids)
        noise = self.noise(ids, factor * config.fine_substeps)
        return self.integrate(initial, noise, ids), fine.integrate(initial, noise, ids)

    def iterate_measure_flow(self, max_iterations: int = 25, tolerance: float = 0.0) -> FlowIteration:
        """
        Distribution iteration: integrate against the previous flow until it reproduces itself.

        Starts from the flow frozen at the initial measure. Iteration j reproduces
        the interacting flow on its first j lattice times, so for a fixed ensemble
        the fixed point is the interacting run and is reached after at most K+1 passes.

        Returns:
            Final path, max-over-time W_1 gap of every pass, convergence flag
        """
        ids = self.particle_ids()
        initial = self.initial_states(ids)
        noise = self.noise(ids, self.config.fine_substeps)
        calculator = WassersteinCalculator()

        flow = [EmpiricalMeasure(initial)] * (self.config.n_steps + 1)
        gaps: List[float] = []
        path = None
        for iteration in range(max_iterations):
            path = self.integrate(initial, noise, ids, flow=flow)
            new_flow = path.measure_flow()
            gap = calculator.flow_gap(new_flow, flow)
            gaps.append(gap)
            logger.info(f"Flow iteration {iteration + 1}: W1 gap {gap:.3e}")
            flow = new_flow
            if gap <= tolerance:
                return FlowIteration(path=path, gaps=gaps, converged=True)
        return FlowIteration(path=path, gaps=gaps, converged=False)


def integrate_with_noise(
    config: SystemConfig,
    initial: np.ndarray,
    noise: np.ndarray,
    particle_ids: Sequence[int],
    flow: Optional[Sequence[EmpiricalMeasure]] = None,
) -> LatticePath:
    return ParticleIntegrator(config).integrate(initial, noise, particle_ids, flow)


def simulate_interacting(config: SystemConfig, particle_ids: Optional[Sequence[int]] = None) -> LatticePath:
    return ParticleIntegrator(config).simulate_interacting(particle_ids)


def simulate_frozen_flow(
    config: SystemConfig,
    flow: Sequence[EmpiricalMeasure],
    particle_ids: Optional[Sequence[int]] = None,
) -> LatticePath:
    return ParticleIntegrator(config).simulate_frozen_flow(flow, particle_ids)


def coupled_refinement(config: SystemConfig, factor: int) -> Tuple[LatticePath, LatticePath]:
    return ParticleIntegrator(config).coupled_refinement(factor)


def iterate_measure_flow(
    config: SystemConfig,
    max_iterations: int = 25,
    tolerance: float = 0.0,
) -> FlowIteration:
    return ParticleIntegrator(config).iterate_measure_flow(max_iterations, tolerance)


def replay(
    path: LatticePath,
    drift: DriftSpec,
    flow: Optional[Sequence[EmpiricalMeasure]] = None,
) -> LatticePath:
    """Re-integrate a path from its stored initial states and increments."""
    return _integrate(path.step, drift, path.initial.copy(), path.increments, path.particle_ids, flow)


def terminal_summary(path: LatticePath, exponents: Sequence[float] = (0.5, 1.0)) -> Dict[str, object]:
    """Empirical moments of the terminal states, per coordinate."""
    x = path.terminal
    summary: Dict[str, object] = {
        "mean": x.mean(axis=0).tolist(),
        "median": np.median(x, axis=0).tolist(),
    }
    for p in exponents:
        summary[f"abs_moment_{p:g}"] = (np.abs(x) ** p).mean(axis=0).tolist()
    return summary
