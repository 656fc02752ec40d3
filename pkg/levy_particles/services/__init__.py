from levy_particles.services.stable_noise import (
    NoiseStream,
    StableNoise,
    characteristic_exponent,
    cf_check_grid,
    empirical_cf,
    lattice_increments,
    sample_increment,
    sample_increments,
)
from levy_particles.services.empirical_measure import (
    EmpiricalMeasure,
    WassersteinCalculator,
    coupling_upper_bound,
    optimal_cost,
    wasserstein_1d,
    wasserstein_exact,
)
from levy_particles.services.drift_models import (
    DriftModel,
    eval_drift,
    eval_drift_batch,
    mollify_drift,
    verify_admissible,
)
from levy_particles.services.particle_integrator import (
    FlowIteration,
    LatticePath,
    ParticleIntegrator,
    coupled_refinement,
    em_step,
    iterate_measure_flow,
    replay,
    simulate_frozen_flow,
    simulate_interacting,
)
from levy_particles.services.convergence_harness import (
    ConvergenceHarness,
    chaos_study,
    empirical_rate_study,
    fit_loglog_slope,
    mollification_study,
    moment_study,
    stepsize_study,
)

__all__ = [
    "NoiseStream",
    "StableNoise",
    "characteristic_exponent",
    "cf_check_grid",
    "empirical_cf",
    "lattice_increments",
    "sample_increment",
    "sample_increments",
    "EmpiricalMeasure",
    "WassersteinCalculator",
    "coupling_upper_bound",
    "optimal_cost",
    "wasserstein_1d",
    "wasserstein_exact",
    "DriftModel",
    "eval_drift",
    "eval_drift_batch",
    "mollify_drift",
    "verify_admissible",
    "FlowIteration",
    "LatticePath",
    "ParticleIntegrator",
    "coupled_refinement",
    "em_step",
    "iterate_measure_flow",
    "replay",
    "simulate_frozen_flow",
    "simulate_interacting",
    "ConvergenceHarness",
    "chaos_study",
    "empirical_rate_study",
    "fit_loglog_slope",
    "mollification_study",
    "moment_study",
    "stepsize_study",
]
