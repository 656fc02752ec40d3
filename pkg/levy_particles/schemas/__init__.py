from levy_particles.schemas.noise import SpectralMode, StableParams
from levy_particles.schemas.drift import (
    AdmissibilityReport,
    DriftKind,
    DriftSpec,
    check_drift_regularity,
)
from levy_particles.schemas.system import (
    GaussianLaw,
    InitialLaw,
    PointMass,
    StableLaw,
    SystemConfig,
    UniformLaw,
    has_finite_moment,
)
from levy_particles.schemas.study import SlopeFit, StudyConfig, StudyReport, resolve_moment_q
from levy_particles.schemas.manifest import RunManifest

__all__ = [
    "SpectralMode",
    "StableParams",
    "AdmissibilityReport",
    "DriftKind",
    "DriftSpec",
    "check_drift_regularity",
    "GaussianLaw",
    "InitialLaw",
    "PointMass",
    "StableLaw",
    "SystemConfig",
    "UniformLaw",
    "has_finite_moment",
    "SlopeFit",
    "StudyConfig",
    "StudyReport",
    "resolve_moment_q",
    "RunManifest",
]
