from levy_particles.core.exceptions import (
    LevyParticlesError,
    ValidationError,
    ConfigError,
    DimensionError,
    AssignmentTooLargeError,
    IntegratorError,
)
from levy_particles.core.logging import configure_logging

__all__ = [
    "LevyParticlesError",
    "ValidationError",
    "ConfigError",
    "DimensionError",
    "AssignmentTooLargeError",
    "IntegratorError",
    "configure_logging",
]
