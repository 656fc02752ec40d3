import math
from typing import Annotated, List, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from levy_particles.schemas.drift import DriftSpec, check_drift_regularity
from levy_particles.schemas.noise import StableParams

Coordinate = Union[float, List[float]]


class PointMass(BaseModel):
    """All particles start at x0."""
    kind: Literal["point_mass"] = "point_mass"
    x0: Coordinate = 0.0
    
    model_config = ConfigDict(frozen=True)


class GaussianLaw(BaseModel):
    """Independent normal coordinates."""
    kind: Literal["gaussian"] = "gaussian"
    mean: Coordinate = 0.0
    sd: float = Field(1.0, gt=0.0)
    
    model_config = ConfigDict(frozen=True)


class UniformLaw(BaseModel):
    """Independent uniform coordinates on [lo, hi)."""
    kind: Literal["uniform"] = "uniform"
    lo: float = -1.0
    hi: float = 1.0
    
    model_config = ConfigDict(frozen=True)
    
    @model_validator(mode="after")
    def _check_bounds(self) -> "UniformLaw":
        if not self.hi > self.lo:
            raise ValueError("uniform law requires hi > lo")
        return self


class StableLaw(BaseModel):
    """Isotropic symmetric stable initial law; q-th moments finite only for q < alpha."""
    kind: Literal["stable"] = "stable"
    alpha: float = Field(1.5, gt=1.0, lt=2.0)
    scale: float = Field(1.0, gt=0.0)
    
    model_config = ConfigDict(frozen=True)


InitialLaw = Annotated[
    Union[PointMass, GaussianLaw, UniformLaw, StableLaw],
    Field(discriminator="kind"),
]


def has_finite_moment(law: InitialLaw, q: float) -> bool:
    """Whether E|X_0|^q < infinity under `law`."""
    if isinstance(law, StableLaw):
        return q < law.alpha
    return True


class SystemConfig(BaseModel):
    """Configuration of one interacting particle run on the lattice {0, step, ..., T}."""
    
    particle_count: int = Field(256, ge=1)
    step: float = Field(0.0625, gt=0.0)
    horizon: float = Field(1.0, gt=0.0)
    fine_substeps: int = Field(1, ge=1)
    drift: DriftSpec = Field(default_factory=DriftSpec)
    noise: StableParams = Field(default_factory=StableParams)
    init: InitialLaw = Field(default_factory=PointMass)
    seed: int = Field(..., ge=0, lt=2**64)
    
    model_config = ConfigDict(frozen=True)
    
    @model_validator(mode="after")
    def _check_system(self) -> "SystemConfig":
        # the scheme is stated for step in (0, 1/e)
        if not self.step < math.exp(-1.0):
            raise ValueError(f"step must lie in (0, 1/e), got {self.step}")
        if self.drift.dim != self.noise.dim:
            raise ValueError(
                f"drift.dim ({self.drift.dim}) != noise.dim ({self.noise.dim})"
            )
        check_drift_regularity(self.drift, self.noise.alpha)
        return self
    
    @property
    def n_steps(self) -> int:
        return max(1, round(self.horizon / self.step))
    
    @property
    def adjusted_horizon(self) -> float:
        return self.n_steps * self.step
    
    @property
    def dim(self) -> int:
        return self.noise.dim
