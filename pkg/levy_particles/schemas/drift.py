from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from levy_particles.core.exceptions import ConfigError


class DriftKind(str, Enum):
    """Built-in drift family."""
    
    ZERO = "zero"
    HOLDER_MEAN = "holder_mean"
    MOLLIFIED = "mollified"


class DriftSpec(BaseModel):
    """
    Bounded drift b(x, mu) = a * phi_beta(x) + c * E_mu[tanh], componentwise.
    
    A mollified spec carries its base spec and the mollification level n;
    its amplitudes mirror the base.
    """
    
    dim: int = Field(1, ge=1)
    beta: float = Field(0.75, gt=0.0, lt=1.0)
    kappa: float = Field(1.0, ge=1.0)
    holder_amp: float = Field(0.0, ge=0.0)
    interaction_amp: float = Field(0.0, ge=0.0)
    bound_cap: Optional[float] = Field(None, gt=0.0)
    kind: DriftKind = DriftKind.HOLDER_MEAN
    base: Optional["DriftSpec"] = None
    n: Optional[int] = Field(None, ge=1)
    
    model_config = ConfigDict(frozen=True)
    
    @model_validator(mode="after")
    def _check_kind(self) -> "DriftSpec":
        if self.kind == DriftKind.MOLLIFIED:
            if self.base is None or self.n is None:
                raise ValueError("mollified drift requires base and n")
            if self.base.kind == DriftKind.MOLLIFIED:
                raise ValueError("already mollified")
            if self.base.dim != self.dim:
                raise ValueError("mollified drift dim differs from base dim")
        elif self.base is not None or self.n is not None:
            raise ValueError(f"{self.kind.value} drift takes no base or n")
        if self.bound_cap is not None and self.bound_cap < self.a + self.c:
            raise ValueError(
                f"bound_cap {self.bound_cap} is below the drift sup-norm a + c = {self.a + self.c}"
            )
        return self
    
    @property
    def is_zero(self) -> bool:
        if self.kind == DriftKind.MOLLIFIED:
            return self.base.is_zero
        return self.kind == DriftKind.ZERO
    
    @property
    def a(self) -> float:
        """Effective Holder amplitude."""
        return 0.0 if self.is_zero else self.holder_amp
    
    @property
    def c(self) -> float:
        """Effective interaction amplitude."""
        return 0.0 if self.is_zero else self.interaction_amp
    
    @property
    def sup_bound(self) -> float:
        """Declared bound on the coordinate sup-norm of b."""
        if self.bound_cap is not None:
            return self.bound_cap
        return self.a + self.c
    
    @property
    def holder_constant(self) -> float:
        return 2.0 * self.a
    
    @property
    def measure_constant(self) -> float:
        return self.c


def check_drift_regularity(drift: DriftSpec, alpha: float) -> None:
    """
    Enforce the drift regularity condition against a noise index.
    
    Raises:
        ConfigError: If 2*beta + alpha <= 2 or kappa is outside [1, alpha)
    """
    if 2.0 * drift.beta + alpha <= 2.0:
        raise ConfigError(
            detail=(
                f"(H2) violated: 2*beta + alpha > 2 required, got "
                f"2*{drift.beta} + {alpha} = {2.0 * drift.beta + alpha}"
            )
        )
    if not 1.0 <= drift.kappa < alpha:
        raise ConfigError(
            detail=f"(H2) violated: kappa must lie in [1, alpha={alpha}), got {drift.kappa}"
        )


class AdmissibilityReport(BaseModel):
    """Empirical check of the drift's boundedness and regularity constants."""
    
    sample_count: int
    holder_ratio: float
    measure_ratio: float
    sup_norm: float
    holder_constant: float
    measure_constant: float
    sup_constant: float
    passed: bool
