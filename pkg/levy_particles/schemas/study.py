import math
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from levy_particles.schemas.system import SystemConfig


def resolve_moment_q(p: float, q: Optional[float], dim: int, upper: float) -> float:
    """
    Default and validate the moment exponent q of the rate table.
    
    Args:
        p: Error exponent
        q: Requested moment exponent, None for the midpoint (p + upper) / 2
        dim: State dimension
        upper: Exclusive upper limit of q (alpha, or infinity for light-tailed laws)
    
    Returns:
        The resolved q
    
    Raises:
        ValueError: If q is outside (p, upper) or hits an excluded value
    """
    if q is None:
        q = (p + upper) / 2.0 if math.isfinite(upper) else 4.0 * p
    if not p < q < upper:
        raise ValueError(f"moment_q must lie in ({p}, {upper}), got {q}")
    if p >= dim / 2.0 and math.isclose(q, 2.0 * p):
        raise ValueError(f"moment_q = 2p = {q} is excluded from the rate table")
    if p < dim / 2.0 and math.isclose(q, dim / (dim - p)):
        raise ValueError(f"moment_q = d/(d-p) = {q} is excluded from the rate table")
    return q


class StudyConfig(BaseModel):
    """Configuration of one convergence study over a grid of delta, N or n values."""
    
    base: SystemConfig
    grid: List[float] = Field(..., min_length=1)
    error_p: float = Field(1.0, gt=0.0)
    moment_q: Optional[float] = None
    replications: int = Field(16, ge=1)
    reference_n: Optional[int] = Field(None, ge=1)
    groups: Optional[int] = Field(None, ge=1)
    band_lo: Optional[float] = None
    band_hi: Optional[float] = None
    
    model_config = ConfigDict(frozen=True)
    
    @model_validator(mode="after")
    def _check_study(self) -> "StudyConfig":
        diffs = [b - a for a, b in zip(self.grid, self.grid[1:])]
        if not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise ValueError("grid must be strictly monotone")
        alpha = self.base.noise.alpha
        if not self.base.drift.kappa <= self.error_p < alpha:
            raise ValueError(
                f"error_p must lie in [kappa={self.base.drift.kappa}, alpha={alpha}), "
                f"got {self.error_p}"
            )
        resolve_moment_q(self.error_p, self.moment_q, self.base.dim, alpha)
        return self
    
    @property
    def q(self) -> float:
        return resolve_moment_q(
            self.error_p, self.moment_q, self.base.dim, self.base.noise.alpha
        )


class SlopeFit(BaseModel):
    """Ordinary least squares fit of log y against log x."""
    slope: float
    intercept: float
    stderr: float


class StudyReport(BaseModel):
    """Outcome of one convergence study; a pure function of (config, seed)."""
    
    study: str
    grid: List[float]
    errors: List[float]
    stderrs: List[float]
    slope: Optional[float] = None
    intercept: Optional[float] = None
    slope_stderr: Optional[float] = None
    theoretical_slope: Optional[float] = None
    regime: Optional[str] = None
    band: Tuple[Optional[float], Optional[float]] = (None, None)
    passed: bool
    degenerate: bool = False
    diagnostics: List[str] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: int
