from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


class SpectralMode(str, Enum):
    """Admissible spectral measures on the unit sphere."""
    
    ISOTROPIC = "isotropic"  # uniform on the sphere
    PER_AXIS = "per_axis"  # atoms at +-e_i


class StableParams(BaseModel):
    """Parameters of a d-dimensional symmetric alpha-stable Levy process."""
    
    dim: int = Field(1, ge=1)
    alpha: float = Field(1.5, gt=1.0, lt=2.0)
    spectral_mode: SpectralMode = SpectralMode.ISOTROPIC
    scale: float = Field(1.0, gt=0.0)
    
    model_config = ConfigDict(frozen=True)
