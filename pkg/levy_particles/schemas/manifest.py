from typing import Any, Dict, List

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """Everything needed to re-run a command bit-identically."""
    
    command: str
    config: Dict[str, Any]
    seed: int
    artifacts: List[str] = Field(default_factory=list)
    started_at: str
    wall_clock_seconds: float
    version: str
