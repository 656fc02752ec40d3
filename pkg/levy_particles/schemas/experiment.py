"""
Experiment configuration file: tables `noise`, `drift`, `system`, `study` and a required `seed`.
"""
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional

import pydantic
from pydantic import BaseModel, Field

from levy_particles.core.exceptions import ConfigError
from levy_particles.schemas.drift import DriftKind, DriftSpec
from levy_particles.schemas.noise import StableParams
from levy_particles.schemas.study import StudyConfig
from levy_particles.schemas.system import InitialLaw, PointMass, SystemConfig


class DriftTable(BaseModel):
    """`drift` table of the experiment file."""
    kind: Literal["zero", "holder_mean"] = "holder_mean"
    a: float = Field(1.0, ge=0.0)
    c: float = Field(0.0, ge=0.0)
    beta: float = Field(0.75, gt=0.0, lt=1.0)
    kappa: float = Field(1.0, ge=1.0)
    bound_cap: Optional[float] = Field(None, gt=0.0)
    mollify_n: Optional[int] = Field(None, ge=1)


class SystemTable(BaseModel):
    """`system` table of the experiment file."""
    particle_count: int = Field(256, ge=1)
    step: float = Field(0.0625, gt=0.0)
    horizon: float = Field(1.0, gt=0.0)
    fine_substeps: int = Field(1, ge=1)
    init: InitialLaw = Field(default_factory=PointMass)


class StudyTable(BaseModel):
    """`study` table of the experiment file; unset fields fall back to per-command defaults."""
    grid: Optional[List[float]] = None
    error_p: float = Field(1.0, gt=0.0)
    moment_q: Optional[float] = None
    replications: int = Field(16, ge=1)
    reference_n: Optional[int] = Field(None, ge=1)
    reference_size: Optional[int] = Field(None, ge=1)
    groups: Optional[int] = Field(None, ge=1)
    band_lo: Optional[float] = None
    band_hi: Optional[float] = None
    # noise-check
    samples: int = Field(200_000, ge=1)
    dt: float = Field(1.0, gt=0.0)
    # flow-iterate
    max_iterations: int = Field(25, ge=1)
    tolerance: float = Field(1e-12, ge=0.0)


class ExperimentConfig(BaseModel):
    """Whole experiment file after defaulting."""
    
    seed: int = Field(..., ge=0, lt=2**64)
    noise: StableParams = Field(default_factory=StableParams)
    drift: DriftTable = Field(default_factory=DriftTable)
    system: SystemTable = Field(default_factory=SystemTable)
    study: StudyTable = Field(default_factory=StudyTable)
    
    def drift_spec(self) -> DriftSpec:
        """Build the DriftSpec, mollified when `mollify_n` is set."""
        spec = _validated(
            DriftSpec,
            dim=self.noise.dim,
            beta=self.drift.beta,
            kappa=self.drift.kappa,
            holder_amp=self.drift.a,
            interaction_amp=self.drift.c,
            bound_cap=self.drift.bound_cap,
            kind=DriftKind(self.drift.kind),
        )
        if self.drift.mollify_n is not None:
            # local import: services depend on schemas, not the other way round
            from levy_particles.services.drift_models import mollify_drift
            spec = mollify_drift(spec, self.drift.mollify_n)
        return spec
    
    def system_config(self) -> SystemConfig:
        return _validated(
            SystemConfig,
            particle_count=self.system.particle_count,
            step=self.system.step,
            horizon=self.system.horizon,
            fine_substeps=self.system.fine_substeps,
            drift=self.drift_spec(),
            noise=self.noise,
            init=self.system.init,
            seed=self.seed,
        )
    
    def study_config(self, default_grid: Iterable[float], **defaults: Any) -> StudyConfig:
        """
        Build a StudyConfig, filling unset study fields from per-command defaults.
        
        Args:
            default_grid: Grid used when the file sets none
            defaults: Fallbacks for reference_n, band_lo, band_hi
        """
        table = self.study
        return _validated(
            StudyConfig,
            base=self.system_config(),
            grid=list(table.grid) if table.grid is not None else list(default_grid),
            error_p=table.error_p,
            moment_q=table.moment_q,
            replications=table.replications,
            reference_n=table.reference_n if table.reference_n is not None else defaults.get("reference_n"),
            groups=table.groups,
            band_lo=table.band_lo if table.band_lo is not None else defaults.get("band_lo"),
            band_hi=table.band_hi if table.band_hi is not None else defaults.get("band_hi"),
        )


def _validated(model: type, **fields: Any):
    try:
        return model(**fields)
    except pydantic.ValidationError as e:
        raise ConfigError(detail=f"{model.__name__}: {e}") from e


def parse_override(item: str) -> tuple:
    """Split `table.key=value`; the value is a JSON literal or a plain string."""
    if "=" not in item:
        raise ConfigError(detail=f"override must be key=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def apply_overrides(document: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Apply dotted-key overrides to a raw configuration document in place."""
    for item in overrides:
        key, value = parse_override(item)
        parts = key.split(".")
        node = document
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(detail=f"override {key!r} descends into a non-table")
            node = child
        node[parts[-1]] = value
    return document


def load_experiment(
    path: Optional[Path],
    overrides: Iterable[str] = (),
    seed: Optional[int] = None,
) -> ExperimentConfig:
    """
    Read, override and validate an experiment file.
    
    Args:
        path: JSON experiment file, or None to start from defaults
        overrides: `table.key=value` strings
        seed: Seed from the command line; takes precedence over the file
    
    Returns:
        Validated experiment configuration
    
    Raises:
        ConfigError: If the file is missing, unparsable or invalid
    """
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigError(detail=f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(detail=f"config file is not valid JSON: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError(detail="config file must hold a JSON object")
    
    apply_overrides(document, overrides)
    if seed is not None:
        document["seed"] = seed
    if "seed" not in document:
        raise ConfigError(detail="seed is required (config file or --seed)")
    
    experiment = _validated(ExperimentConfig, **document)
    # cross-table invariants surface here rather than mid-run
    experiment.system_config()
    return experiment
