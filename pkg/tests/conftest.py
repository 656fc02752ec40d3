import json
from pathlib import Path
from typing import Any, Callable, Dict

import pytest

from levy_particles.schemas import DriftSpec, PointMass, StableParams, SystemConfig


@pytest.fixture
def make_system() -> Callable[..., SystemConfig]:
    """Factory for small 1-D systems; keyword arguments override the defaults."""

    def _make(
        dim: int = 1,
        alpha: float = 1.5,
        a: float = 1.0,
        c: float = 0.0,
        beta: float = 0.75,
        kind: str = "holder_mean",
        **fields: Any,
    ) -> SystemConfig:
        values: Dict[str, Any] = dict(
            particle_count=8,
            step=0.125,
            horizon=1.0,
            drift=DriftSpec(dim=dim, beta=beta, holder_amp=a, interaction_amp=c, kind=kind),
            noise=StableParams(dim=dim, alpha=alpha),
            init=PointMass(),
            seed=1234,
        )
        values.update(fields)
        return SystemConfig(**values)

    return _make


@pytest.fixture
def config_file(tmp_path: Path) -> Callable[[Dict[str, Any]], Path]:
    """Write an experiment document to a JSON file and return its path."""

    def _write(document: Dict[str, Any], name: str = "experiment.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write
