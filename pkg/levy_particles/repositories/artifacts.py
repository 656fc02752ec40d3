import csv
import io
import json
import logging
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np

from levy_particles.schemas.manifest import RunManifest
from levy_particles.schemas.study import StudyReport


logger = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%Y%m%dT%H%M%SZ"


def utc_timestamp(moment: Optional[datetime] = None) -> str:
    moment = moment or datetime.now(timezone.utc)
    return moment.strftime(TIMESTAMP_FORMAT)


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


class ArtifactRepository:
    """
    Owns every file a command writes.

    Files are named `<study>-<timestamp>-<seed><suffix>` under `out_dir` and
    written atomically: content goes to a temporary file in the same
    directory, which then replaces the target.
    """

    def __init__(self, out_dir: Path, study: str, seed: int, timestamp: Optional[str] = None):
        """
        Initialize the repository for one command run.

        Args:
            out_dir: Directory receiving the artifacts, created if missing
            study: Command or study name, the first part of every file name
            seed: Run seed, the last part of every file name
            timestamp: UTC timestamp, defaults to now
        """
        self.out_dir = Path(out_dir)
        self.study = study
        self.seed = seed
        self.timestamp = timestamp or utc_timestamp()
        self.artifacts: List[Path] = []

    @property
    def stem(self) -> str:
        return f"{self.study}-{self.timestamp}-{self.seed}"

    def path_for(self, suffix: str) -> Path:
        return self.out_dir / f"{self.stem}{suffix}"

    def _write_atomic(self, target: Path, text: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{target.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        logger.debug(f"Wrote {target}")
        return target

    def write_csv(self, header: Sequence[str], rows: Iterable[Sequence[Any]], suffix: str = ".csv") -> Path:
        """Comma-separated, header row, LF line endings, floats in repr form."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
        path = self._write_atomic(self.path_for(suffix), buffer.getvalue())
        self.artifacts.append(path)
        return path

    def write_json(self, payload: Any, suffix: str = ".json") -> Path:
        """Sorted keys, 2-space indent, trailing LF."""
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        path = self._write_atomic(self.path_for(suffix), text)
        self.artifacts.append(path)
        return path

    def write_report(self, report: StudyReport) -> List[Path]:
        """Per-grid-point CSV plus the JSON summary of a study."""
        rows = zip(report.grid, report.errors, report.stderrs)
        csv_path = self.write_csv(("grid", "error", "stderr"), rows)
        json_path = self.write_json(report.model_dump(mode="json"))
        return [csv_path, json_path]

    def write_paths(self, times: np.ndarray, states: np.ndarray, particle_ids: Sequence[int]) -> Path:
        """Trajectory dump: one row per (time, particle) with every coordinate."""
        dim = states.shape[2]
        header = ["time", "particle"] + [f"x{j + 1}" for j in range(dim)]
        rows = (
            [times[k], particle_ids[i], *states[k, i]]
            for k in range(states.shape[0])
            for i in range(states.shape[1])
        )
        return self.write_csv(header, rows, suffix=".paths.csv")

    def write_manifest(self, manifest: RunManifest) -> Path:
        """Manifest of the run; not listed among its own artifacts."""
        text = json.dumps(manifest.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
        return self._write_atomic(self.path_for(".manifest.json"), text)
