import csv
import json
from pathlib import Path

import pytest

from levy_particles.cli import run
from levy_particles.services.empirical_measure import EmpiricalMeasure, wasserstein_exact

SMALL_STUDY = [
    "--set", "system.particle_count=6",
    "--set", "study.replications=2",
    "--set", "study.grid=[0.125, 0.0625, 0.03125, 0.015625]",
]


def _artifacts(out_dir: Path, suffix: str):
    return sorted(p for p in out_dir.iterdir() if p.name.endswith(suffix) and not p.name.endswith(".manifest.json"))


def _only(out_dir: Path, suffix: str) -> Path:
    matches = _artifacts(out_dir, suffix)
    assert len(matches) == 1, matches
    return matches[0]


def test_validate_accepts_regular_config(config_file, tmp_path, capsys):
    path = config_file({"seed": 1, "noise": {"alpha": 1.5}, "drift": {"beta": 0.75}})
    out_dir = tmp_path / "out"
    assert run(["validate", "--config", str(path), "--out-dir", str(out_dir)]) == 0
    assert "valid" in capsys.readouterr().out
    assert not out_dir.exists()


def test_validate_rejects_irregular_drift(config_file, capsys):
    path = config_file({"seed": 1, "noise": {"alpha": 1.2}, "drift": {"beta": 0.3}})
    assert run(["validate", "--config", str(path)]) == 2
    assert "(H2)" in capsys.readouterr().err


def test_missing_seed_is_a_config_error(config_file):
    assert run(["validate", "--config", str(config_file({}))]) == 2


def test_validate_rejects_bound_cap_below_sup_norm(capsys):
    assert run(["validate", "--seed", "1", "--set", "drift.bound_cap=0.5"]) == 2
    assert "bound_cap" in capsys.readouterr().err


def test_validate_builds_the_study_config(capsys):
    assert run(["validate", "--seed", "1", "--set", "study.error_p=1.6"]) == 2
    assert "error_p" in capsys.readouterr().err
    assert run(["validate", "--seed", "1", "--study", "study-mollify"]) == 0
    assert run(["validate", "--seed", "1", "--study", "study-mollify", "--set", "study.grid=[4, 2, 8]"]) == 2


def test_validate_rejects_stable_law_for_emprate():
    stable = '--set=system.init={"kind": "stable"}'
    assert run(["validate", "--seed", "1", stable]) == 0
    assert run(["validate", "--seed", "1", "--study", "study-emprate", stable]) == 2


def test_unknown_command_is_usage_error(capsys):
    assert run(["integrate-everything"]) == 2
    assert "usage" in capsys.readouterr().err


def test_study_dt_with_zero_drift_is_degenerate_pass(tmp_path):
    code = run(["study-dt", "--seed", "3", "--set", "drift.kind=zero", "--out-dir", str(tmp_path), *SMALL_STUDY])
    assert code == 0
    summary = json.loads(_only(tmp_path, ".json").read_text(encoding="utf-8"))
    assert summary["passed"] and summary["degenerate"]
    assert summary["slope"] is None
    assert summary["errors"] == [0.0, 0.0, 0.0]

    manifest_path = next(tmp_path.glob("*.manifest.json"))
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    assert manifest["command"] == "study-dt"
    assert manifest["seed"] == 3
    assert len(manifest["artifacts"]) == 2


def test_study_outputs_are_byte_identical_across_thread_counts(tmp_path):
    outputs = []
    for threads in ("1", "2"):
        out_dir = tmp_path / f"threads-{threads}"
        run(["study-dt", "--seed", "9", "--threads", threads, "--out-dir", str(out_dir), *SMALL_STUDY])
        outputs.append((_only(out_dir, ".csv").read_bytes(), _only(out_dir, ".json").read_bytes()))
    assert outputs[0] == outputs[1]


def test_study_csv_format(tmp_path):
    run(["study-dt", "--seed", "9", "--out-dir", str(tmp_path), *SMALL_STUDY])
    raw = _only(tmp_path, ".csv").read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(raw.decode("utf-8").splitlines()))
    assert rows[0] == ["grid", "error", "stderr"]
    assert [float(r[0]) for r in rows[1:]] == [0.125, 0.0625, 0.03125]


def test_simulate_writes_summary_and_paths(tmp_path):
    code = run([
        "simulate", "--seed", "4",
        "--set", "system.particle_count=5",
        "--set", "system.step=0.3",
        "--dump-paths",
        "--out-dir", str(tmp_path),
    ])
    assert code == 0
    summary = json.loads(_only(tmp_path, "-4.json").read_text(encoding="utf-8"))
    assert summary["adjusted_horizon"] == pytest.approx(0.9)
    assert summary["n_steps"] == 3
    assert set(summary["terminal"]) >= {"mean", "median"}

    rows = list(csv.reader(_only(tmp_path, ".paths.csv").read_text(encoding="utf-8").splitlines()))
    assert rows[0] == ["time", "particle", "x1"]
    assert len(rows) == 1 + 4 * 5


def test_wasserstein_command(tmp_path, capsys):
    left, right = tmp_path / "left.csv", tmp_path / "right.csv"
    left.write_text("x,y\n0,0\n1,1\n2,0\n", encoding="utf-8")
    right.write_text("x,y\n0,1\n3,1\n1,0\n", encoding="utf-8")
    assert run(["wasserstein", "--left", str(left), "--right", str(right), "--p", "1.0"]) == 0
    expected = wasserstein_exact(1.0, EmpiricalMeasure.from_csv(left), EmpiricalMeasure.from_csv(right))
    assert float(capsys.readouterr().out.strip()) == expected


def test_wasserstein_size_mismatch(tmp_path):
    left, right = tmp_path / "left.csv", tmp_path / "right.csv"
    left.write_text("0\n1\n", encoding="utf-8")
    right.write_text("0\n", encoding="utf-8")
    assert run(["wasserstein", "--left", str(left), "--right", str(right)]) == 2


def test_wasserstein_unreadable_clouds(tmp_path, capsys):
    right = tmp_path / "right.csv"
    right.write_text("0\n1\n", encoding="utf-8")
    assert run(["wasserstein", "--left", str(tmp_path / "absent.csv"), "--right", str(right)]) == 2
    assert "cannot read point cloud" in capsys.readouterr().err

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("0,1\n2\n", encoding="utf-8")
    assert run(["wasserstein", "--left", str(ragged), "--right", str(right)]) == 2

    text = tmp_path / "text.csv"
    text.write_text("x\n0\nnan-ish\n", encoding="utf-8")
    assert run(["wasserstein", "--left", str(text), "--right", str(right)]) == 2


def test_noise_check(tmp_path):
    code = run([
        "noise-check", "--seed", "21",
        "--set", "study.samples=40000",
        "--set", "noise.dim=2",
        "--out-dir", str(tmp_path),
    ])
    assert code == 0
    rows = list(csv.reader(_only(tmp_path, ".csv").read_text(encoding="utf-8").splitlines()))
    assert rows[0] == ["u1", "u2", "empirical_cf", "theoretical_cf"]
    assert len(rows) == 9
    summary = json.loads(_only(tmp_path, ".json").read_text(encoding="utf-8"))
    assert summary["passed"] is True
    assert summary["max_abs_error"] <= summary["tolerance"]


def test_flow_iterate_converges(tmp_path):
    code = run([
        "flow-iterate", "--seed", "2",
        "--set", "drift.c=1.0",
        "--set", "system.particle_count=8",
        "--set", "system.step=0.125",
        "--out-dir", str(tmp_path),
    ])
    assert code == 0
    summary = json.loads(_only(tmp_path, ".json").read_text(encoding="utf-8"))
    assert summary["converged"] and summary["gaps"][-1] == 0.0


def test_emprate_point_mass_passes(tmp_path):
    code = run([
        "study-emprate", "--seed", "2",
        "--set", "study.grid=[8, 16, 32]",
        "--set", "study.replications=2",
        "--out-dir", str(tmp_path),
    ])
    assert code == 0
