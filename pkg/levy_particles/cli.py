"""
Batch command line.

Usage:
    python -m levy_particles validate --config configs/stepsize.json
    python -m levy_particles simulate --config configs/simulate.json --dump-paths
    python -m levy_particles study-dt --config configs/stepsize.json --threads 4
    python -m levy_particles wasserstein --left a.csv --right b.csv --p 1
"""
import argparse
import logging
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from levy_particles import __version__
from levy_particles.config import settings
from levy_particles.core.exceptions import ConfigError, LevyParticlesError
from levy_particles.core.logging import configure_logging
from levy_particles.repositories.artifacts import ArtifactRepository
from levy_particles.schemas.experiment import ExperimentConfig, load_experiment
from levy_particles.schemas.manifest import RunManifest
from levy_particles.schemas.study import StudyReport, resolve_moment_q
from levy_particles.schemas.system import StableLaw
from levy_particles.services.convergence_harness import ConvergenceHarness
from levy_particles.services.drift_models import DriftModel
from levy_particles.services.empirical_measure import EmpiricalMeasure, WassersteinCalculator
from levy_particles.services.particle_integrator import ParticleIntegrator, terminal_summary
from levy_particles.services.stable_noise import NoiseStream, StableNoise


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1

STEP_GRID = [2.0 ** -k for k in range(4, 10)]
PARTICLE_GRID = [16, 64, 256, 1024]
CHAOS_REFERENCE_N = 4096
EMPRATE_GRID = [32, 64, 128, 256, 512, 1024, 2048]
MOLLIFY_GRID = [2, 4, 8, 16, 32]
ADMISSIBILITY_SAMPLES = 200
STUDY_COMMANDS = ("study-dt", "study-n", "study-moment", "study-emprate", "study-mollify")


class CommandRun:
    """One command invocation: resolved experiment, artifact repository and timing."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.started = datetime.now(timezone.utc)
        self.clock = time.perf_counter()
        self.experiment = load_experiment(args.config, args.overrides, args.seed)
        self.threads = args.threads if args.threads is not None else settings.THREADS
        self.harness = ConvergenceHarness(self.threads)
        self.repository = ArtifactRepository(
            Path(args.out_dir or settings.OUT_DIR),
            args.command,
            self.experiment.seed,
        )

    def finish(self) -> Path:
        """Write the run manifest next to the artifacts."""
        manifest = RunManifest(
            command=self.args.command,
            config=self.experiment.model_dump(mode="json"),
            seed=self.experiment.seed,
            artifacts=[str(p) for p in self.repository.artifacts],
            started_at=self.started.isoformat(),
            wall_clock_seconds=time.perf_counter() - self.clock,
            version=__version__,
        )
        path = self.repository.write_manifest(manifest)
        logger.info(f"Manifest written to {path}")
        return path

    def report(self, report: StudyReport) -> int:
        self.repository.write_report(report)
        self.finish()
        verdict = "PASS" if report.passed else "FAIL"
        logger.info(f"{report.study}: {verdict} ({'; '.join(report.diagnostics)})")
        return EXIT_OK if report.passed else EXIT_FAIL


# ============ Commands ============

def _validate_study(experiment: ExperimentConfig, command: str) -> None:
    """Build the study config a command would use, so bad study fields fail here."""
    if command == "study-n":
        experiment.study_config(PARTICLE_GRID, reference_n=CHAOS_REFERENCE_N)
    elif command == "study-mollify":
        experiment.study_config(MOLLIFY_GRID)
    elif command == "study-emprate":
        table = experiment.study
        if isinstance(experiment.system.init, StableLaw):
            raise ConfigError(detail="study: stable laws are not supported by the empirical-rate study")
        if table.error_p < 1.0:
            raise ConfigError(detail=f"study: error_p must be >= 1, got {table.error_p}")
        try:
            resolve_moment_q(table.error_p, table.moment_q, experiment.noise.dim, math.inf)
        except ValueError as e:
            raise ConfigError(detail=f"study: {e}") from e
    else:
        experiment.study_config(STEP_GRID)


def cmd_validate(args: argparse.Namespace) -> int:
    experiment = load_experiment(args.config, args.overrides, args.seed)
    system = experiment.system_config()
    _validate_study(experiment, args.study)
    admissibility = DriftModel(system.drift).verify(ADMISSIBILITY_SAMPLES, experiment.seed)
    if not admissibility.passed:
        print(f"drift admissibility check failed: {admissibility.model_dump()}")
        return EXIT_FAIL
    print(
        f"valid: alpha={system.noise.alpha} beta={system.drift.beta} "
        f"K={system.n_steps} T={system.adjusted_horizon}"
    )
    return EXIT_OK


def cmd_noise_check(args: argparse.Namespace) -> int:
    run = CommandRun(args)
    noise = StableNoise(run.experiment.noise)
    samples, dt = run.experiment.study.samples, run.experiment.study.dt
    x = noise.increments(dt, NoiseStream(run.experiment.seed, 0), 0, samples)

    rows = []
    worst = 0.0
    for u, empirical, theoretical in noise.check_cf(x, dt):
        worst = max(worst, abs(empirical - theoretical))
        rows.append([*u.tolist(), empirical, theoretical])
    tolerance = 3.0 / math.sqrt(samples) + 0.005
    passed = bool(worst <= tolerance)

    header = [f"u{j + 1}" for j in range(noise.params.dim)] + ["empirical_cf", "theoretical_cf"]
    run.repository.write_csv(header, rows)
    run.repository.write_json({
        "study": "noise-check",
        "samples": samples,
        "dt": dt,
        "max_abs_error": worst,
        "tolerance": tolerance,
        "passed": passed,
        "config": noise.params.model_dump(mode="json"),
        "seed": run.experiment.seed,
    })
    run.finish()
    logger.info(f"noise-check: max |cf error| {worst:.4g} (tolerance {tolerance:.4g})")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_wasserstein(args: argparse.Namespace) -> int:
    left = EmpiricalMeasure.from_csv(args.left)
    right = EmpiricalMeasure.from_csv(args.right)
    print(repr(WassersteinCalculator().distance(args.p, left, right)))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    run = CommandRun(args)
    system = run.experiment.system_config()
    path = ParticleIntegrator(system).simulate_interacting()
    if args.dump_paths:
        run.repository.write_paths(path.times, path.states, path.particle_ids)
    run.repository.write_json({
        "study": "simulate",
        "particle_count": system.particle_count,
        "n_steps": system.n_steps,
        "adjusted_horizon": system.adjusted_horizon,
        "terminal": terminal_summary(path),
        "config": system.model_dump(mode="json"),
        "seed": system.seed,
    })
    run.finish()
    return EXIT_OK


def cmd_study_dt(args: argparse.Namespace) -> int:
    run = CommandRun(args)
    return run.report(run.harness.stepsize_study(run.experiment.study_config(STEP_GRID)))


def cmd_study_n(args: argparse.Namespace) -> int:
    run = CommandRun(args)
    cfg = run.experiment.study_config(PARTICLE_GRID, reference_n=CHAOS_REFERENCE_N)
    return run.report(run.harness.chaos_study(cfg))


def cmd_study_moment(args: argparse.Namespace) -> int:
    run = CommandRun(args)
    return run.report(run.harness.moment_study(run.experiment.study_config(STEP_GRID)))


def cmd_study_emprate(args: argparse.Namespace) -> int:
    run = CommandRun(args)
    experiment: ExperimentConfig = run.experiment
    table = experiment.study
    report = run.harness.empirical_rate_study(
        experiment.system.init,
        table.grid if table.grid is not None else EMPRATE_GRID,
        table.error_p,
        table.moment_q,
        table.replications,
        experiment.noise.dim,
        experiment.seed,
        reference_size=table.reference_size,
        groups=table.groups,
        band_lo=table.band_lo,
        band_hi=table.band_hi,
    )
    return run.report(report)


def cmd_study_mollify(args: argparse.Namespace) -> int:
    run = CommandRun(args)
    return run.report(run.harness.mollification_study(run.experiment.study_config(MOLLIFY_GRID)))


def cmd_flow_iterate(args: argparse.Namespace) -> int:
    run = CommandRun(args)
    system = run.experiment.system_config()
    table = run.experiment.study
    result = ParticleIntegrator(system).iterate_measure_flow(table.max_iterations, table.tolerance)
    run.repository.write_csv(
        ("iteration", "w1_gap"),
        [(i + 1, gap) for i, gap in enumerate(result.gaps)],
    )
    run.repository.write_json({
        "study": "flow-iterate",
        "iterations": result.iterations,
        "converged": result.converged,
        "gaps": result.gaps,
        "n_steps": system.n_steps,
        "adjusted_horizon": system.adjusted_horizon,
        "terminal": terminal_summary(result.path),
        "config": system.model_dump(mode="json"),
        "seed": system.seed,
    })
    run.finish()
    return EXIT_OK if result.converged else EXIT_FAIL


COMMAND_HELP: Dict[str, str] = {
    "noise-check": "compare the empirical characteristic function of the noise with its symbol",
    "wasserstein": "exact Wasserstein distance between two point clouds",
    "simulate": "run the interacting particle system",
    "study-dt": "step-size rate study",
    "study-n": "propagation-of-chaos rate study",
    "study-moment": "lattice-increment moment study",
    "study-emprate": "empirical-measure rate study",
    "study-mollify": "mollification study",
    "validate": "check a configuration without writing anything",
    "flow-iterate": "distribution iteration over measure flows",
}

COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "noise-check": cmd_noise_check,
    "wasserstein": cmd_wasserstein,
    "simulate": cmd_simulate,
    "study-dt": cmd_study_dt,
    "study-n": cmd_study_n,
    "study-moment": cmd_study_moment,
    "study-emprate": cmd_study_emprate,
    "study-mollify": cmd_study_mollify,
    "validate": cmd_validate,
    "flow-iterate": cmd_flow_iterate,
}


# ============ Parser ============

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON experiment file")
    common.add_argument("--seed", type=int, default=None, help="run seed (overrides the file)")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config value, e.g. system.step=0.03125 (repeatable)",
    )
    common.add_argument("--out-dir", default=None, help="artifact directory (env LEVY_OUT_DIR)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for replications")
    common.add_argument("--dump-paths", action="store_true", help="write the full trajectory CSV")
    common.add_argument("--log-level", default=None, help="logging level (env LEVY_LOG_LEVEL)")
    common.add_argument("--json-logs", action="store_true", help="emit JSON log records")

    parser = argparse.ArgumentParser(
        prog="levy-particles",
        description="Particle EM scheme for distribution-dependent SDEs with stable noise",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name in COMMANDS:
        sub = commands.add_parser(name, parents=[common], help=COMMAND_HELP[name])
        if name == "wasserstein":
            sub.add_argument("--left", type=Path, required=True, help="CSV, one point per row")
            sub.add_argument("--right", type=Path, required=True, help="CSV, one point per row")
            sub.add_argument("--p", type=float, default=1.0, help="exponent")
        if name == "validate":
            sub.add_argument(
                "--study",
                choices=STUDY_COMMANDS,
                default="study-dt",
                help="study whose defaults the study table is checked against",
            )
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments and dispatch one command.

    Returns:
        0 on success or PASS, 1 on study FAIL, 2 on configuration or usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(
        args.log_level or settings.LOG_LEVEL,
        args.json_logs or settings.LOG_JSON,
    )
    try:
        return COMMANDS[args.command](args)
    except LevyParticlesError as e:
        logger.error(f"{args.command}: {e.detail}")
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
