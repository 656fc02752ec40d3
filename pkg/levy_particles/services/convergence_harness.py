"""
Rate experiments for the particle EM scheme and log-log slope fitting.

Every study runs R independent replications (seeds derived from the study
seed and the replication index), aggregates each grid point by
median-of-means and fits the slope of log error against log grid value.
Replications may run on a thread pool; results are gathered in replication
order, so reports do not depend on the thread count.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from levy_particles.config import settings
from levy_particles.core.exceptions import ValidationError
from levy_particles.schemas.drift import DriftKind
from levy_particles.schemas.study import SlopeFit, StudyConfig, StudyReport, resolve_moment_q
from levy_particles.schemas.system import (
    GaussianLaw,
    InitialLaw,
    PointMass,
    StableLaw,
    UniformLaw,
    has_finite_moment,
)
from levy_particles.services.drift_models import mollify_drift
from levy_particles.services.empirical_measure import (
    EmpiricalMeasure,
    optimal_cost,
    wasserstein_1d,
)
from levy_particles.services.particle_integrator import (
    LatticePath,
    ParticleIntegrator,
    sample_initial,
)


logger = logging.getLogger(__name__)

STEPSIZE_BAND = (0.35, None)
CHAOS_BAND = (None, -0.3)
EMPRATE_BAND = (-0.6, -0.4)
MOMENT_BAND_HALF_WIDTH = 0.15
MOMENT_SUBSTEPS = 8
MOLLIFY_SLACK = 1.10
MOLLIFY_TERMINAL_RATIO = 0.5
EMPRATE_REFERENCE_FACTOR = 16
PROXY_ID_OFFSET = 2**40

Band = Tuple[Optional[float], Optional[float]]


# ============ Slope fitting ============

def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> SlopeFit:
    """
    Ordinary least squares of log y against log x.

    Raises:
        ValidationError: With fewer than 3 points, or on a nonpositive value
    """
    if len(xs) != len(ys):
        raise ValidationError(detail=f"{len(xs)} abscissae for {len(ys)} ordinates")
    if len(xs) < 3:
        raise ValidationError(detail=f"slope fit needs at least 3 points, got {len(xs)}")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValidationError(detail="log of nonpositive")
    fit = stats.linregress(np.log(x), np.log(y))
    stderr = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    return SlopeFit(slope=float(fit.slope), intercept=float(fit.intercept), stderr=stderr)


def band_contains(slope: float, stderr: float, band: Band) -> bool:
    """Whether [slope - 2*stderr, slope + 2*stderr] meets the band."""
    lo, hi = band
    if lo is not None and slope + 2.0 * stderr < lo:
        return False
    if hi is not None and slope - 2.0 * stderr > hi:
        return False
    return True


# ============ Replications ============

def replication_seed(seed: int, replication: int) -> int:
    """Seed of one replication, derived from the study seed."""
    state = np.random.SeedSequence([seed, replication]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def median_of_means(values: Sequence[float], groups: Optional[int] = None) -> Tuple[float, float]:
    """
    Median of the means of contiguous replication groups.

    Returns:
        (estimate, stderr) with stderr the sample standard deviation over sqrt(R)
    """
    arr = np.asarray(values, dtype=np.float64)
    groups = settings.MOM_GROUPS if groups is None else groups
    groups = max(1, min(groups, arr.shape[0]))
    means = [float(np.mean(chunk)) for chunk in np.array_split(arr, groups)]
    estimate = float(np.median(means))
    stderr = float(np.std(arr, ddof=1) / math.sqrt(arr.shape[0])) if arr.shape[0] > 1 else 0.0
    return estimate, stderr


def run_replications(
    replicate: Callable[[int], List[float]],
    seed: int,
    replications: int,
    threads: Optional[int] = None,
) -> np.ndarray:
    """
    Evaluate `replicate(seed_r)` for r = 0..R-1.

    Returns:
        Array of shape (R, grid points), rows in replication order
    """
    seeds = [replication_seed(seed, r) for r in range(replications)]
    threads = settings.THREADS if threads is None else threads
    if threads <= 1:
        rows = [replicate(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(replicate, seeds))
    return np.asarray(rows, dtype=np.float64)


def _aggregate(rows: np.ndarray, groups: Optional[int]) -> Tuple[List[float], List[float]]:
    errors, stderrs = [], []
    for column in rows.T:
        estimate, stderr = median_of_means(column, groups)
        errors.append(estimate)
        stderrs.append(stderr)
    return errors, stderrs


# ============ Theory ============

def chaos_theory(p: float, q: float, dim: int) -> Tuple[float, str]:
    """
    Theoretical N-slope of the p-th moment chaos and empirical-measure errors.

    Returns:
        (slope, regime), regime one of "p>d/2", "p=d/2", "p<d/2"
    """
    half = dim / 2.0
    moment_term = p / q - 1.0 if math.isfinite(q) else -math.inf
    if math.isclose(p, half):
        # N^{-1/2} log(1+N): not separable from N^{-1/2} at these sizes
        return max(-0.5, moment_term), "p=d/2"
    if p > half:
        return max(-0.5, moment_term), "p>d/2"
    return max(-2.0 / dim, moment_term), "p<d/2"


def _band(cfg_lo: Optional[float], cfg_hi: Optional[float], default: Band) -> Band:
    lo = cfg_lo if cfg_lo is not None else default[0]
    hi = cfg_hi if cfg_hi is not None else default[1]
    return lo, hi


Gate = Callable[[List[float], Optional[SlopeFit], Band], Tuple[bool, List[str]]]


def slope_gate(errors: List[float], fit: Optional[SlopeFit], band: Band) -> Tuple[bool, List[str]]:
    """PASS iff slope +/- 2 stderr meets the band."""
    if fit is None:
        return False, ["no slope to gate"]
    if band_contains(fit.slope, fit.stderr, band):
        return True, []
    return False, [f"slope {fit.slope:.4f} +/- {2 * fit.stderr:.4f} misses band {band}"]


def _finish(
    study: str,
    grid: Sequence[float],
    rows: np.ndarray,
    groups: Optional[int],
    band: Band,
    seed: int,
    config: dict,
    theoretical_slope: Optional[float] = None,
    regime: Optional[str] = None,
    diagnostics: Optional[List[str]] = None,
    gate: Gate = slope_gate,
) -> StudyReport:
    """Aggregate replication rows, fit the slope and decide PASS/FAIL."""
    errors, stderrs = _aggregate(rows, groups)
    diagnostics = list(diagnostics or [])
    report = dict(
        study=study,
        grid=[float(g) for g in grid],
        errors=errors,
        stderrs=stderrs,
        theoretical_slope=theoretical_slope,
        regime=regime,
        band=band,
        config=config,
        seed=seed,
    )

    if all(e == 0.0 for e in errors):
        diagnostics.append("all errors are zero: slope undefined")
        logger.info(f"{study}: degenerate grid, PASS")
        return StudyReport(passed=True, degenerate=True, diagnostics=diagnostics, **report)

    fit = None
    try:
        fit = fit_loglog_slope(grid, errors)
        report.update(slope=fit.slope, intercept=fit.intercept, slope_stderr=fit.stderr)
    except ValidationError as e:
        diagnostics.append(f"slope fit failed: {e.detail}")

    passed, messages = gate(errors, fit, band)
    diagnostics.extend(messages)
    logger.info(
        f"{study}: slope {report.get('slope')} (stderr {report.get('slope_stderr')}), "
        f"theory {theoretical_slope}, {'PASS' if passed else 'FAIL'}"
    )
    return StudyReport(passed=passed, diagnostics=diagnostics, **report)


def _report_only(errors: List[float], fit: Optional[SlopeFit], band: Band) -> Tuple[bool, List[str]]:
    return True, []


# ============ Errors on the fine lattice ============

def sup_lattice_error(a: LatticePath, b: LatticePath, p: float) -> float:
    """
    Mean over particles of max over the shared noise lattice of |a - b|^p.

    Both paths must be driven by one noise path on the same fine lattice.
    """
    fine_a = a.on_fine_lattice()
    fine_b = b.on_fine_lattice()
    if fine_a.shape != fine_b.shape:
        raise ValidationError(
            detail=f"paths live on different lattices: {fine_a.shape} vs {fine_b.shape}"
        )
    gaps = np.linalg.norm(fine_a - fine_b, axis=-1) ** p
    return float(np.mean(gaps.max(axis=0)))


def increment_moment(path: LatticePath, p: float) -> float:
    """Mean over steps and particles of max over sub-lattice times of |X_t - X_{t_delta}|^p."""
    fine = path.on_fine_lattice()
    k_steps, n, m, d = path.increments.shape
    within = fine[:-1].reshape(k_steps, m, n, d)
    gaps = np.linalg.norm(within - path.states[:-1, None], axis=-1) ** p
    return float(np.mean(gaps.max(axis=1)))


def _restrict(path: LatticePath, n: int) -> LatticePath:
    return LatticePath(
        step=path.step,
        times=path.times,
        states=path.states[:, :n],
        increments=path.increments[:, :n],
        drifts=path.drifts[:, :n],
        particle_ids=path.particle_ids[:n],
    )


# ============ Studies ============

def _nesting_factors(grid: Sequence[float]) -> Tuple[float, List[int]]:
    finest = min(grid)
    factors = []
    for step in grid:
        ratio = step / finest
        factor = int(round(ratio))
        if factor < 1 or abs(ratio - factor) > 1e-9 * ratio:
            raise ValidationError(
                detail=f"non-nested grid: {step} is not an integer multiple of {finest}"
            )
        factors.append(factor)
    return finest, factors


def _integer_grid(grid: Sequence[float], what: str) -> List[int]:
    values = [int(g) for g in grid]
    if any(float(v) != g for v, g in zip(values, grid)) or min(values) < 1:
        raise ValidationError(detail=f"{what} must be positive integers")
    return values


def law_quantiles(law: InitialLaw, size: int) -> np.ndarray:
    """Mid-quantiles F^{-1}((j + 1/2) / size) of a one-dimensional law."""
    levels = (np.arange(size) + 0.5) / size
    if isinstance(law, PointMass):
        return np.full(size, float(np.asarray(law.x0, dtype=np.float64).reshape(-1)[0]))
    if isinstance(law, GaussianLaw):
        mean = float(np.asarray(law.mean, dtype=np.float64).reshape(-1)[0])
        return stats.norm.ppf(levels, loc=mean, scale=law.sd)
    if isinstance(law, UniformLaw):
        return law.lo + (law.hi - law.lo) * levels
    raise ValidationError(detail=f"no closed-form quantiles for {law.kind} laws")


class ConvergenceHarness:
    """Service running the rate studies; `threads` only changes wall-clock time."""

    def __init__(self, threads: Optional[int] = None):
        self.threads = settings.THREADS if threads is None else threads

    def replicate(self, replicate: Callable[[int], List[float]], seed: int, replications: int) -> np.ndarray:
        return run_replications(replicate, seed, replications, self.threads)

    def stepsize_study(self, cfg: StudyConfig) -> StudyReport:
        """
        Strong error of the EM scheme against the finest step of a nested grid.

        The finest step is the reference; every coarser step reuses its noise
        path, so all runs share one Levy path and the same initial states.
        """
        if len(cfg.grid) < 4:
            raise ValidationError(detail="stepsize study needs at least 4 step sizes (one is the reference)")
        if not all(0.0 < s < math.exp(-1.0) for s in cfg.grid):
            raise ValidationError(detail="step sizes must lie in (0, 1/e)")
        base = cfg.base
        finest, factors = _nesting_factors(cfg.grid)
        ref_config = base.model_copy(update={"step": finest})
        k_ref = ref_config.n_steps
        horizon = ref_config.adjusted_horizon
        substeps = base.fine_substeps
        for factor in factors:
            if k_ref % factor != 0:
                raise ValidationError(
                    detail=f"non-nested grid: {k_ref} reference steps do not split into blocks of {factor}"
                )

        coarse = [s for s, f in zip(cfg.grid, factors) if f > 1]
        p = cfg.error_p

        def replicate(seed: int) -> List[float]:
            reference = ParticleIntegrator(ref_config.model_copy(update={"seed": seed}))
            ids = reference.particle_ids()
            initial = reference.initial_states(ids)
            noise = reference.noise(ids, substeps)
            reference_path = reference.integrate(initial, noise, ids)
            row = []
            for step in coarse:
                run = ParticleIntegrator(reference.config.model_copy(update={"step": step, "horizon": horizon}))
                row.append(sup_lattice_error(run.integrate(initial, noise, ids), reference_path, p))
            return row

        rows = self.replicate(replicate, base.seed, cfg.replications)
        theory = p * base.drift.beta / base.noise.alpha

        def gate(errors: List[float], fit: Optional[SlopeFit], band: Band) -> Tuple[bool, List[str]]:
            passed, messages = slope_gate(errors, fit, band)
            largest = errors[int(np.argmax(coarse))]
            smallest = errors[int(np.argmin(coarse))]
            if not largest > smallest:
                passed = False
                messages.append(
                    f"error at largest step {largest:.4g} does not exceed "
                    f"error at smallest step {smallest:.4g}"
                )
            return passed, messages

        return _finish(
            "study-dt",
            coarse,
            rows,
            cfg.groups,
            _band(cfg.band_lo, cfg.band_hi, STEPSIZE_BAND),
            base.seed,
            cfg.model_dump(mode="json"),
            theoretical_slope=theory,
            regime="delta",
            diagnostics=[f"reference step {finest}"],
            gate=gate,
        )

    def chaos_study(self, cfg: StudyConfig) -> StudyReport:
        """
        Propagation of chaos: the N-system against the first N particles of a large reference run.

        The reference particles feel the reference measure flow, so restricting
        the reference path to its first N particles is the frozen-flow run of
        those particles, with the same noise streams and initial states as the
        N-system.
        """
        grid = _integer_grid(cfg.grid, "particle counts")
        reference_n = cfg.reference_n if cfg.reference_n is not None else 4 * max(grid)
        if reference_n in grid:
            raise ValidationError(detail=f"reference_n={reference_n} must not be in the grid")
        if reference_n < 4 * max(grid):
            raise ValidationError(
                detail=f"reference_n={reference_n} must be at least 4 x the largest grid N ({max(grid)})"
            )
        base = cfg.base
        p = cfg.error_p

        def replicate(seed: int) -> List[float]:
            reference = ParticleIntegrator(
                base.model_copy(update={"particle_count": reference_n, "seed": seed})
            ).simulate_interacting()
            row = []
            for n in grid:
                system = ParticleIntegrator(
                    base.model_copy(update={"particle_count": n, "seed": seed})
                ).simulate_interacting()
                row.append(sup_lattice_error(system, _restrict(reference, n), p))
            return row

        rows = self.replicate(replicate, base.seed, cfg.replications)
        theory, regime = chaos_theory(p, cfg.q, base.dim)
        diagnostics = [f"reference_n {reference_n}", f"moment term N^(p/q-1) with q={cfg.q:.6g}"]
        gate = slope_gate
        if regime == "p=d/2":
            diagnostics.append("regime p = d/2 is reported, not gated")
            gate = _report_only
        return _finish(
            "study-n",
            grid,
            rows,
            cfg.groups,
            _band(cfg.band_lo, cfg.band_hi, CHAOS_BAND),
            base.seed,
            {**cfg.model_dump(mode="json"), "reference_n": reference_n},
            theoretical_slope=theory,
            regime=regime,
            diagnostics=diagnostics,
            gate=gate,
        )

    def empirical_rate_study(
        self,
        law: InitialLaw,
        grid: Sequence[int],
        p: float,
        q: Optional[float],
        replications: int,
        dim: int,
        seed: int,
        reference_size: Optional[int] = None,
        groups: Optional[int] = None,
        band_lo: Optional[float] = None,
        band_hi: Optional[float] = None,
    ) -> StudyReport:
        """
        E W_p^p between an N-sample of `law` and a size-N_ref proxy of it.

        In one dimension the proxy is the N_ref mid-quantiles of the law and each
        sample atom is repeated N_ref/N times, so the exact sorted matching
        applies. Otherwise the proxy is an independent sample of at most the
        assignment cap.

        Raises:
            ValidationError: For stable laws, a bad moment exponent, or sizes that do not nest
        """
        grid = [int(n) for n in grid]
        if not p >= 1.0:
            raise ValidationError(detail=f"p must be >= 1, got {p}")
        if isinstance(law, StableLaw):
            raise ValidationError(detail="stable laws are not supported by the empirical-rate study")
        if q is not None and not has_finite_moment(law, q):
            raise ValidationError(detail=f"law {law.kind} has no finite moment of order {q}")
        try:
            q = resolve_moment_q(p, q, dim, math.inf)
        except ValueError as e:
            raise ValidationError(detail=str(e)) from e

        quantile_proxy = dim == 1
        if reference_size is None:
            reference_size = EMPRATE_REFERENCE_FACTOR * max(grid)
        if not quantile_proxy and reference_size > settings.ASSIGNMENT_CAP:
            logger.info(f"Proxy size {reference_size} downsampled to the assignment cap")
            reference_size = settings.ASSIGNMENT_CAP
        bad = [n for n in grid if n < 1 or reference_size % n != 0]
        if bad:
            raise ValidationError(detail=f"sample sizes {bad} do not divide the proxy size {reference_size}")

        if quantile_proxy:
            fixed_proxy = EmpiricalMeasure(law_quantiles(law, reference_size))

        def replicate(run_seed: int) -> List[float]:
            if quantile_proxy:
                proxy = fixed_proxy
            else:
                proxy_ids = range(PROXY_ID_OFFSET, PROXY_ID_OFFSET + reference_size)
                proxy = EmpiricalMeasure(sample_initial(law, dim, run_seed, proxy_ids))
            row = []
            for n in grid:
                sample = sample_initial(law, dim, run_seed, range(n))
                atoms = EmpiricalMeasure(np.repeat(sample, reference_size // n, axis=0))
                if quantile_proxy:
                    row.append(wasserstein_1d(p, atoms, proxy) ** p)
                else:
                    row.append(optimal_cost(p, atoms, proxy))
            return row

        rows = self.replicate(replicate, seed, replications)
        theory, regime = chaos_theory(p, q, dim)
        config = {
            "law": law.model_dump(mode="json"),
            "grid": grid,
            "error_p": p,
            "moment_q": q,
            "replications": replications,
            "dim": dim,
            "reference_size": reference_size,
            "groups": groups,
        }
        return _finish(
            "study-emprate",
            grid,
            rows,
            groups,
            _band(band_lo, band_hi, EMPRATE_BAND),
            seed,
            config,
            theoretical_slope=theory,
            regime=regime,
            diagnostics=["proxy: mid-quantiles" if quantile_proxy else "proxy: independent sample"],
        )

    def moment_study(self, cfg: StudyConfig) -> StudyReport:
        """Lattice-increment moment E sup |X_t - X_{t_delta}|^p against delta."""
        base = cfg.base
        p = cfg.error_p
        substeps = max(base.fine_substeps, MOMENT_SUBSTEPS)

        def replicate(seed: int) -> List[float]:
            return [
                increment_moment(
                    ParticleIntegrator(base.model_copy(update={
                        "step": step,
                        "fine_substeps": substeps,
                        "seed": seed,
                    })).simulate_interacting(),
                    p,
                )
                for step in cfg.grid
            ]

        rows = self.replicate(replicate, base.seed, cfg.replications)
        theory = p / base.noise.alpha
        band = _band(
            cfg.band_lo,
            cfg.band_hi,
            (theory - MOMENT_BAND_HALF_WIDTH, theory + MOMENT_BAND_HALF_WIDTH),
        )
        return _finish(
            "study-moment",
            cfg.grid,
            rows,
            cfg.groups,
            band,
            base.seed,
            cfg.model_dump(mode="json"),
            theoretical_slope=theory,
            regime="delta",
            diagnostics=[f"{substeps} sub-lattice points per step"],
        )

    def mollification_study(self, cfg: StudyConfig) -> StudyReport:
        """Strong error between runs under b^n and under b, with identical noise, per level n."""
        base = cfg.base
        if base.drift.kind == DriftKind.MOLLIFIED:
            raise ValidationError(detail="already mollified")
        levels = _integer_grid(cfg.grid, "mollification levels")
        drifts = [mollify_drift(base.drift, n) for n in levels]
        p = cfg.error_p

        def replicate(seed: int) -> List[float]:
            exact = ParticleIntegrator(base.model_copy(update={"seed": seed})).simulate_interacting()
            return [
                sup_lattice_error(
                    ParticleIntegrator(
                        base.model_copy(update={"drift": drift, "seed": seed})
                    ).simulate_interacting(),
                    exact,
                    p,
                )
                for drift in drifts
            ]

        def gate(errors: List[float], fit: Optional[SlopeFit], band: Band) -> Tuple[bool, List[str]]:
            # the slope is reported only; monotone decay decides
            messages = []
            for (n0, e0), (n1, e1) in zip(zip(levels, errors), zip(levels[1:], errors[1:])):
                if e1 > MOLLIFY_SLACK * e0:
                    messages.append(f"error rises from {e0:.4g} at n={n0} to {e1:.4g} at n={n1}")
            if errors[-1] > MOLLIFY_TERMINAL_RATIO * errors[0]:
                messages.append(
                    f"terminal error {errors[-1]:.4g} exceeds {MOLLIFY_TERMINAL_RATIO} x initial {errors[0]:.4g}"
                )
            return not messages, messages

        rows = self.replicate(replicate, base.seed, cfg.replications)
        return _finish(
            "study-mollify",
            levels,
            rows,
            cfg.groups,
            _band(cfg.band_lo, cfg.band_hi, (None, None)),
            base.seed,
            cfg.model_dump(mode="json"),
            gate=gate,
        )


convergence_harness = ConvergenceHarness()


def _harness(threads: Optional[int]) -> ConvergenceHarness:
    return convergence_harness if threads is None else ConvergenceHarness(threads)


def stepsize_study(cfg: StudyConfig, threads: Optional[int] = None) -> StudyReport:
    return _harness(threads).stepsize_study(cfg)


def chaos_study(cfg: StudyConfig, threads: Optional[int] = None) -> StudyReport:
    return _harness(threads).chaos_study(cfg)


def empirical_rate_study(
    law: InitialLaw,
    grid: Sequence[int],
    p: float,
    q: Optional[float],
    replications: int,
    dim: int,
    seed: int,
    reference_size: Optional[int] = None,
    groups: Optional[int] = None,
    band_lo: Optional[float] = None,
    band_hi: Optional[float] = None,
    threads: Optional[int] = None,
) -> StudyReport:
    return _harness(threads).empirical_rate_study(
        law, grid, p, q, replications, dim, seed,
        reference_size=reference_size, groups=groups, band_lo=band_lo, band_hi=band_hi,
    )


def moment_study(cfg: StudyConfig, threads: Optional[int] = None) -> StudyReport:
    return _harness(threads).moment_study(cfg)


def mollification_study(cfg: StudyConfig, threads: Optional[int] = None) -> StudyReport:
    return _harness(threads).mollification_study(cfg)
