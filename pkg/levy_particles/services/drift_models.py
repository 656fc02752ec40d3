"""
Built-in bounded drifts b(x, mu): Holder kink plus a bounded mean interaction.

    b_i(x, mu) = a * phi_beta(x_i) + c * int tanh(y_i) mu(dy),
    phi_beta(s) = sign(s) * min(|s|^beta, 1).

Constants in the coordinate sup-norm: |b| <= a + c, beta-Holder constant 2a,
W_1-Lipschitz constant c.
"""
import logging
from functools import lru_cache
from typing import Tuple

import numpy as np

from levy_particles.config import settings
from levy_particles.core.exceptions import DimensionError, ValidationError
from levy_particles.schemas.drift import AdmissibilityReport, DriftKind, DriftSpec
from levy_particles.services.empirical_measure import EmpiricalMeasure, wasserstein_exact


logger = logging.getLogger(__name__)

MAX_MOLLIFIED_DIM = 2


def phi_beta(s: np.ndarray, beta: float) -> np.ndarray:
    """Truncated signed power sign(s) * min(|s|^beta, 1)."""
    return np.sign(s) * np.minimum(np.abs(s) ** beta, 1.0)


def interaction_term(spec: DriftSpec, mu: EmpiricalMeasure) -> np.ndarray:
    """c * int tanh(y) mu(dy), one value per coordinate."""
    if spec.c == 0.0:
        return np.zeros(spec.dim)
    # sorted before summing so the mean does not depend on the order of the atoms
    values = np.sort(np.tanh(mu.points), axis=0)
    return spec.c * (values.sum(axis=0) / mu.size)


@lru_cache(maxsize=64)
def mollifier_marginal(n: int, dim: int, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Axis marginal of the midpoint rule for rho_n on [-1/n, 1/n]^dim.

    rho(z) is proportional to exp(-1 / (1 - |z|^2)) on the unit ball; the
    tensor-grid weights are normalized to sum 1 and summed over the other axes.

    Returns:
        (offsets, weights), both of shape (nodes,)
    """
    h = 2.0 / (n * nodes)
    # integer offsets keep the rule exactly antisymmetric
    offsets = (np.arange(nodes) - (nodes - 1) / 2.0) * h
    grids = np.meshgrid(*([offsets] * dim), indexing="ij")
    r2 = sum((n * g) ** 2 for g in grids)
    inside = r2 < 1.0
    weights = np.zeros_like(r2)
    weights[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    weights /= weights.sum()
    marginal = weights.reshape(nodes, -1).sum(axis=1)
    return offsets, marginal


def _holder_part(spec: DriftSpec, x: np.ndarray) -> np.ndarray:
    if spec.kind == DriftKind.MOLLIFIED:
        offsets, weights = mollifier_marginal(spec.n, spec.dim, settings.MOLLIFIER_NODES)
        shifted = phi_beta(x[..., None] - offsets, spec.beta)
        return spec.a * (shifted @ weights)
    return spec.a * phi_beta(x, spec.beta)


def eval_drift_batch(spec: DriftSpec, states: np.ndarray, mu: EmpiricalMeasure) -> np.ndarray:
    """
    Drift for every row of `states` against one measure.

    Args:
        spec: Drift specification
        states: Array of shape (N, dim)
        mu: Measure argument

    Returns:
        Array of shape (N, dim)
    """
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2 or states.shape[1] != spec.dim or mu.dim != spec.dim:
        raise DimensionError(
            detail=f"drift dim {spec.dim}, states {states.shape}, measure dim {mu.dim}"
        )
    if spec.is_zero:
        return np.zeros_like(states)
    drift = interaction_term(spec, mu)
    if spec.a != 0.0:
        drift = _holder_part(spec, states) + drift
    return np.broadcast_to(drift, states.shape).copy()


def eval_drift(spec: DriftSpec, x: np.ndarray, mu: EmpiricalMeasure) -> np.ndarray:
    """Drift b(x, mu) for a single state vector."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != spec.dim:
        raise DimensionError(detail=f"x has length {x.shape[0]}, expected {spec.dim}")
    return eval_drift_batch(spec, x[None, :], mu)[0]


def mollify_drift(spec: DriftSpec, n: int) -> DriftSpec:
    """
    Mollified drift b^n(x, mu) = int b(x - z, mu) rho_n(z) dz.

    Raises:
        ValidationError: If spec is already mollified, n < 1 or dim > 2
    """
    if spec.kind == DriftKind.MOLLIFIED:
        raise ValidationError(detail="already mollified")
    if n < 1:
        raise ValidationError(detail=f"mollification level must be >= 1, got {n}")
    if spec.dim > MAX_MOLLIFIED_DIM:
        raise ValidationError(
            detail=f"mollified drifts support dim <= {MAX_MOLLIFIED_DIM}, got {spec.dim}"
        )
    return DriftSpec(
        dim=spec.dim,
        beta=spec.beta,
        kappa=spec.kappa,
        holder_amp=spec.a,
        interaction_amp=spec.c,
        bound_cap=spec.bound_cap,
        kind=DriftKind.MOLLIFIED,
        base=spec,
        n=n,
    )


def verify_admissible(spec: DriftSpec, sample_count: int, seed: int) -> AdmissibilityReport:
    """
    Sample the drift's boundedness, Holder and measure-Lipschitz ratios.

    Args:
        spec: Drift specification
        sample_count: Number of sampled pairs, at least 100
        seed: Seed of the sampling generator

    Returns:
        Report with the largest observed ratios and the PASS flag
    """
    if sample_count < 100:
        raise ValidationError(detail=f"sample_count must be >= 100, got {sample_count}")
    rng = np.random.default_rng(seed)
    d = spec.dim
    atoms = 5

    holder_ratio = 0.0
    measure_ratio = 0.0
    sup_norm = 0.0
    for _ in range(sample_count):
        x = rng.normal(scale=2.0, size=d)
        separation = 10.0 ** rng.uniform(-6.0, 0.5)
        y = x + separation * rng.uniform(-1.0, 1.0, size=d)
        mu = EmpiricalMeasure(rng.normal(scale=2.0, size=(atoms, d)))
        mu_bar = EmpiricalMeasure(mu.points + rng.normal(scale=10.0 ** rng.uniform(-4.0, 0.0), size=(atoms, d)))

        bx = eval_drift(spec, x, mu)
        sup_norm = max(sup_norm, float(np.max(np.abs(bx))))

        gap = float(np.max(np.abs(x - y)))
        if gap > 0.0:
            dx = float(np.max(np.abs(bx - eval_drift(spec, y, mu))))
            holder_ratio = max(holder_ratio, dx / gap ** spec.beta)

        w = wasserstein_exact(spec.kappa, mu, mu_bar)
        if w > 0.0:
            dmu = float(np.max(np.abs(bx - eval_drift(spec, x, mu_bar))))
            measure_ratio = max(measure_ratio, dmu / w)

    slack = 1e-9
    passed = (
        all(np.isfinite(v) for v in (holder_ratio, measure_ratio, sup_norm))
        and holder_ratio <= spec.holder_constant + slack
        and measure_ratio <= spec.measure_constant + slack
        and sup_norm <= spec.sup_bound + slack
    )
    logger.info(
        f"Admissibility: holder={holder_ratio:.6g} measure={measure_ratio:.6g} "
        f"sup={sup_norm:.6g} passed={passed}"
    )
    return AdmissibilityReport(
        sample_count=sample_count,
        holder_ratio=holder_ratio,
        measure_ratio=measure_ratio,
        sup_norm=sup_norm,
        holder_constant=spec.holder_constant,
        measure_constant=spec.measure_constant,
        sup_constant=spec.sup_bound,
        passed=passed,
    )


class DriftModel:
    """Service evaluating one drift specification."""

    def __init__(self, spec: DriftSpec):
        self.spec = spec

    def evaluate(self, x: np.ndarray, mu: EmpiricalMeasure) -> np.ndarray:
        return eval_drift(self.spec, x, mu)

    def evaluate_batch(self, states: np.ndarray, mu: EmpiricalMeasure) -> np.ndarray:
        return eval_drift_batch(self.spec, states, mu)

    def mollified(self, n: int) -> "DriftModel":
        return DriftModel(mollify_drift(self.spec, n))

    def verify(self, sample_count: int, seed: int) -> AdmissibilityReport:
        return verify_admissible(self.spec, sample_count, seed)
