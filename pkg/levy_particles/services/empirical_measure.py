"""
Equal-weight empirical measures and exact Wasserstein distances between them.

Every measure here has N atoms of mass 1/N, so an optimal coupling can be
taken to be a permutation and W_p reduces to an assignment problem.
"""
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from levy_particles.config import settings
from levy_particles.core.exceptions import (
    AssignmentTooLargeError,
    ConfigError,
    DimensionError,
    ValidationError,
)


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """(1/N) sum_j delta_{x_j}; `points` has shape (N, dim)."""

    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] < 1:
            raise ValidationError(detail=f"points must be a nonempty (N, dim) array, got shape {points.shape}")
        object.__setattr__(self, "points", points)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_csv(cls, path: Path) -> "EmpiricalMeasure":
        """
        Read one point per row; a non-numeric first row is taken as a header.

        Raises:
            ConfigError: If the file is missing or is not a rectangular numeric table
        """
        try:
            with open(path, newline="", encoding="utf-8") as handle:
                rows = [row for row in csv.reader(handle) if row]
        except OSError as e:
            raise ConfigError(detail=f"cannot read point cloud {path}: {e.strerror or e}") from e
        if rows:
            try:
                [float(v) for v in rows[0]]
            except ValueError:
                rows = rows[1:]
        if not rows:
            raise ConfigError(detail=f"no points in {path}")
        widths = sorted({len(row) for row in rows})
        if len(widths) != 1:
            raise ConfigError(detail=f"ragged rows in {path}: row lengths {widths}")
        try:
            points = np.array([[float(v) for v in row] for row in rows])
        except ValueError as e:
            raise ConfigError(detail=f"non-numeric cell in {path}: {e}") from e
        return cls(points)


def _check_pair(a: EmpiricalMeasure, b: EmpiricalMeasure) -> None:
    if a.size != b.size:
        raise DimensionError(detail="unequal support sizes")
    if a.dim != b.dim:
        raise DimensionError(detail=f"dimension mismatch: {a.dim} vs {b.dim}")


def _check_metric_p(p: float) -> None:
    if not p >= 1.0:
        raise ValidationError(detail=f"p must be >= 1 for a Wasserstein distance, got {p}")


def _mean_cost(costs: np.ndarray) -> float:
    # exactly rounded, hence independent of the order of the atoms
    return math.fsum(costs.tolist()) / costs.shape[0]


def cost_matrix(p: float, a: EmpiricalMeasure, b: EmpiricalMeasure) -> np.ndarray:
    """|a_j - b_k|^p for all pairs; shape (N, N)."""
    diff = a.points[:, None, :] - b.points[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1)) ** p


def aligned_costs(p: float, a: EmpiricalMeasure, b: EmpiricalMeasure) -> np.ndarray:
    """|a_j - b_j|^p, computed with the same arithmetic as `cost_matrix`."""
    diff = a.points - b.points
    return np.sqrt((diff ** 2).sum(axis=-1)) ** p


def wasserstein_1d(p: float, a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """
    Exact W_p between equal-size clouds on the line via sorted matching.

    Raises:
        DimensionError: If sizes differ or dim != 1
    """
    _check_metric_p(p)
    _check_pair(a, b)
    if a.dim != 1:
        raise DimensionError(detail=f"wasserstein_1d requires dim 1, got {a.dim}")
    costs = np.abs(np.sort(a.points[:, 0]) - np.sort(b.points[:, 0])) ** p
    return _mean_cost(costs) ** (1.0 / p)


def optimal_cost(
    p: float,
    a: EmpiricalMeasure,
    b: EmpiricalMeasure,
    cap: Optional[int] = None,
) -> float:
    """
    Minimal mean transport cost (1/N) sum |a_j - b_sigma(j)|^p over permutations.

    For p < 1 this is reported as a p-cost; no metric property is claimed.

    Raises:
        AssignmentTooLargeError: If N exceeds the cap
    """
    if not p > 0.0:
        raise ValidationError(detail=f"p must be positive, got {p}")
    _check_pair(a, b)
    cap = settings.ASSIGNMENT_CAP if cap is None else cap
    if a.size > cap:
        raise AssignmentTooLargeError(detail=f"assignment too large: N={a.size} > cap={cap}")

    costs = cost_matrix(p, a, b)
    rows, cols = linear_sum_assignment(costs)
    return _mean_cost(costs[rows, cols])


def wasserstein_exact(
    p: float,
    a: EmpiricalMeasure,
    b: EmpiricalMeasure,
    cap: Optional[int] = None,
) -> float:
    """
    Exact W_p between equal-size clouds in any dimension via optimal assignment.

    Args:
        p: Exponent, p >= 1
        a: First cloud
        b: Second cloud
        cap: Largest admissible N (defaults to settings.ASSIGNMENT_CAP)

    Returns:
        W_p(a, b)
    """
    _check_metric_p(p)
    return optimal_cost(p, a, b, cap) ** (1.0 / p)


def coupling_upper_bound(p: float, a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """W_p bound from the index-aligned coupling (1/N) sum delta_{a_j} x delta_{b_j}."""
    _check_metric_p(p)
    _check_pair(a, b)
    return _mean_cost(aligned_costs(p, a, b)) ** (1.0 / p)


class WassersteinCalculator:
    """Service choosing the exact W_p routine for a pair of clouds."""

    def __init__(self, cap: Optional[int] = None):
        self.cap = settings.ASSIGNMENT_CAP if cap is None else cap

    def distance(self, p: float, a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
        """
        Exact W_p for p >= 1, sorted matching on the line and assignment otherwise.

        Below p = 1 the optimal p-cost is returned instead.
        """
        if p < 1.0:
            return optimal_cost(p, a, b, self.cap)
        if a.dim == 1:
            return wasserstein_1d(p, a, b)
        return wasserstein_exact(p, a, b, self.cap)

    def flow_gap(self, a: Sequence[EmpiricalMeasure], b: Sequence[EmpiricalMeasure]) -> float:
        """
        Largest W_1 over paired measures of two flows.

        Above the cap the index-aligned coupling bounds W_1; it applies
        because both flows carry the same particles.
        """
        gap = 0.0
        for mu, nu in zip(a, b):
            if mu.dim == 1:
                w = wasserstein_1d(1.0, mu, nu)
            elif mu.size <= self.cap:
                w = wasserstein_exact(1.0, mu, nu, self.cap)
            else:
                w = coupling_upper_bound(1.0, mu, nu)
            gap = max(gap, w)
        return gap
