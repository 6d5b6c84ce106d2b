"""Detection statistics, ROC evaluation, and anomalous-vertex identification.

The binary hypothesis test compares a scalar statistic of the residuals
eigendecomposition across Monte Carlo trials: the null distribution comes
from backgrounds alone, the alternative from backgrounds with an embedded
subgraph.  ROC curves sweep a threshold over the pooled statistics; ties
count half (the trapezoid AUC then equals the Mann-Whitney statistic).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from graphresiduals.spectral import EigenResult

STATISTIC_KINDS = ("lambda1", "l1norm")


@dataclass
class TrialRecord:
    """One Monte Carlo trial: hypothesis label, statistic value, replay seed."""

    hypothesis: str  # "null" | "alternative"
    statistic: float
    seed: int
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.hypothesis not in ("null", "alternative"):
            raise ValueError(f"hypothesis must be 'null' or 'alternative', got {self.hypothesis!r}")
        if not np.isfinite(self.statistic):
            raise ValueError(f"trial statistic must be finite, got {self.statistic}")


@dataclass
class RocCurve:
    """Threshold-swept operating points plus trapezoid AUC.

    ``points`` is an (npoints, 2) array of (false-alarm probability,
    detection probability), nondecreasing in both coordinates, with
    endpoints (0, 0) and (1, 1).
    """

    points: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def pfa(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def pd(self) -> np.ndarray:
        return self.points[:, 1]


def detection_statistic(e: EigenResult, kind: str = "lambda1") -> float:
    """Scalar anomaly-presence statistic from the residuals eigendecomposition.

    ``lambda1`` is the largest residual eigenvalue (signal power).
    ``l1norm`` is n * max_v (||v||_2 / ||v||_1)^2 over the returned
    eigenvectors, large when some eigenvector concentrates on few vertices:
    n for a one-hot vector, 1 for a flat one.
    """
    if not e.converged:
        raise ValueError("detection statistic requires a converged eigendecomposition")
    if e.m < 1:
        raise ValueError("empty eigendecomposition")
    if kind == "lambda1":
        return float(e.eigenvalues[0])
    if kind == "l1norm":
        n = e.eigenvectors.shape[0]
        l2 = np.linalg.norm(e.eigenvectors, axis=0)
        l1 = np.abs(e.eigenvectors).sum(axis=0)
        return float(n * np.max((l2 / l1) ** 2))
    raise ValueError(f"unknown statistic kind {kind!r}")


def roc_curve(null_stats, alt_stats) -> RocCurve:
    """Empirical ROC from null and alternative statistic samples.

    Sweeps the decision threshold over the union of observed values; a
    trial fires when its statistic is >= the threshold.  Tied values move
    both coordinates at once, so the trapezoid AUC counts ties half.
    """
    null_stats = np.asarray(null_stats, dtype=np.float64).reshape(-1)
    alt_stats = np.asarray(alt_stats, dtype=np.float64).reshape(-1)
    if null_stats.size == 0 or alt_stats.size == 0:
        raise ValueError("both trial lists must be nonempty")

    thresholds = np.unique(np.concatenate([null_stats, alt_stats]))[::-1]
    # fraction of samples >= each threshold, via descending sort + searchsorted
    null_sorted = np.sort(null_stats)
    alt_sorted = np.sort(alt_stats)
    pfa = 1.0 - np.searchsorted(null_sorted, thresholds, side="left") / null_stats.size
    pd = 1.0 - np.searchsorted(alt_sorted, thresholds, side="left") / alt_stats.size

    points = np.column_stack([np.concatenate([[0.0], pfa, [1.0]]),
                              np.concatenate([[0.0], pd, [1.0]])])
    thresholds = np.concatenate([[np.inf], thresholds, [-np.inf]])
    auc = float(np.trapezoid(points[:, 1], points[:, 0]))
    return RocCurve(points=points, thresholds=thresholds, auc=auc)


def pfa_at_pd(roc: RocCurve, pd_target: float) -> float:
    """Smallest false-alarm probability reaching the target detection rate.

    Linear interpolation between adjacent operating points.  The (1, 1)
    endpoint makes every target in (0, 1] reachable; a defensive 1.0 is
    returned for curves lacking it.
    """
    if not 0.0 < pd_target <= 1.0:
        raise ValueError(f"pd_target must be in (0, 1], got {pd_target}")
    pfa, pd = roc.pfa, roc.pd
    for i in range(len(pd)):
        if pd[i] >= pd_target:
            if i == 0 or pd[i] == pd_target:
                return float(pfa[i])
            span = pd[i] - pd[i - 1]
            frac = (pd_target - pd[i - 1]) / span
            return float(pfa[i - 1] + frac * (pfa[i] - pfa[i - 1]))
    warnings.warn(f"detection rate {pd_target} unreachable on this curve", RuntimeWarning,
                  stacklevel=2)
    return 1.0


def identify_vertices(e: EigenResult, count: int) -> np.ndarray:
    """The ``count`` vertices with largest magnitude in the most concentrated eigenvector.

    Concentration is the same (||v||_2 / ||v||_1)^2 score used by the
    l1norm statistic.  Ties break toward lower vertex id, so relabeling
    vertices permutes the output identically.
    """
    if not e.converged:
        raise ValueError("vertex identification requires a converged eigendecomposition")
    n = e.eigenvectors.shape[0]
    if count > n:
        raise ValueError(f"count = {count} exceeds vertex count {n}")
    l2 = np.linalg.norm(e.eigenvectors, axis=0)
    l1 = np.abs(e.eigenvectors).sum(axis=0)
    best = int(np.argmax((l2 / l1) ** 2))
    magnitudes = np.abs(e.eigenvectors[:, best])
    order = np.lexsort((np.arange(n), -magnitudes))
    return np.sort(order[:count])
