#!/usr/bin/env python3
"""
Quality Metrics for ParetoCover
Distances between fronts and between coverage fields.

This module provides:
- gd_p / igd_p / delta_p (averaged Hausdorff distance)
- coverage_l2 between two coverage fields on the same candidates
- MetricReport and delta_distribution: per-u Δ_p of the GP plug-in front
  against the true conditional front
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.spatial.distance import cdist

import pareto_core as pc
from gaussian_process import GpSurrogate, NotFittedError
from uncertainty import CoverageField, GP_PLUGIN, TRUE_FUNCTION, USampleSet, gp_mean_evaluator


# ============================================================================
# CONFIGURATION
# ============================================================================

DEFAULT_P = 2.0
DEFAULT_METRIC_NU = 512
DEFAULT_X_TEST_SIZE = 5000
QUANTILES = (0.25, 0.5, 0.75)


# ============================================================================
# FRONT DISTANCES
# ============================================================================

def _points(front) -> np.ndarray:
    pts = front.points if isinstance(front, pc.FrontEstimate) else np.atleast_2d(np.asarray(front, dtype=float))
    if pts.size == 0:
        raise ValueError("Front distances need non-empty fronts")
    return pts


def _directed(source, target, p: float) -> float:
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    a, b = _points(source), _points(target)
    if a.shape[1] != b.shape[1]:
        raise pc.DimensionMismatchError(f"Fronts have {a.shape[1]} and {b.shape[1]} objectives")
    nearest = cdist(a, b).min(axis=1)
    return float(np.mean(nearest ** p) ** (1.0 / p))


def gd_p(approx, reference, p: float = DEFAULT_P) -> float:
    """
    Generational distance: p-mean distance from approx points to the reference front.

    Example:
        >>> gd_p([[0, 0]], [[1, 0], [0, 1]])
        1.0
    """
    return _directed(approx, reference, p)


def igd_p(approx, reference, p: float = DEFAULT_P) -> float:
    """Inverted generational distance: p-mean distance from reference points to approx."""
    return _directed(reference, approx, p)


def delta_p(approx, reference, p: float = DEFAULT_P) -> float:
    """Averaged Hausdorff distance max(GD_p, IGD_p)."""
    return max(gd_p(approx, reference, p), igd_p(approx, reference, p))


def coverage_l2(truth: CoverageField, estimate: CoverageField) -> float:
    """Mean squared difference of two coverage fields on identical candidates."""
    if not np.array_equal(truth.candidates.points, estimate.candidates.points):
        raise ValueError("Coverage fields are defined on different candidate sets")
    diff = truth.probabilities - estimate.probabilities
    return float(np.mean(diff ** 2))


# ============================================================================
# METRIC REPORT
# ============================================================================

@dataclass
class MetricReport:
    """Distribution of Δ_p over U samples plus the coverage L2 distance."""

    deltas: np.ndarray
    coverage_l2: Optional[float] = None
    p: float = DEFAULT_P
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.deltas = np.asarray(self.deltas, dtype=float)

    @property
    def n_u(self) -> int:
        return self.deltas.size

    def summary(self) -> Dict[str, float]:
        if self.deltas.size == 0:
            return {}
        q25, median, q75 = np.quantile(self.deltas, QUANTILES)
        return {
            'mean': float(np.mean(self.deltas)),
            'median': float(median),
            'q25': float(q25),
            'q75': float(q75),
            'min': float(np.min(self.deltas)),
            'max': float(np.max(self.deltas)),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            'p': self.p,
            'n_u': self.n_u,
            'delta_summary': self.summary(),
            'coverage_l2': self.coverage_l2,
            'provenance': self.provenance,
        }


def delta_distribution(model: GpSurrogate, problem, u_samples: USampleSet,
                       x_test: pc.CandidateSet, p: float = DEFAULT_P,
                       threads: int = 1, provenance: Optional[Dict[str, Any]] = None) -> MetricReport:
    """
    Compare true and plug-in conditional fronts on X_test for every u sample.

    For each u_i the true front comes from problem evaluations on X_test and
    the plug-in front from the GP means; Δ_p between them is recorded. The
    same per-u sets also give both coverage fields, whose L2 distance is
    reported.

    Args:
        model: Fitted surrogate
        problem: ProblemDefinition supplying the true evaluator
        u_samples: U samples (512 in the usual protocol)
        x_test: Test candidates, disjoint from X_pareto
        p: Exponent of the distances
        threads: Worker threads for the per-u computations

    Returns:
        MetricReport
    """
    logger = logging.getLogger('ParetoCover')
    if model is None or not model.is_fitted:
        raise NotFittedError("Metrics need a fitted surrogate")
    plugin = gp_mean_evaluator(model)
    points = x_test.points

    def per_u(u):
        u_rows = np.tile(u, (points.shape[0], 1))
        true_values = problem.evaluate(points, u_rows)
        gp_values = plugin(points, u_rows)
        true_idx = pc.non_dominated(true_values)
        gp_idx = pc.non_dominated(gp_values)
        return delta_p(gp_values[gp_idx], true_values[true_idx], p), true_idx, gp_idx

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(per_u, u_samples.samples))
    else:
        results = [per_u(u) for u in u_samples.samples]

    n_u = len(u_samples)
    true_counts = np.zeros(len(x_test), dtype=np.int64)
    gp_counts = np.zeros(len(x_test), dtype=np.int64)
    deltas = np.empty(n_u)
    for i, (delta, true_idx, gp_idx) in enumerate(results):
        deltas[i] = delta
        true_counts[true_idx] += 1
        gp_counts[gp_idx] += 1

    truth = CoverageField(x_test, true_counts / n_u, n_u, TRUE_FUNCTION, true_counts)
    estimate = CoverageField(x_test, gp_counts / n_u, n_u, GP_PLUGIN, gp_counts)

    report = MetricReport(deltas, coverage_l2(truth, estimate), p, dict(provenance or {}))
    report.provenance.setdefault('n_u', n_u)
    report.provenance.setdefault('x_test', x_test.describe())
    logger.debug(f"Delta_{p:g} median {report.summary()['median']:.4g}, coverage L2 {report.coverage_l2:.4g}")
    return report
