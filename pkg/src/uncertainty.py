#!/usr/bin/env python3
"""
Uncertainty Handling for ParetoCover
Distributions of the environmental variable U and everything computed
over U-samples.

This module provides:
- UDistribution: uniform box or truncated diagonal Gaussian
- sample_u with common-random-number bookkeeping
- Conditional Pareto front/set at a fixed u
- Coverage probability fields (true function or GP plug-in)
- Mean-objective Pareto set
- Discretization accuracy (maximin distance, Lipschitz bound)
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import ndtr

import pareto_core as pc
from gaussian_process import GpSurrogate, NotFittedError


# ============================================================================
# CONFIGURATION
# ============================================================================

UNIFORM = 'uniform'
GAUSSIAN = 'gaussian'

MIN_ACCEPTANCE = 1e-3
TRUE_FUNCTION = 'true-function'
GP_PLUGIN = 'gp-plugin'
DEFAULT_PROBE_SIZE = 16384

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


class TruncationError(ValueError):
    """Truncation box keeps too little Gaussian mass for rejection sampling."""


# ============================================================================
# DISTRIBUTIONS
# ============================================================================

@dataclass
class UDistribution:
    """
    Distribution of U.

    kind 'uniform': uniform on [lower, upper].
    kind 'gaussian': N(center, diag(variances)) truncated to [lower, upper].
    """

    kind: str
    lower: np.ndarray
    upper: np.ndarray
    center: Optional[np.ndarray] = None
    variances: Optional[np.ndarray] = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        if self.lower.shape != self.upper.shape:
            raise pc.DimensionMismatchError("U bounds have different lengths")
        if np.any(self.upper <= self.lower):
            raise ValueError("U box must be nonempty (upper > lower)")

        if self.kind == UNIFORM:
            return
        if self.kind != GAUSSIAN:
            raise ValueError(f"Unknown U distribution kind: {self.kind}")

        self.center = np.asarray(self.center, dtype=float).ravel()
        self.variances = np.broadcast_to(
            np.asarray(self.variances, dtype=float), self.lower.shape).copy()
        if self.center.shape != self.lower.shape:
            raise pc.DimensionMismatchError("Gaussian center does not match U bounds")
        if np.any(self.variances <= 0):
            raise ValueError("Gaussian variances must be positive")
        if np.any(self.center < self.lower) or np.any(self.center > self.upper):
            raise ValueError("Truncation box must contain the Gaussian center")

    @classmethod
    def uniform(cls, lower, upper) -> 'UDistribution':
        return cls(UNIFORM, lower, upper)

    @classmethod
    def gaussian(cls, center, variances, lower, upper) -> 'UDistribution':
        return cls(GAUSSIAN, lower, upper, center=center, variances=variances)

    @property
    def dimension(self) -> int:
        return self.lower.size

    def contains(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.all((u >= self.lower) & (u <= self.upper), axis=1)

    def _dim_masses(self) -> np.ndarray:
        std = np.sqrt(self.variances)
        return ndtr((self.upper - self.center) / std) - ndtr((self.lower - self.center) / std)

    def acceptance_mass(self) -> float:
        """Probability that an untruncated draw lands in the box (1 for uniform)."""
        if self.kind == UNIFORM:
            return 1.0
        return float(np.prod(self._dim_masses()))

    def pdf(self, u) -> np.ndarray:
        """
        Density p_U at each row of u; zero outside the support.

        For the Gaussian kind this is the renormalized truncated density.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        inside = self.contains(u)
        if self.kind == UNIFORM:
            density = np.full(u.shape[0], 1.0 / np.prod(self.upper - self.lower))
        else:
            std = np.sqrt(self.variances)
            z = (u - self.center) / std
            per_dim = np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * std * self._dim_masses())
            density = np.prod(per_dim, axis=1)
        return np.where(inside, density, 0.0)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. draws; Gaussian draws are truncated by rejection."""
        if self.kind == UNIFORM:
            return self.lower + rng.random((n, self.dimension)) * (self.upper - self.lower)

        mass = self.acceptance_mass()
        if mass < MIN_ACCEPTANCE:
            raise TruncationError(
                f"Truncation box keeps only {mass:.2e} of the Gaussian mass (minimum {MIN_ACCEPTANCE})"
            )
        std = np.sqrt(self.variances)
        accepted = []
        remaining = n
        while remaining > 0:
            batch = int(np.ceil(remaining / mass * 1.2)) + 16
            draws = self.center + std * rng.standard_normal((batch, self.dimension))
            draws = draws[self.contains(draws)]
            accepted.append(draws[:remaining])
            remaining -= accepted[-1].shape[0]
        return np.vstack(accepted)

    def to_dict(self) -> Dict[str, Any]:
        data = {'kind': self.kind, 'lower': self.lower.tolist(), 'upper': self.upper.tolist()}
        if self.kind == GAUSSIAN:
            data['center'] = self.center.tolist()
            data['variances'] = self.variances.tolist()
            data['truncation'] = 'rejection'
            data['acceptance_mass'] = self.acceptance_mass()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'UDistribution':
        return cls(data['kind'], data['lower'], data['upper'],
                   center=data.get('center'), variances=data.get('variances'))


@dataclass
class USampleSet:
    """Samples of U, the seed they came from, and whether they stay fixed (CRN)."""

    samples: np.ndarray
    seed: Any = None
    crn: bool = True

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))

    def __len__(self) -> int:
        return self.samples.shape[0]


def sample_u(dist: UDistribution, n: int, seed=None, crn: bool = True) -> USampleSet:
    """
    Draw n samples of U.

    Args:
        dist: Distribution of U
        n: Number of samples (>= 1)
        seed: Anything np.random.default_rng accepts (int or int sequence)
        crn: Recorded flag; True means the set is reused across iterations

    Raises:
        TruncationError: if the Gaussian acceptance rate is below 1e-3

    Example:
        >>> s = sample_u(UDistribution.uniform([0, 0], [1, 1]), 10, seed=1)
        >>> len(s)
        10
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return USampleSet(dist.sample(n, rng), seed=seed, crn=crn)


# ============================================================================
# CONDITIONAL FRONTS AND COVERAGE
# ============================================================================

def _evaluate_at_u(evaluator: Evaluator, points: np.ndarray, u) -> np.ndarray:
    u_rows = np.tile(np.asarray(u, dtype=float).ravel(), (points.shape[0], 1))
    values = np.atleast_2d(np.asarray(evaluator(points, u_rows), dtype=float))
    if values.shape[0] != points.shape[0]:
        raise pc.EvaluatorError(
            f"Evaluator returned {values.shape[0]} rows for {points.shape[0]} candidates"
        )
    bad = ~np.all(np.isfinite(values), axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise pc.EvaluatorError(
            f"Non-finite objective at candidate {i} (x={points[i].tolist()}, u={np.ravel(u).tolist()})"
        )
    return values


def conditional_front_and_set(evaluator: Evaluator, candidates: pc.CandidateSet,
                              u) -> Tuple[pc.FrontEstimate, np.ndarray]:
    """
    Discretized conditional Pareto front and set at a fixed u.

    Args:
        evaluator: Vectorized f(X, U) -> Y on row-aligned arrays
        candidates: Design points to compare
        u: Environmental value

    Returns:
        (front, candidate indices of the conditional Pareto set)
    """
    values = _evaluate_at_u(evaluator, candidates.points, u)
    idx = pc.non_dominated(values)
    return pc.FrontEstimate(values[idx], indices=idx), idx


@dataclass
class CoverageField:
    """Per-candidate probability of belonging to the conditional Pareto set."""

    candidates: pc.CandidateSet
    probabilities: np.ndarray
    n_u: int
    estimator: str = TRUE_FUNCTION
    counts: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.probabilities.shape != (len(self.candidates),):
            raise pc.DimensionMismatchError("One probability per candidate is required")
        if np.any(self.probabilities < 0) or np.any(self.probabilities > 1):
            raise ValueError("Coverage probabilities must lie in [0, 1]")

    def argmax(self) -> np.ndarray:
        """Candidate with the highest coverage (first one on ties)."""
        return self.candidates.points[int(np.argmax(self.probabilities))]

    def top_quantile_indices(self, percent: float) -> np.ndarray:
        """Indices of the top `percent` % candidates by probability, ties at the cut kept."""
        if not 0 < percent <= 100:
            raise ValueError(f"percent must be in (0, 100], got {percent}")
        k = max(1, int(np.ceil(len(self.candidates) * percent / 100.0)))
        threshold = np.sort(self.probabilities)[::-1][k - 1]
        return np.flatnonzero(self.probabilities >= threshold)

    def top_quantile(self, percent: float) -> 'CoverageField':
        idx = self.top_quantile_indices(percent)
        subset = pc.CandidateSet(self.candidates.points[idx], self.candidates.lower,
                                 self.candidates.upper, layout=self.candidates.layout,
                                 seed=self.candidates.seed)
        counts = None if self.counts is None else self.counts[idx]
        return CoverageField(subset, self.probabilities[idx], self.n_u, self.estimator, counts)

    def to_csv(self, path, extra_columns: Optional[Dict[str, List]] = None) -> Path:
        """
        Write one row per candidate: x1..x_nx, probability[, extra columns].

        Floats are written with repr() so the file reads back bit-exact.
        """
        logger = logging.getLogger('ParetoCover')
        path = Path(path)
        extra_columns = extra_columns or {}
        header = [f'x{i + 1}' for i in range(self.candidates.dimension)] + ['probability']
        header += list(extra_columns)

        try:
            with open(path, 'w', newline='', encoding='utf-8') as f:
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(header)
                for i, (x, p) in enumerate(zip(self.candidates.points, self.probabilities)):
                    row = [repr(float(v)) for v in x] + [repr(float(p))]
                    row += [extra_columns[name][i] for name in extra_columns]
                    writer.writerow(row)
        except Exception as e:
            logger.error(f"Error writing coverage CSV {path}: {e}")
            raise
        return path

    @classmethod
    def from_csv(cls, path, lower, upper, n_u: int = 0,
                 estimator: str = TRUE_FUNCTION) -> 'CoverageField':
        with open(path, 'r', newline='', encoding='utf-8') as f:
            reader = csv.reader(f)
            header = next(reader)
            n_x = sum(1 for name in header if name.startswith('x'))
            rows = [[float(v) for v in row[:n_x + 1]] for row in reader]
        data = np.array(rows, dtype=float).reshape(-1, n_x + 1)
        candidates = pc.CandidateSet(data[:, :n_x], lower, upper)
        return cls(candidates, data[:, n_x], n_u, estimator)


def _coverage(evaluator: Evaluator, candidates: pc.CandidateSet,
              u_samples: USampleSet, estimator: str, threads: int) -> CoverageField:
    logger = logging.getLogger('ParetoCover')
    if len(candidates) == 0:
        raise ValueError("Coverage needs a non-empty candidate set")
    if len(u_samples) == 0:
        raise ValueError("Coverage needs at least one U sample")

    def members(u):
        return conditional_front_and_set(evaluator, candidates, u)[1]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sets = list(pool.map(members, u_samples.samples))
    else:
        sets = [members(u) for u in u_samples.samples]

    counts = np.zeros(len(candidates), dtype=np.int64)
    for idx in sets:
        counts[idx] += 1

    n_u = len(u_samples)
    logger.debug(f"Coverage ({estimator}) over {len(candidates)} candidates, {n_u} U samples")
    return CoverageField(candidates, counts / n_u, n_u, estimator, counts)


def coverage_probability(evaluator: Evaluator, candidates: pc.CandidateSet,
                         u_samples: USampleSet, threads: int = 1) -> CoverageField:
    """
    Fraction of U samples for which each candidate is in the conditional Pareto set.

    Example:
        >>> field = coverage_probability(problem.evaluate, grid, sample_u(problem.u_dist, 2048, seed=0))
        >>> field.argmax()
    """
    return _coverage(evaluator, candidates, u_samples, TRUE_FUNCTION, threads)


def gp_mean_evaluator(model: GpSurrogate, beta: float = 0.0) -> Evaluator:
    """Vectorized evaluator m_F(x, u) + beta * sigma_F(x, u)."""
    if model is None or not model.is_fitted:
        raise NotFittedError("GP surrogate has not been fitted")

    def evaluate(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        means, stds = model.predict(np.hstack([x, u]))
        return means + beta * stds if beta else means

    return evaluate


def coverage_probability_plugin(model: GpSurrogate, candidates: pc.CandidateSet,
                                u_samples: USampleSet, threads: int = 1) -> CoverageField:
    """Coverage field with the GP mean in place of the true objectives."""
    return _coverage(gp_mean_evaluator(model), candidates, u_samples, GP_PLUGIN, threads)


# ============================================================================
# MEAN OBJECTIVE AND DISCRETIZATION QUALITY
# ============================================================================

def mean_objective_front(evaluator: Evaluator, candidates: pc.CandidateSet,
                         u_samples: Optional[USampleSet] = None,
                         mean_function: Optional[Callable[[np.ndarray], np.ndarray]] = None
                         ) -> Tuple[pc.FrontEstimate, np.ndarray, np.ndarray]:
    """
    Pareto front/set of the expected objectives E_U[f(x, U)] over the candidates.

    Uses `mean_function` (vectorized x -> E f) when given, otherwise the
    sample average over `u_samples`.

    Returns:
        (front, set indices, (n, d) mean objective values)
    """
    points = candidates.points
    if mean_function is not None:
        means = np.atleast_2d(np.asarray(mean_function(points), dtype=float))
    else:
        if u_samples is None or len(u_samples) == 0:
            raise ValueError("mean_objective_front needs U samples or a closed-form mean")
        total = None
        for u in u_samples.samples:
            values = _evaluate_at_u(evaluator, points, u)
            total = values if total is None else total + values
        means = total / len(u_samples)

    idx = pc.non_dominated(means)
    return pc.FrontEstimate(means[idx], indices=idx), idx, means


@dataclass
class DiscretizationAccuracy:
    """Maximin distance of a candidate set and the induced front accuracy."""

    delta: float
    n_probe: int
    lipschitz: Optional[float] = None

    @property
    def epsilon(self) -> Optional[float]:
        return None if self.lipschitz is None else self.lipschitz * self.delta

    def to_dict(self) -> Dict[str, Any]:
        return {'delta': self.delta, 'n_probe': self.n_probe,
                'lipschitz': self.lipschitz, 'epsilon': self.epsilon}


def discretization_accuracy(candidates: pc.CandidateSet, lipschitz: Optional[float] = None,
                            n_probe: int = DEFAULT_PROBE_SIZE, seed=None) -> DiscretizationAccuracy:
    """
    Estimate delta (maximin distance) against a dense Sobol probe of the box.

    With an L-Lipschitz objective every conditional front point lies within
    L * delta of the discretized front.
    """
    if lipschitz is not None and lipschitz < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    probe = pc.sobol_set(candidates.lower, candidates.upper, n_probe, seed=seed)
    delta = pc.maximin_distance(candidates, probe)
    return DiscretizationAccuracy(delta, len(probe), lipschitz)
