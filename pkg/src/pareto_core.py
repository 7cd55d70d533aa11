#!/usr/bin/env python3
"""
Pareto Core for ParetoCover
Dominance relation and non-dominated filtering in objective space.

This module provides:
- Weak dominance checks (minimization convention)
- Non-dominated and epsilon-non-dominated filtering
- Ideal / nadir points
- Candidate sets (regular grids and scrambled Sobol sets) in a box
- Maximin distance of a discretization

Objective vectors are 1-D numpy arrays; batches are (n, d) arrays.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc


# ============================================================================
# CONFIGURATION
# ============================================================================

BOUNDS_TOLERANCE = 1e-12

PROVENANCE_TRUE = 'true-evaluations'
PROVENANCE_GP = 'gp-mean-beta'
PROVENANCE_EXTERNAL = 'external'
PROVENANCES = (PROVENANCE_TRUE, PROVENANCE_GP, PROVENANCE_EXTERNAL)

# Candidate layouts
GRID = 'grid'
SOBOL = 'sobol'
AUTO = 'auto'
MAX_GRID_DIMENSION = 3


class DimensionMismatchError(ValueError):
    """Raised when objective or design vectors do not share a dimension."""


class EvaluatorError(RuntimeError):
    """An objective evaluation failed or produced non-finite values."""


# ============================================================================
# DATA TYPES
# ============================================================================

@dataclass
class FrontEstimate:
    """
    Finite non-dominated set approximating a (conditional) Pareto front.

    `indices` holds the candidate indices the points came from, when known.
    `beta` is only meaningful for the 'gp-mean-beta' provenance.
    """

    points: np.ndarray
    provenance: str = PROVENANCE_TRUE
    beta: Optional[float] = None
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1) if pts.size else pts.reshape(0, 0)
        self.points = pts
        if self.provenance not in PROVENANCES:
            raise ValueError(f"Unknown front provenance: {self.provenance}")

    @classmethod
    def empty(cls, d: int, provenance: str = PROVENANCE_TRUE) -> 'FrontEstimate':
        """The explicitly empty front in dimension d."""
        return cls(np.empty((0, d)), provenance=provenance)

    @property
    def n_objectives(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class CandidateSet:
    """Design points x inside an axis-aligned box [lower, upper]."""

    points: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    layout: str = 'custom'
    seed: Optional[int] = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        self.points = np.asarray(self.points, dtype=float).reshape(-1, self.lower.size)

        if np.any(self.upper < self.lower):
            raise ValueError("Candidate box has upper < lower")
        if np.isnan(self.points).any():
            raise ValueError("Candidate set contains NaN entries")
        slack = BOUNDS_TOLERANCE * np.maximum(1.0, np.abs(self.upper - self.lower))
        if np.any(self.points < self.lower - slack) or np.any(self.points > self.upper + slack):
            raise ValueError("Candidate set has points outside its bounds")

    @property
    def dimension(self) -> int:
        return self.lower.size

    def __len__(self) -> int:
        return self.points.shape[0]

    def describe(self) -> dict:
        """Short JSON-friendly description used in report provenance."""
        return {
            'layout': self.layout,
            'size': len(self),
            'seed': self.seed,
            'lower': self.lower.tolist(),
            'upper': self.upper.tolist(),
        }


# ============================================================================
# CANDIDATE CONSTRUCTION
# ============================================================================

def regular_grid(lower: Sequence[float], upper: Sequence[float], per_dim: int) -> CandidateSet:
    """
    Axis-aligned regular grid with `per_dim` levels per coordinate.

    Points are ordered with the last coordinate varying fastest.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if per_dim < 1:
        raise ValueError("per_dim must be >= 1")

    axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing='ij')
    points = np.column_stack([m.ravel() for m in mesh])
    return CandidateSet(points, lower, upper, layout=GRID)


def sobol_set(lower: Sequence[float], upper: Sequence[float], n: int,
              seed: Optional[int] = None) -> CandidateSet:
    """Scrambled Sobol points scaled to the box."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if n < 1:
        raise ValueError("n must be >= 1")

    sampler = qmc.Sobol(d=lower.size, scramble=True, seed=seed)
    # random_base2 keeps the balance properties; trim to n afterwards
    m = int(np.ceil(np.log2(max(n, 2))))
    unit = sampler.random_base2(m)[:n]
    points = lower + unit * (upper - lower)
    return CandidateSet(points, lower, upper, layout=SOBOL, seed=seed)


def make_candidates(lower: Sequence[float], upper: Sequence[float], n: int,
                    layout: str = AUTO, seed: Optional[int] = None) -> CandidateSet:
    """
    Build a candidate set of roughly `n` points.

    Args:
        lower: Box lower bounds
        upper: Box upper bounds
        n: Target size (for grids, levels per axis = round(n ** (1/dim)))
        layout: 'grid', 'sobol' or 'auto' (grid up to dimension 3)
        seed: Scrambling seed for Sobol sets

    Returns:
        CandidateSet
    """
    dim = len(lower)
    if layout == AUTO:
        layout = GRID if dim <= MAX_GRID_DIMENSION else SOBOL

    if layout == GRID:
        per_dim = max(1, int(round(n ** (1.0 / dim))))
        return regular_grid(lower, upper, per_dim)
    if layout == SOBOL:
        return sobol_set(lower, upper, n, seed=seed)
    raise ValueError(f"Unknown candidate layout: {layout}")


# ============================================================================
# DOMINANCE
# ============================================================================

def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """
    Check whether `a` weakly dominates `b` (minimization).

    True iff a_i <= b_i for all i and a_j < b_j for some j.

    Example:
        >>> dominates([1, 2], [2, 2])
        True
        >>> dominates([1, 3], [3, 1])
        False
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Cannot compare vectors of shape {a.shape} and {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, arr.shape[-1] if arr.ndim == 2 else 0)
    if arr.ndim != 2:
        raise DimensionMismatchError("Points must form a (n, d) array of equal-length vectors")
    return arr


def _non_dominated_2d(points: np.ndarray) -> np.ndarray:
    # Sweep on (y1, y2) lexicographic order. Within a block of equal y1 only the
    # smallest y2 survives; it must also beat every y2 seen at smaller y1.
    order = np.lexsort((points[:, 1], points[:, 0]))
    y1 = points[order, 0]
    y2 = points[order, 1]

    starts = np.flatnonzero(np.r_[True, y1[1:] != y1[:-1]])
    group = np.cumsum(np.r_[True, y1[1:] != y1[:-1]]) - 1

    running_min = np.minimum.accumulate(y2)
    prior_min = np.full(starts.size, np.inf)
    prior_min[1:] = running_min[starts[1:] - 1]

    keep = (y2 == y2[starts][group]) & (y2 < prior_min[group])
    return np.sort(order[keep])


def _non_dominated_scan(points: np.ndarray) -> np.ndarray:
    n = points.shape[0]
    dominated = np.zeros(n, dtype=bool)
    for i in range(n):
        if dominated[i]:
            # anything i dominates is also dominated by whoever dominates i
            continue
        p = points[i]
        beaten = np.all(p <= points, axis=1) & np.any(p < points, axis=1)
        dominated |= beaten
    return np.flatnonzero(~dominated)


def non_dominated(points) -> np.ndarray:
    """
    Indices of the non-dominated points, in increasing order.

    Duplicates are all retained (equal vectors do not dominate each other).
    Two objectives use an O(n log n) sweep; higher dimensions use the
    pairwise scan with early exit.

    Args:
        points: (n, d) array-like of objective vectors

    Returns:
        Integer index array (empty for empty input)
    """
    points = _as_points(points)
    if points.shape[0] == 0:
        return np.empty(0, dtype=int)
    if points.shape[1] == 2:
        return _non_dominated_2d(points)
    return _non_dominated_scan(points)


def epsilon_non_dominated(points, epsilon: float) -> np.ndarray:
    """
    Indices i such that no j satisfies points[j] ≺ points[i] - epsilon.

    A scalar epsilon shifts every objective by the same amount. epsilon = 0
    is exactly `non_dominated`.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    points = _as_points(points)
    if epsilon == 0 or points.shape[0] == 0:
        return non_dominated(points)

    keep = np.ones(points.shape[0], dtype=bool)
    for i in range(points.shape[0]):
        shifted = points[i] - epsilon
        beaten = np.all(points <= shifted, axis=1) & np.any(points < shifted, axis=1)
        keep[i] = not beaten.any()
    return np.flatnonzero(keep)


def front_of(points, provenance: str = PROVENANCE_TRUE,
             beta: Optional[float] = None) -> FrontEstimate:
    """Non-dominated subset of `points` wrapped as a FrontEstimate."""
    points = _as_points(points)
    idx = non_dominated(points)
    return FrontEstimate(points[idx], provenance=provenance, beta=beta, indices=idx)


def ideal_nadir(points) -> Tuple[np.ndarray, np.ndarray]:
    """
    Componentwise minimum (ideal) and maximum (nadir).

    Example:
        >>> ideal_nadir([[1, 2], [2, 1]])
        (array([1., 1.]), array([2., 2.]))
    """
    points = _as_points(points)
    if points.shape[0] == 0:
        raise ValueError("ideal_nadir needs at least one point")
    return points.min(axis=0), points.max(axis=0)


# ============================================================================
# DISCRETIZATION QUALITY
# ============================================================================

def maximin_distance(design, probe) -> float:
    """
    Largest Euclidean distance from a probe point to its nearest design point.

    With an L-Lipschitz objective, every Pareto-optimal value lies within
    L * maximin_distance of a value evaluated on the design.

    Args:
        design: CandidateSet or (n, dim) array
        probe: CandidateSet or (m, dim) array, typically a dense fill of the box

    Returns:
        Nonnegative float
    """
    design_pts = design.points if isinstance(design, CandidateSet) else np.atleast_2d(np.asarray(design, dtype=float))
    probe_pts = probe.points if isinstance(probe, CandidateSet) else np.atleast_2d(np.asarray(probe, dtype=float))

    if design_pts.shape[0] == 0 or probe_pts.shape[0] == 0:
        raise ValueError("maximin_distance needs non-empty design and probe sets")
    if design_pts.shape[1] != probe_pts.shape[1]:
        raise DimensionMismatchError(
            f"Design dimension {design_pts.shape[1]} != probe dimension {probe_pts.shape[1]}"
        )

    distances, _ = cKDTree(design_pts).query(probe_pts, k=1)
    return float(np.max(distances))
