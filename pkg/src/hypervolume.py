#!/usr/bin/env python3
"""
Hypervolume for ParetoCover
Exact hypervolume and hypervolume improvement, plus expected improvement
under independent Gaussian predictions.

This module provides:
- hv / hvi for two and three objectives (points clipped to the reference box)
- Vectorized hvi_batch
- Closed-form EHVI for two objectives (ehvi_2d, ehvi_2d_batch)
- Monte Carlo EHVI with standard error (any supported d)
- Scrambled-Sobol EHVI for three objectives
- ehvi dispatcher by number of objectives

All objectives are minimized. The two-objective computations work on the
"staircase" of the sorted front: abscissae a_1 < ... < a_k with ordinates
b_1 > ... > b_k, closed by a_{k+1} = r_1 and b_0 = r_2.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

import pareto_core as pc


# ============================================================================
# CONFIGURATION
# ============================================================================

SUPPORTED_DIMENSIONS = (2, 3)
MIN_MC_SAMPLES = 100
DEFAULT_QMC_SAMPLES = 4096

INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class UnsupportedDimensionError(ValueError):
    """Exact hypervolume requested for more than three objectives."""


@dataclass
class ReferencePoint:
    """Upper corner of the box B_ref that bounds every hypervolume."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Reference point must be finite")

    def to_list(self) -> list:
        return [float(v) for v in self.values]


# ============================================================================
# INPUT NORMALIZATION
# ============================================================================

def _ref_values(ref) -> np.ndarray:
    if isinstance(ref, ReferencePoint):
        return ref.values
    return ReferencePoint(ref).values


def _front_points(front, d: int) -> np.ndarray:
    pts = front.points if isinstance(front, pc.FrontEstimate) else np.asarray(front, dtype=float)
    if pts.size == 0:
        return np.empty((0, d))
    pts = np.atleast_2d(pts)
    if pts.shape[1] != d:
        raise pc.DimensionMismatchError(
            f"Front has {pts.shape[1]} objectives but reference point has {d}"
        )
    return pts


def _check_dimension(d: int):
    if d not in SUPPORTED_DIMENSIONS:
        raise UnsupportedDimensionError(
            f"Exact hypervolume supports d in {SUPPORTED_DIMENSIONS}, got d={d}; "
            f"use ehvi_mc for a sampling estimate"
        )


def _inside(points: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Rows strictly dominating the reference point; the rest add no volume."""
    if points.shape[0] == 0:
        return points
    return points[np.all(points < r, axis=1)]


def _staircase(points: np.ndarray, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted non-dominated (a, b) of a 2-D front inside the box."""
    pts = _inside(points, r)
    if pts.shape[0] == 0:
        return np.empty(0), np.empty(0)
    pts = np.unique(pts[pc.non_dominated(pts)], axis=0)
    return pts[:, 0], pts[:, 1]


# ============================================================================
# HYPERVOLUME
# ============================================================================

def _hv_2d(points: np.ndarray, r: np.ndarray) -> float:
    a, b = _staircase(points, r)
    if a.size == 0:
        return 0.0
    upper_b = np.r_[r[1], b[:-1]]
    return float(np.sum((r[0] - a) * (upper_b - b)))


def _slices(points: np.ndarray, r: np.ndarray):
    """
    Third-coordinate sweep: yields (z_lo, z_hi, 2-D slice front) for each
    band in which the set of points with p_3 <= z is constant.
    """
    pts = _inside(points, r)
    order = np.argsort(pts[:, 2], kind='stable')
    pts = pts[order]
    levels = np.r_[pts[:, 2], r[2]]
    for j in range(pts.shape[0]):
        if levels[j + 1] > levels[j]:
            yield levels[j], levels[j + 1], pts[:j + 1, :2]


def _hv_3d(points: np.ndarray, r: np.ndarray) -> float:
    total = 0.0
    for z_lo, z_hi, slice_front in _slices(points, r):
        total += _hv_2d(slice_front, r[:2]) * (z_hi - z_lo)
    return total


def hv(front, ref) -> float:
    """
    Hypervolume dominated by `front` inside the box bounded by `ref`.

    Args:
        front: FrontEstimate or (n, d) array, d in {2, 3}
        ref: ReferencePoint or length-d vector

    Returns:
        Nonnegative float (0 for an empty front)

    Raises:
        UnsupportedDimensionError: for d >= 4

    Example:
        >>> hv([[1, 2], [2, 1]], [3, 3])
        3.0
    """
    r = _ref_values(ref)
    d = r.size
    _check_dimension(d)
    points = _front_points(front, d)
    if points.shape[0] == 0:
        return 0.0
    return _hv_2d(points, r) if d == 2 else _hv_3d(points, r)


def hvi(y, front, ref) -> float:
    """
    Hypervolume improvement of adding `y` to `front`.

    Zero when y is weakly dominated by a front point or lies outside B_ref.

    Example:
        >>> hvi([0.5, 0.5], [[1, 2], [2, 1]], [3, 3])
        3.25
    """
    r = _ref_values(ref)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != r.size:
        raise pc.DimensionMismatchError(f"Point has {y.size} objectives, reference has {r.size}")
    _check_dimension(r.size)
    points = _front_points(front, r.size)

    if not np.all(y < r):
        return 0.0
    if points.shape[0] and np.any(np.all(points <= y, axis=1)):
        return 0.0
    gain = hv(np.vstack([points, y]), r) - hv(points, r)
    return max(gain, 0.0)


def _hvi_2d_batch(y: np.ndarray, points: np.ndarray, r: np.ndarray) -> np.ndarray:
    # per-column gain: (b_i - y2)^+ * (a_{i+1} - max(a_i, y1))^+
    a, b = _staircase(points, r)
    a_lo = np.r_[-np.inf, a]
    a_hi = np.r_[a, r[0]]
    b_col = np.r_[r[1], b]
    heights = np.maximum(b_col[None, :] - y[:, 1:2], 0.0)
    widths = np.maximum(a_hi[None, :] - np.maximum(a_lo[None, :], y[:, 0:1]), 0.0)
    return np.sum(heights * widths, axis=1)


def _hvi_3d_batch(y: np.ndarray, points: np.ndarray, r: np.ndarray) -> np.ndarray:
    pts = _inside(points, r)
    pts = pts[np.argsort(pts[:, 2], kind='stable')]
    levels = np.r_[-np.inf, pts[:, 2], r[2]]
    total = np.zeros(y.shape[0])
    for j in range(levels.size - 1):
        depth = np.maximum(levels[j + 1] - np.maximum(levels[j], y[:, 2]), 0.0)
        active = depth > 0
        if not active.any():
            continue
        total[active] += depth[active] * _hvi_2d_batch(y[active, :2], pts[:j, :2], r[:2])
    return total


def hvi_batch(ys, front, ref) -> np.ndarray:
    """
    Hypervolume improvement of each row of `ys` (vectorized hvi).

    Args:
        ys: (m, d) candidate objective vectors
        front: FrontEstimate or (n, d) array
        ref: ReferencePoint or length-d vector

    Returns:
        (m,) nonnegative array
    """
    r = _ref_values(ref)
    d = r.size
    _check_dimension(d)
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if ys.shape[1] != d:
        raise pc.DimensionMismatchError(f"Points have {ys.shape[1]} objectives, reference has {d}")
    points = _front_points(front, d)
    if d == 2:
        return _hvi_2d_batch(ys, points, r)
    return _hvi_3d_batch(ys, points, r)


# ============================================================================
# EXPECTED HYPERVOLUME IMPROVEMENT
# ============================================================================

def _psi(c: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """E[(c - Y)^+] for Y ~ N(mu, sigma^2), with the sigma = 0 limit (c - mu)^+."""
    diff = c - mu
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        t = np.where(sigma > 0, diff / np.where(sigma > 0, sigma, 1.0), 0.0)
        smooth = diff * ndtr(t) + sigma * INV_SQRT_2PI * np.exp(-0.5 * t * t)
    value = np.where(sigma > 0, smooth, np.maximum(diff, 0.0))
    # c = -inf columns contribute nothing
    return np.where(np.isneginf(c), 0.0, value)


def ehvi_2d_batch(means, stddevs, front, ref) -> np.ndarray:
    """
    Closed-form EHVI for many independent bivariate Gaussian predictions.

    Uses E[hvi(Y)] = sum_i E[(b_i - Y2)^+] * (E[(a_{i+1} - Y1)^+] - E[(a_i - Y1)^+]),
    which follows from the column decomposition of hvi and independence of
    the two objectives. Nonpositive stddevs take the deterministic limit.

    Returns:
        (m,) nonnegative array
    """
    r = _ref_values(ref)
    if r.size != 2:
        raise pc.DimensionMismatchError(f"ehvi_2d needs two objectives, got {r.size}")
    means = np.atleast_2d(np.asarray(means, dtype=float))
    stddevs = np.maximum(np.atleast_2d(np.asarray(stddevs, dtype=float)), 0.0)
    if means.shape != stddevs.shape or means.shape[1] != 2:
        raise pc.DimensionMismatchError("means and stddevs must both be (m, 2)")

    a, b = _staircase(_front_points(front, 2), r)
    a_lo = np.r_[-np.inf, a][None, :]
    a_hi = np.r_[a, r[0]][None, :]
    b_col = np.r_[r[1], b][None, :]

    mu1, s1 = means[:, 0:1], stddevs[:, 0:1]
    mu2, s2 = means[:, 1:2], stddevs[:, 1:2]
    width = _psi(a_hi, mu1, s1) - _psi(a_lo, mu1, s1)
    height = _psi(b_col, mu2, s2)
    return np.maximum(np.sum(height * width, axis=1), 0.0)


def ehvi_2d(mean, stddev, front, ref) -> float:
    """
    Closed-form EHVI of one bivariate Gaussian prediction.

    Example:
        >>> ehvi_2d([0.5, 0.5], [0.0, 0.0], [[1, 2], [2, 1]], [3, 3])
        3.25
    """
    return float(ehvi_2d_batch(np.reshape(mean, (1, -1)), np.reshape(stddev, (1, -1)), front, ref)[0])


def ehvi_mc(mean, stddev, front, ref, n_samples: int = 10000,
            seed=None) -> Tuple[float, float]:
    """
    Monte Carlo EHVI: sample mean and standard error of hvi over Gaussian draws.

    Draws come from a counter-based Philox stream so the estimate depends on
    the seed alone.

    Args:
        mean: Length-d predictive mean
        stddev: Length-d predictive standard deviations (>= 0)
        front: FrontEstimate or (n, d) array
        ref: ReferencePoint or length-d vector
        n_samples: Number of draws (>= 100)
        seed: Integer seed

    Returns:
        (estimate, std_error)
    """
    if n_samples < MIN_MC_SAMPLES:
        raise ValueError(f"n_samples must be >= {MIN_MC_SAMPLES}, got {n_samples}")
    mean = np.asarray(mean, dtype=float).ravel()
    stddev = np.maximum(np.asarray(stddev, dtype=float).ravel(), 0.0)

    rng = np.random.Generator(np.random.Philox(seed))
    draws = mean + stddev * rng.standard_normal((n_samples, mean.size))
    gains = hvi_batch(draws, front, ref)
    std_error = float(np.std(gains, ddof=1) / np.sqrt(n_samples))
    return float(np.mean(gains)), std_error


def ehvi_qmc(mean, stddev, front, ref, n_samples: int = DEFAULT_QMC_SAMPLES,
             seed=None) -> float:
    """EHVI by scrambled-Sobol Gaussian draws (used for three objectives)."""
    mean = np.asarray(mean, dtype=float).ravel()
    stddev = np.maximum(np.asarray(stddev, dtype=float).ravel(), 0.0)
    if not np.any(stddev > 0):
        return float(hvi_batch(mean.reshape(1, -1), front, ref)[0])

    sampler = qmc.Sobol(d=mean.size, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n_samples, 2))))
    unit = sampler.random_base2(m)[:n_samples]
    unit = np.clip(unit, 1e-12, 1.0 - 1e-12)
    draws = mean + stddev * ndtri(unit)
    return float(np.mean(hvi_batch(draws, front, ref)))


def ehvi(mean, stddev, front, ref, n_samples: int = DEFAULT_QMC_SAMPLES, seed=None) -> float:
    """EHVI by the method suited to the number of objectives."""
    d = _ref_values(ref).size
    _check_dimension(d)
    if d == 2:
        return ehvi_2d(mean, stddev, front, ref)
    return ehvi_qmc(mean, stddev, front, ref, n_samples=n_samples, seed=seed)


def ehvi_batch(means, stddevs, front, ref, n_samples: int = DEFAULT_QMC_SAMPLES,
               seed=None) -> np.ndarray:
    """Row-wise ehvi; closed form for two objectives, QMC otherwise."""
    d = _ref_values(ref).size
    _check_dimension(d)
    if d == 2:
        return ehvi_2d_batch(means, stddevs, front, ref)
    means = np.atleast_2d(np.asarray(means, dtype=float))
    stddevs = np.atleast_2d(np.asarray(stddevs, dtype=float))
    return np.array([
        ehvi_qmc(m, s, front, ref, n_samples=n_samples, seed=seed)
        for m, s in zip(means, stddevs)
    ])
