#!/usr/bin/env python3
"""
Acquisition Functions for ParetoCover
β-conservative conditional fronts and the uncertainty-aware EHVI family.

This module provides:
- AcquisitionSpec / ReferencePolicy configuration objects
- beta_front: front of m_F + β σ_F over the X_pareto candidates at fixed u
- reference_point: nadir plus a relative margin
- FrontCache: per-u (front, reference) cache shared by one maximization pass
- pehvi / wpehvi / iehvi and their batch forms

PEHVI and WPEHVI are functions of a joint point (x, u); IEHVI is a
function of x alone, averaged over a set of U samples.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

import hypervolume as hvm
import pareto_core as pc
from gaussian_process import GpSurrogate, NotFittedError
from uncertainty import UDistribution, USampleSet


# ============================================================================
# CONFIGURATION
# ============================================================================

PEHVI = 'pehvi'
WPEHVI = 'wpehvi'
IEHVI = 'iehvi'
RANDOM = 'random'
KINDS = (PEHVI, WPEHVI, IEHVI, RANDOM)

DEFAULT_BETA = 10.0
DEFAULT_MARGIN = 0.1
DEFAULT_FLOOR = 1e-6


@dataclass
class ReferencePolicy:
    """Reference point rule: nadir + margin * (nadir - ideal), or a fixed point."""

    margin: float = DEFAULT_MARGIN
    floor: float = DEFAULT_FLOOR
    fixed: Optional[Sequence[float]] = None


@dataclass
class AcquisitionSpec:
    """What to maximize and the ingredients it needs."""

    kind: str = IEHVI
    beta: float = DEFAULT_BETA
    pareto_candidates: Optional[pc.CandidateSet] = None
    u_samples: Optional[USampleSet] = None
    ref_policy: ReferencePolicy = field(default_factory=ReferencePolicy)
    # Sobol draws for three-objective EHVI
    n_samples: int = hvm.DEFAULT_QMC_SAMPLES
    seed: Optional[int] = 0
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown acquisition kind '{self.kind}' (expected one of {', '.join(KINDS)})")
        if self.kind != RANDOM and (self.pareto_candidates is None or len(self.pareto_candidates) == 0):
            raise ValueError(f"Acquisition '{self.kind}' needs a non-empty X_pareto candidate set")
        if self.kind == IEHVI and (self.u_samples is None or len(self.u_samples) == 0):
            raise ValueError("IEHVI needs a non-empty set of U samples")


# ============================================================================
# CONDITIONAL FRONT ESTIMATION
# ============================================================================

def beta_front(model: GpSurrogate, u, spec: AcquisitionSpec) -> pc.FrontEstimate:
    """
    Non-dominated points of {m_F(x, u) + β σ_F(x, u) : x in X_pareto}.

    β > 0 gives a pessimistic front, β < 0 an optimistic one.
    """
    if model is None or not model.is_fitted:
        raise NotFittedError("GP surrogate has not been fitted")
    x = spec.pareto_candidates.points
    u_rows = np.tile(np.asarray(u, dtype=float).ravel(), (x.shape[0], 1))
    means, stds = model.predict(np.hstack([x, u_rows]))
    values = means + spec.beta * stds if spec.beta else means
    return pc.front_of(values, provenance=pc.PROVENANCE_GP, beta=spec.beta)


def reference_point(front: pc.FrontEstimate, policy: Optional[ReferencePolicy] = None) -> hvm.ReferencePoint:
    """
    Reference point for a front.

    Example:
        >>> reference_point(pc.FrontEstimate([[0, 1], [1, 0]])).values
        array([1.1, 1.1])
    """
    policy = policy or ReferencePolicy()
    if policy.fixed is not None:
        return hvm.ReferencePoint(policy.fixed)
    if len(front) == 0:
        raise ValueError("Cannot place a reference point for an empty front")
    ideal, nadir = pc.ideal_nadir(front.points)
    offset = np.maximum(policy.margin * (nadir - ideal), policy.floor)
    return hvm.ReferencePoint(nadir + offset)


class FrontCache:
    """
    Per-u (β-front, reference point) pairs for one model and spec.

    Safe to share between threads. Build a new cache (or call invalidate)
    after every refit.
    """

    def __init__(self, model: GpSurrogate, spec: AcquisitionSpec):
        self.model = model
        self.spec = spec
        self._entries: Dict[bytes, Tuple[pc.FrontEstimate, hvm.ReferencePoint]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._entries)

    def invalidate(self, model: Optional[GpSurrogate] = None):
        with self._lock:
            self._entries.clear()
            if model is not None:
                self.model = model

    def lookup(self, u) -> Tuple[pc.FrontEstimate, hvm.ReferencePoint]:
        key = np.ascontiguousarray(u, dtype=float).ravel().tobytes()
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None:
                self.hits += 1
                return entry
        # computed outside the lock; a duplicate computation yields identical content
        front = beta_front(self.model, u, self.spec)
        entry = (front, reference_point(front, self.spec.ref_policy))
        with self._lock:
            self.misses += 1
            return self._entries.setdefault(key, entry)


def _cache_for(model, spec, cache):
    if cache is None:
        return FrontCache(model, spec)
    if cache.model is not model:
        cache.invalidate(model)
    return cache


# ============================================================================
# ACQUISITION FUNCTIONS
# ============================================================================

def _ehvi(means, stds, front, ref, spec) -> np.ndarray:
    return hvm.ehvi_batch(means, stds, front, ref, n_samples=spec.n_samples, seed=spec.seed)


def pehvi_batch(model: GpSurrogate, joint_points, spec: AcquisitionSpec,
                cache: Optional[FrontCache] = None) -> np.ndarray:
    """
    PEHVI at each joint row [x, u]: EHVI of F(x, u) against the β-front at u.

    Returns:
        (m,) nonnegative array
    """
    cache = _cache_for(model, spec, cache)
    joint_points = np.atleast_2d(np.asarray(joint_points, dtype=float))
    means, stds = model.predict(joint_points)
    values = np.empty(joint_points.shape[0])
    for i, row in enumerate(joint_points):
        front, ref = cache.lookup(row[model.n_x:])
        values[i] = _ehvi(means[i:i + 1], stds[i:i + 1], front, ref, spec)[0]
    return values


def pehvi(model: GpSurrogate, x, u, spec: AcquisitionSpec,
          cache: Optional[FrontCache] = None) -> float:
    """Profile EHVI at (x, u)."""
    joint = np.r_[np.ravel(x), np.ravel(u)]
    return float(pehvi_batch(model, joint.reshape(1, -1), spec, cache)[0])


def wpehvi_batch(model: GpSurrogate, joint_points, spec: AcquisitionSpec,
                 dist: UDistribution, cache: Optional[FrontCache] = None) -> np.ndarray:
    """PEHVI weighted by p_U(u); zero for u outside the support."""
    joint_points = np.atleast_2d(np.asarray(joint_points, dtype=float))
    weights = dist.pdf(joint_points[:, model.n_x:])
    values = np.zeros(joint_points.shape[0])
    inside = weights > 0
    if inside.any():
        values[inside] = pehvi_batch(model, joint_points[inside], spec, cache) * weights[inside]
    return values


def wpehvi(model: GpSurrogate, x, u, spec: AcquisitionSpec, dist: UDistribution,
           cache: Optional[FrontCache] = None) -> float:
    """Weighted PEHVI at (x, u)."""
    joint = np.r_[np.ravel(x), np.ravel(u)]
    return float(wpehvi_batch(model, joint.reshape(1, -1), spec, dist, cache)[0])


def iehvi_batch(model: GpSurrogate, xs, spec: AcquisitionSpec,
                cache: Optional[FrontCache] = None,
                u_samples: Optional[USampleSet] = None) -> np.ndarray:
    """
    Integrated EHVI at each row of xs: the average of PEHVI over the U samples.

    Each u_i's β-front is computed once per cache.
    """
    if u_samples is None:
        u_samples = spec.u_samples
    if u_samples is None or len(u_samples) == 0:
        raise ValueError("IEHVI needs a non-empty set of U samples")
    cache = _cache_for(model, spec, cache)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))

    def term(u):
        front, ref = cache.lookup(u)
        joint = np.hstack([xs, np.tile(u, (xs.shape[0], 1))])
        means, stds = model.predict(joint)
        return _ehvi(means, stds, front, ref, spec)

    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            terms = list(pool.map(term, u_samples.samples))
    else:
        terms = [term(u) for u in u_samples.samples]

    total = np.zeros(xs.shape[0])
    for values in terms:
        total += values
    return total / len(u_samples)


def iehvi(model: GpSurrogate, x, spec: AcquisitionSpec,
          cache: Optional[FrontCache] = None,
          u_samples: Optional[USampleSet] = None) -> float:
    """Integrated EHVI at x."""
    return float(iehvi_batch(model, np.reshape(x, (1, -1)), spec, cache, u_samples)[0])


def acquisition_batch(model: GpSurrogate, points, spec: AcquisitionSpec,
                      dist: Optional[UDistribution] = None,
                      cache: Optional[FrontCache] = None) -> np.ndarray:
    """
    Evaluate the spec's acquisition on a batch of search-space points.

    Points are joint rows for pehvi/wpehvi and x rows for iehvi.
    """
    if spec.kind == PEHVI:
        return pehvi_batch(model, points, spec, cache)
    if spec.kind == WPEHVI:
        if dist is None:
            raise ValueError("WPEHVI needs the U distribution")
        return wpehvi_batch(model, points, spec, dist, cache)
    if spec.kind == IEHVI:
        return iehvi_batch(model, points, spec, cache)
    raise ValueError("The random kind has no acquisition function")
