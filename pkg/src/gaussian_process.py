#!/usr/bin/env python3
"""
Gaussian Process Surrogate for ParetoCover
Independent per-objective GP regression on the joint space X x U.

This module provides:
- Matérn 5/2 kernel with one lengthscale per input dimension (ARD)
- Log marginal likelihood and its analytic gradient
- Multistart L-BFGS-B hyperparameter search in log space
- Jitter escalation when the kernel matrix will not factorize
- Prediction of means and standard deviations in original output units
- JSON snapshots for run resumption

Inputs are mapped to the unit cube of the recorded box and outputs are
standardized per objective before fitting; the prior mean is zero in
standardized space.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import minimize


# ============================================================================
# CONFIGURATION
# ============================================================================

KERNEL_NAME = 'matern52'
SQRT5 = np.sqrt(5.0)

DEFAULT_RESTARTS = 8
LENGTHSCALE_BOUNDS = (1e-2, 1e2)        # normalized input units
SIGNAL_VARIANCE_BOUNDS = (1e-3, 1e3)    # standardized output units
JITTER_START = 1e-8
JITTER_MAX = 1e-2
JITTER_GROWTH = 10.0

# Returned to the optimizer when no jitter makes the matrix factorize
FAILED_NLML = 1e25

# Elements per (rows x n x n) block in predict
PREDICT_BLOCK_ELEMENTS = 2 ** 22


class ConditioningError(RuntimeError):
    """Kernel matrix is not positive definite even with the largest jitter."""


class NotFittedError(RuntimeError):
    """Prediction requested from a surrogate that was never fitted."""


# ============================================================================
# DATA TYPES
# ============================================================================

@dataclass
class DesignOfExperiments:
    """
    Evaluated joint points ((x, u), f(x, u)).

    inputs are (n, n_x + n_u) rows [x, u]; outputs are (n, d).
    lower/upper describe the joint box used for input normalization.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    n_x: int
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        self.inputs = np.asarray(self.inputs, dtype=float).reshape(-1, self.lower.size)
        self.outputs = np.asarray(self.outputs, dtype=float)
        if self.outputs.ndim == 1:
            self.outputs = self.outputs.reshape(self.inputs.shape[0], -1)
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError(
                f"DoE has {self.inputs.shape[0]} inputs but {self.outputs.shape[0]} outputs"
            )
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.outputs))):
            raise ValueError("DoE contains non-finite values")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_u(self) -> int:
        return self.lower.size - self.n_x

    @property
    def n_objectives(self) -> int:
        return self.outputs.shape[1]

    def append(self, point: Sequence[float], value: Sequence[float]) -> 'DesignOfExperiments':
        """Return a new design with one more evaluated row."""
        return DesignOfExperiments(
            np.vstack([self.inputs, np.asarray(point, dtype=float)]),
            np.vstack([self.outputs, np.asarray(value, dtype=float)]),
            self.n_x, self.lower, self.upper,
        )


@dataclass
class FitSettings:
    """Hyperparameter search settings."""

    n_restarts: int = DEFAULT_RESTARTS
    seed: Optional[int] = 0
    lengthscale_bounds: Tuple[float, float] = LENGTHSCALE_BOUNDS
    signal_variance_bounds: Tuple[float, float] = SIGNAL_VARIANCE_BOUNDS
    jitter: float = JITTER_START
    max_jitter: float = JITTER_MAX
    # one theta vector per objective, tried before the fresh restarts
    warm_start: Optional[List[Sequence[float]]] = None
    # fixed theta per objective: skip the search entirely
    hyperparameters: Optional[List[Sequence[float]]] = None
    threads: int = 1

    def describe(self) -> Dict[str, Any]:
        return {
            'kernel': KERNEL_NAME,
            'n_restarts': self.n_restarts,
            'lengthscale_bounds': list(self.lengthscale_bounds),
            'signal_variance_bounds': list(self.signal_variance_bounds),
            'jitter': self.jitter,
            'max_jitter': self.max_jitter,
        }


@dataclass
class ObjectiveGp:
    """Posterior of one objective: hyperparameters plus cached factorization."""

    log_lengthscales: np.ndarray
    log_signal_variance: float
    jitter: float
    y_mean: float
    y_std: float
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    # L^-1, so that predictions are row-wise reductions
    chol_inv: Optional[np.ndarray] = field(default=None, repr=False)
    lml: float = float('nan')
    constant: bool = False

    @property
    def theta(self) -> np.ndarray:
        return np.r_[self.log_lengthscales, self.log_signal_variance]

    def snapshot(self) -> Dict[str, Any]:
        return {
            'log_lengthscales': [float(v) for v in self.log_lengthscales],
            'log_signal_variance': float(self.log_signal_variance),
            'jitter': float(self.jitter),
            'y_mean': float(self.y_mean),
            'y_std': float(self.y_std),
            'lml': float(self.lml),
            'constant': bool(self.constant),
        }


# ============================================================================
# KERNEL
# ============================================================================

def matern52(r, lengthscale: float, signal_variance: float):
    """
    Matérn 5/2 covariance at distance r.

    σ²_f (1 + √5 r/ℓ + 5r²/(3ℓ²)) exp(−√5 r/ℓ)

    Example:
        >>> matern52(0.0, 1.0, 2.0)
        2.0
    """
    if lengthscale <= 0 or signal_variance <= 0:
        raise ValueError("lengthscale and signal variance must be positive")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be nonnegative")
    s = SQRT5 * r / lengthscale
    value = signal_variance * (1.0 + s + s * s / 3.0) * np.exp(-s)
    return float(value) if value.ndim == 0 else value


def _squared_differences(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[:, None, :] - b[None, :, :]) ** 2


def _kernel(a: np.ndarray, b: np.ndarray, theta: np.ndarray) -> np.ndarray:
    lengthscales = np.exp(theta[:-1])
    signal_variance = np.exp(theta[-1])
    r2 = np.sum(_squared_differences(a / lengthscales, b / lengthscales), axis=2)
    s = SQRT5 * np.sqrt(np.maximum(r2, 0.0))
    return signal_variance * (1.0 + s + s * s / 3.0) * np.exp(-s)


def _factorize(k: np.ndarray, jitter: float, max_jitter: float) -> Tuple[Tuple[np.ndarray, bool], float]:
    """Cholesky of k + jitter*I, growing jitter tenfold on failure."""
    logger = logging.getLogger('ParetoCover')
    n = k.shape[0]
    current = jitter
    while True:
        try:
            factor = linalg.cho_factor(k + current * np.eye(n), lower=True, check_finite=False)
            if current > jitter:
                logger.debug(f"Kernel matrix factorized after jitter escalation to {current:.1e}")
            return factor, current
        except linalg.LinAlgError:
            if current >= max_jitter:
                raise ConditioningError(
                    f"Kernel matrix ({n}x{n}) not positive definite with jitter up to {max_jitter:.1e}"
                )
            current = min(current * JITTER_GROWTH, max_jitter)


# ============================================================================
# MARGINAL LIKELIHOOD
# ============================================================================

def log_marginal_likelihood(theta: Sequence[float], x: np.ndarray, y: np.ndarray,
                            jitter: float = JITTER_START,
                            max_jitter: float = JITTER_MAX) -> Tuple[float, np.ndarray]:
    """
    Log marginal likelihood of standardized outputs and its gradient.

    Args:
        theta: [log ℓ_1, ..., log ℓ_D, log σ²_f]
        x: (n, D) inputs in normalized units
        y: (n,) standardized outputs
        jitter: Starting nugget added to the diagonal
        max_jitter: Largest nugget tried before giving up

    Returns:
        (lml, gradient with respect to theta)
    """
    theta = np.asarray(theta, dtype=float)
    lengthscales = np.exp(theta[:-1])
    signal_variance = np.exp(theta[-1])
    n = x.shape[0]

    sq = _squared_differences(x, x) / lengthscales ** 2
    s = SQRT5 * np.sqrt(np.maximum(np.sum(sq, axis=2), 0.0))
    decay = np.exp(-s)
    k = signal_variance * (1.0 + s + s * s / 3.0) * decay

    factor, _ = _factorize(k, jitter, max_jitter)
    alpha = linalg.cho_solve(factor, y, check_finite=False)
    lml = (-0.5 * float(y @ alpha)
           - float(np.sum(np.log(np.diag(factor[0]))))
           - 0.5 * n * np.log(2.0 * np.pi))

    k_inv = linalg.cho_solve(factor, np.eye(n), check_finite=False)
    w = np.outer(alpha, alpha) - k_inv

    # dk/dlog ℓ_k = (5/3) σ² (1 + s) e^{-s} (x_k - x'_k)² / ℓ_k²
    common = (5.0 / 3.0) * signal_variance * (1.0 + s) * decay
    grad_lengthscales = 0.5 * np.einsum('ij,ijk->k', w * common, sq)
    grad_signal = 0.5 * float(np.sum(w * k))

    return lml, np.r_[grad_lengthscales, grad_signal]


def _log_bounds(settings: FitSettings, dimension: int) -> np.ndarray:
    lo_l, hi_l = np.log(settings.lengthscale_bounds)
    lo_s, hi_s = np.log(settings.signal_variance_bounds)
    return np.array([(lo_l, hi_l)] * dimension + [(lo_s, hi_s)])


def _optimize_theta(x: np.ndarray, y: np.ndarray, settings: FitSettings,
                    rng: np.random.Generator,
                    warm: Optional[Sequence[float]]) -> Tuple[np.ndarray, float]:
    logger = logging.getLogger('ParetoCover')
    bounds = _log_bounds(settings, x.shape[1])

    def objective(theta):
        try:
            lml, grad = log_marginal_likelihood(theta, x, y, settings.jitter, settings.max_jitter)
        except ConditioningError:
            return FAILED_NLML, np.zeros_like(theta)
        return -lml, -grad

    starts = []
    if warm is not None:
        starts.append(np.clip(np.asarray(warm, dtype=float), bounds[:, 0], bounds[:, 1]))
    for _ in range(settings.n_restarts):
        starts.append(rng.uniform(bounds[:, 0], bounds[:, 1]))

    best_theta, best_value = None, np.inf
    for start in starts:
        result = minimize(objective, start, jac=True, method='L-BFGS-B', bounds=bounds)
        if result.fun < best_value:
            best_theta, best_value = result.x, float(result.fun)

    if best_theta is None or best_value >= FAILED_NLML:
        raise ConditioningError("Hyperparameter search found no factorizable kernel matrix")

    at_bound = np.isclose(best_theta, bounds[:, 0]) | np.isclose(best_theta, bounds[:, 1])
    if at_bound.any():
        logger.warning(f"Hyperparameters at a bound: {np.flatnonzero(at_bound).tolist()}")
    return best_theta, -best_value


# ============================================================================
# SURROGATE
# ============================================================================

class GpSurrogate:
    """
    Independent GP posteriors, one per objective, sharing one training set.

    A fitted surrogate is never mutated; refitting builds a new object.
    """

    def __init__(self, objectives: Optional[List[ObjectiveGp]] = None,
                 train_x: Optional[np.ndarray] = None,
                 lower: Optional[np.ndarray] = None,
                 upper: Optional[np.ndarray] = None,
                 n_x: int = 0,
                 settings: Optional[FitSettings] = None):
        self.objectives = objectives or []
        self.train_x = train_x
        self.lower = None if lower is None else np.asarray(lower, dtype=float)
        self.upper = None if upper is None else np.asarray(upper, dtype=float)
        self.n_x = n_x
        self.settings = settings or FitSettings()

    def __repr__(self):
        n = 0 if self.train_x is None else self.train_x.shape[0]
        return f"<GpSurrogate objectives={len(self.objectives)} n_train={n}>"

    @property
    def is_fitted(self) -> bool:
        return bool(self.objectives) and self.train_x is not None

    @property
    def n_objectives(self) -> int:
        return len(self.objectives)

    def normalize(self, points: np.ndarray) -> np.ndarray:
        span = np.where(self.upper > self.lower, self.upper - self.lower, 1.0)
        return (np.atleast_2d(np.asarray(points, dtype=float)) - self.lower) / span

    def predict(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """
        Posterior means and standard deviations at joint points.

        Args:
            points: (m, n_x + n_u) array of [x, u] rows

        Returns:
            (means, stddevs), both (m, d) in original output units
        """
        if not self.is_fitted:
            raise NotFittedError("GP surrogate has not been fitted")

        xs = self.normalize(points)
        means = np.empty((xs.shape[0], self.n_objectives))
        stds = np.empty_like(means)

        # No BLAS products here: each row must round the same way whatever the batch size
        n = self.train_x.shape[0]
        block = max(1, PREDICT_BLOCK_ELEMENTS // (n * n))
        for j, obj in enumerate(self.objectives):
            k_star = _kernel(xs, self.train_x, obj.theta)
            mean = np.sum(k_star * obj.alpha, axis=1)
            quad = np.empty(xs.shape[0])
            for start in range(0, xs.shape[0], block):
                rows = k_star[start:start + block]
                v = np.sum(rows[:, None, :] * obj.chol_inv[None, :, :], axis=2)
                quad[start:start + block] = np.sum(v * v, axis=1)
            var = np.exp(obj.log_signal_variance) - quad
            means[:, j] = mean * obj.y_std + obj.y_mean
            stds[:, j] = np.sqrt(np.maximum(var, 0.0)) * obj.y_std

        return means, stds

    def hyperparameters(self) -> List[Dict[str, Any]]:
        """Per-objective hyperparameters (log space) for history records and warm starts."""
        return [
            {
                'log_lengthscales': [float(v) for v in obj.log_lengthscales],
                'log_signal_variance': float(obj.log_signal_variance),
                'jitter': float(obj.jitter),
            }
            for obj in self.objectives
        ]

    def to_snapshot(self, training_reference: str = 'doe.csv') -> Dict[str, Any]:
        """JSON-serializable description sufficient to rebuild the posterior from the DoE."""
        if not self.is_fitted:
            raise NotFittedError("Cannot snapshot an unfitted surrogate")
        return {
            'kernel': KERNEL_NAME,
            'n_x': self.n_x,
            'input_lower': self.lower.tolist(),
            'input_upper': self.upper.tolist(),
            'settings': self.settings.describe(),
            'objectives': [obj.snapshot() for obj in self.objectives],
            'training_data': {
                'reference': training_reference,
                'n_train': int(self.train_x.shape[0]),
            },
        }

    @staticmethod
    def from_snapshot(snapshot: Dict[str, Any], doe: DesignOfExperiments) -> 'GpSurrogate':
        """Rebuild a surrogate at the stored hyperparameters."""
        n_train = snapshot['training_data']['n_train']
        if doe.size < n_train:
            raise ValueError(f"Snapshot expects {n_train} training rows, DoE has {doe.size}")

        doe = DesignOfExperiments(doe.inputs[:n_train], doe.outputs[:n_train],
                                  snapshot['n_x'], snapshot['input_lower'], snapshot['input_upper'])
        settings = FitSettings(
            lengthscale_bounds=tuple(snapshot['settings']['lengthscale_bounds']),
            signal_variance_bounds=tuple(snapshot['settings']['signal_variance_bounds']),
            jitter=snapshot['settings']['jitter'],
            max_jitter=snapshot['settings']['max_jitter'],
            hyperparameters=[
                np.r_[o['log_lengthscales'], o['log_signal_variance']] for o in snapshot['objectives']
            ],
        )
        return fit(doe, settings)


# ============================================================================
# FITTING
# ============================================================================

def _fit_objective(x: np.ndarray, y_raw: np.ndarray, settings: FitSettings,
                   seed_seq: np.random.SeedSequence,
                   warm: Optional[Sequence[float]],
                   fixed: Optional[Sequence[float]]) -> ObjectiveGp:
    logger = logging.getLogger('ParetoCover')
    dimension = x.shape[1]
    y_mean = float(np.mean(y_raw))
    y_std = float(np.std(y_raw))
    constant = not y_std > 0
    if constant:
        # flat outputs: keep the prior at the variance floor
        y_std = 1.0
        logger.warning("Constant objective outputs; using the prior variance floor")
    y = (y_raw - y_mean) / y_std

    if fixed is not None:
        theta = np.asarray(fixed, dtype=float)
        lml = float('nan')
    elif constant:
        theta = np.r_[np.zeros(dimension), np.log(settings.signal_variance_bounds[0])]
        lml = float('nan')
    else:
        rng = np.random.default_rng(seed_seq)
        theta, lml = _optimize_theta(x, y, settings, rng, warm)

    k = _kernel(x, x, theta)
    factor, jitter = _factorize(k, settings.jitter, settings.max_jitter)
    alpha = linalg.cho_solve(factor, y, check_finite=False)
    chol = np.tril(factor[0])
    chol_inv = linalg.solve_triangular(chol, np.eye(chol.shape[0]), lower=True, check_finite=False)

    return ObjectiveGp(
        log_lengthscales=theta[:-1].copy(),
        log_signal_variance=float(theta[-1]),
        jitter=jitter,
        y_mean=y_mean,
        y_std=y_std,
        chol=chol,
        alpha=alpha,
        chol_inv=chol_inv,
        lml=lml,
        constant=constant,
    )


def fit(doe: DesignOfExperiments, settings: Optional[FitSettings] = None) -> GpSurrogate:
    """
    Fit one GP per objective by maximum marginal likelihood.

    Args:
        doe: Evaluated design (n >= 2)
        settings: Search settings; deterministic for a given seed

    Returns:
        Fitted GpSurrogate

    Raises:
        ConditioningError: if no jitter up to the maximum makes K factorize

    Example:
        >>> model = fit(doe, FitSettings(seed=0))
        >>> means, stds = model.predict(doe.inputs[:3])
    """
    logger = logging.getLogger('ParetoCover')
    settings = settings or FitSettings()
    if doe.size < 2:
        raise ValueError(f"At least 2 design points are needed to fit, got {doe.size}")

    lower = doe.lower
    upper = doe.upper
    span = np.where(upper > lower, upper - lower, 1.0)
    x = (doe.inputs - lower) / span

    d = doe.n_objectives
    seeds = np.random.SeedSequence(settings.seed).spawn(d)
    warm = settings.warm_start or [None] * d
    fixed = settings.hyperparameters or [None] * d

    def job(j):
        return _fit_objective(x, doe.outputs[:, j], settings, seeds[j], warm[j], fixed[j])

    if settings.threads > 1 and d > 1:
        with ThreadPoolExecutor(max_workers=min(settings.threads, d)) as pool:
            objectives = list(pool.map(job, range(d)))
    else:
        objectives = [job(j) for j in range(d)]

    logger.debug(
        "GP fitted on %d points: %s", doe.size,
        ", ".join(f"f{j + 1} lml={o.lml:.3f} jitter={o.jitter:.1e}" for j, o in enumerate(objectives))
    )
    return GpSurrogate(objectives, x, lower, upper, doe.n_x, settings)


def predict(model: GpSurrogate, points) -> Tuple[np.ndarray, np.ndarray]:
    """Module-level alias of GpSurrogate.predict."""
    if model is None:
        raise NotFittedError("No surrogate available")
    return model.predict(points)
