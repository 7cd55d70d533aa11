#!/usr/bin/env python3
"""
Bayesian Optimization Engine for ParetoCover
Sequential design loop: fit, select, evaluate, append, record.

This module provides:
- initial_design: scrambled Sobol design in the joint box
- maximize / maximize_acquisition: random probes + bounded Nelder-Mead
- select_next: next (x, u) for each acquisition kind
- run: resumable BO loop writing a run directory
- load_run: problem, design and surrogate of a finished run

Every random stream of iteration t is derived from (seed, t), so a run
resumed from its directory reproduces the uninterrupted run exactly.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

import acquisition as acq
import pareto_core as pc
import run_store as store
from gaussian_process import DesignOfExperiments, FitSettings, GpSurrogate, fit
from problems import ProblemDefinition, resolve_problem
from run_config import ConfigError, RunConfig, derive_seed, same_experiment, save_run_config
from uncertainty import UDistribution, USampleSet, sample_u


# ============================================================================
# CONFIGURATION
# ============================================================================

DEFAULT_N_INIT = 512
DEFAULT_TOP_K = 5
DEFAULT_MAX_ITER = 100


@dataclass
class OptimizerSettings:
    """Acquisition maximizer settings."""

    n_init: int = DEFAULT_N_INIT
    top_k: int = DEFAULT_TOP_K
    max_iter: int = DEFAULT_MAX_ITER


@dataclass
class HistoryRecord:
    """One BO iteration. Wall time lives in timings.jsonl."""

    iteration: int
    kind: str
    x: List[float]
    u: List[float]
    acquisition: float
    fallback: bool = False
    hyperparameters: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iteration': self.iteration,
            'kind': self.kind,
            'x': [float(v) for v in self.x],
            'u': [float(v) for v in self.u],
            'acquisition': float(self.acquisition),
            'fallback': bool(self.fallback),
            'hyperparameters': self.hyperparameters,
        }

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> 'HistoryRecord':
        return HistoryRecord(**data)


class PartialDesignError(pc.EvaluatorError):
    """Initial design aborted by an evaluator failure; carries the evaluated prefix."""

    def __init__(self, message: str, partial: DesignOfExperiments):
        super().__init__(message)
        self.partial = partial


# ============================================================================
# INITIAL DESIGN
# ============================================================================

def initial_design(problem: ProblemDefinition, size: Optional[int] = None, seed: int = 0,
                   existing: Optional[DesignOfExperiments] = None) -> DesignOfExperiments:
    """
    Evaluate a scrambled Sobol design in the joint box X x U.

    Args:
        problem: Problem to evaluate
        size: Number of points (default 10 * (n_x + n_u))
        seed: Scrambling seed
        existing: Already evaluated prefix of the same design (resumption)

    Returns:
        DesignOfExperiments with `size` rows

    Raises:
        PartialDesignError: evaluator failure, with the rows evaluated so far
    """
    logger = logging.getLogger('ParetoCover')
    size = 10 * (problem.n_x + problem.n_u) if size is None else size
    if size < 2:
        raise ValueError(f"Initial design needs at least 2 points, got {size}")

    points = pc.sobol_set(problem.joint_lower, problem.joint_upper, size, seed=seed).points
    start = 0 if existing is None else existing.size
    inputs = [] if existing is None else list(existing.inputs)
    outputs = [] if existing is None else list(existing.outputs)

    for i in range(start, size):
        try:
            outputs.append(problem.evaluate_joint(points[i])[0])
        except pc.EvaluatorError as e:
            partial = DesignOfExperiments(np.array(inputs).reshape(-1, points.shape[1]),
                                          np.array(outputs).reshape(len(inputs), problem.n_objectives),
                                          problem.n_x, problem.joint_lower, problem.joint_upper)
            raise PartialDesignError(f"Initial design stopped at point {i}: {e}", partial) from e
        inputs.append(points[i])

    logger.info(f"Initial design: {size} points in dimension {points.shape[1]}")
    return DesignOfExperiments(np.array(inputs), np.array(outputs), problem.n_x,
                               problem.joint_lower, problem.joint_upper)


# ============================================================================
# ACQUISITION MAXIMIZATION
# ============================================================================

def maximize(function: Callable[[np.ndarray], np.ndarray], lower, upper,
             settings: OptimizerSettings, rng: np.random.Generator) -> Tuple[np.ndarray, float, np.ndarray, np.ndarray]:
    """
    Maximize a batch function over a box.

    N_init uniform probes, then bounded Nelder-Mead from the top_k probes.

    Returns:
        (best point, best value, probes, probe values)
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    probes = lower + rng.random((settings.n_init, lower.size)) * (upper - lower)
    values = np.asarray(function(probes), dtype=float)

    best = int(np.argmax(values))
    best_point, best_value = probes[best].copy(), float(values[best])

    def negative(z):
        return -float(function(np.clip(z, lower, upper).reshape(1, -1))[0])

    order = np.argsort(-values, kind='stable')[:settings.top_k]
    for start in order:
        if settings.max_iter == 0:
            break
        result = minimize(negative, probes[start], method='Nelder-Mead',
                          bounds=list(zip(lower, upper)),
                          options={'maxiter': settings.max_iter, 'xatol': 1e-6, 'fatol': 1e-12})
        candidate = np.clip(result.x, lower, upper)
        value = -negative(candidate)
        if value > best_value:
            best_point, best_value = candidate, value

    return best_point, best_value, probes, values


def _summed_std(model: GpSurrogate, points: np.ndarray, spec: acq.AcquisitionSpec) -> np.ndarray:
    if spec.kind != acq.IEHVI:
        return model.predict(points)[1].sum(axis=1)
    total = np.zeros(points.shape[0])
    for u in spec.u_samples.samples:
        joint = np.hstack([points, np.tile(u, (points.shape[0], 1))])
        total += model.predict(joint)[1].sum(axis=1)
    return total / len(spec.u_samples)


def maximize_acquisition(model: GpSurrogate, spec: acq.AcquisitionSpec, rng: np.random.Generator,
                         settings: Optional[OptimizerSettings] = None,
                         dist: Optional[UDistribution] = None,
                         cache: Optional[acq.FrontCache] = None) -> Tuple[np.ndarray, float, bool]:
    """
    Best probed point of the acquisition.

    PEHVI and WPEHVI search the joint box; IEHVI searches the X box. When
    every probe scores 0 the probe with the largest summed predictive
    standard deviation is returned instead.

    Returns:
        (point, acquisition value, fallback flag)
    """
    logger = logging.getLogger('ParetoCover')
    settings = settings or OptimizerSettings()
    if cache is None:
        cache = acq.FrontCache(model, spec)

    lower, upper = model.lower, model.upper
    if spec.kind == acq.IEHVI:
        lower, upper = lower[:model.n_x], upper[:model.n_x]

    def objective(points):
        return acq.acquisition_batch(model, points, spec, dist, cache)

    point, value, probes, values = maximize(objective, lower, upper, settings, rng)
    if value > 0:
        return point, value, False

    fallback = probes[int(np.argmax(_summed_std(model, probes, spec)))]
    logger.warning("All acquisition probes are zero; taking the most uncertain probe")
    return fallback, 0.0, True


def select_next(model: Optional[GpSurrogate], spec: acq.AcquisitionSpec, u_dist: UDistribution,
                rng: np.random.Generator, settings: Optional[OptimizerSettings] = None,
                x_box: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                cache: Optional[acq.FrontCache] = None) -> Tuple[np.ndarray, np.ndarray, float, bool]:
    """
    Next point to evaluate.

    pehvi/wpehvi: joint argmax. iehvi: argmax over X, u drawn from u_dist.
    random: uniform in the joint box (model ignored; needs x_box).

    Returns:
        (x, u, acquisition value, fallback flag)
    """
    if spec.kind == acq.RANDOM:
        if x_box is None:
            raise ValueError("Random selection needs the X box")
        x_lower, x_upper = (np.asarray(b, dtype=float) for b in x_box)
        x = x_lower + rng.random(x_lower.size) * (x_upper - x_lower)
        u = u_dist.lower + rng.random(u_dist.dimension) * (u_dist.upper - u_dist.lower)
        return x, u, 0.0, False

    point, value, fallback = maximize_acquisition(model, spec, rng, settings, u_dist, cache)
    if spec.kind == acq.IEHVI:
        return point, u_dist.sample(1, rng)[0], value, fallback
    return point[:model.n_x], point[model.n_x:], value, fallback


# ============================================================================
# RUN LOOP
# ============================================================================

def fit_settings(config: RunConfig, seed, warm: Optional[List[np.ndarray]], threads: int) -> FitSettings:
    gp = config.get('gp')
    return FitSettings(
        n_restarts=gp['n_restarts'] if warm is None else gp['warm_restarts'],
        seed=seed,
        lengthscale_bounds=tuple(gp['lengthscale_bounds']),
        signal_variance_bounds=tuple(gp['signal_variance_bounds']),
        jitter=gp['jitter'],
        max_jitter=gp['max_jitter'],
        warm_start=warm,
        threads=threads,
    )


def _warm_start(record: HistoryRecord) -> Optional[List[np.ndarray]]:
    # random-kind records carry no hyperparameters
    warm = [np.r_[h['log_lengthscales'], h['log_signal_variance']] for h in record.hyperparameters]
    return warm or None


def build_spec(config: RunConfig, problem: ProblemDefinition, iteration: int,
               fixed_pareto: Optional[pc.CandidateSet], fixed_u: Optional[USampleSet],
               threads: int) -> acq.AcquisitionSpec:
    """Acquisition spec for one iteration (fresh X_pareto / U samples when resampling)."""
    kind = config.get('acquisition.kind')
    seeds = config.get('seeds')
    if kind == acq.RANDOM:
        return acq.AcquisitionSpec(kind=kind)

    pareto = fixed_pareto or pc.sobol_set(problem.x_lower, problem.x_upper,
                                          config.get('acquisition.n_pareto'),
                                          seed=derive_seed(seeds['pareto'], iteration))
    u_samples = None
    if kind == acq.IEHVI:
        u_samples = fixed_u or sample_u(problem.u_dist, config.get('acquisition.n_u'),
                                        seed=derive_seed(seeds['u_samples'], iteration), crn=False)
    reference = config.get('acquisition.reference')
    return acq.AcquisitionSpec(
        kind=kind,
        beta=float(config.get('acquisition.beta')),
        pareto_candidates=pareto,
        u_samples=u_samples,
        ref_policy=acq.ReferencePolicy(reference['margin'], reference['floor'], reference['fixed']),
        n_samples=config.get('acquisition.n_samples'),
        seed=seeds['optimizer'],
        threads=threads,
    )


def _prepare_run_dir(config: RunConfig, problem: ProblemDefinition, run_dir: Path):
    if store.run_exists(run_dir):
        previous = RunConfig(store.read_config_snapshot(run_dir))
        if not same_experiment(previous, config):
            raise ConfigError('output_dir', f"{run_dir} holds a run with a different configuration")
    save_run_config(config, run_dir)
    store.write_problem_metadata(run_dir, problem.summary())


def run(config: RunConfig, run_dir=None, threads: Optional[int] = None) -> Path:
    """
    Execute (or resume) a BO run and return its directory.

    Loop per iteration: fit GP on the DoE, select (x, u), evaluate, append
    to doe.csv, write a history record. The final model is saved to
    model.json.

    Args:
        config: Validated run configuration
        run_dir: Output directory (default config output_dir)
        threads: Worker threads (default config threads); results do not depend on it

    Returns:
        Path to the run directory

    Raises:
        EvaluatorError: state is saved first and the run can be resumed
        ConfigError: bad config, or run_dir holds a different experiment
    """
    run_dir = Path(run_dir or config.get('output_dir'))
    threads = threads or config.get('threads')
    with resolve_problem(config.get('problem')) as problem:
        return _run_loop(config, problem, run_dir, threads)


def _run_loop(config: RunConfig, problem: ProblemDefinition, run_dir: Path, threads: int) -> Path:
    logger = logging.getLogger('ParetoCover')
    seeds = config.get('seeds')
    budget = config.get('budget')
    kind = config.get('acquisition.kind')
    n0 = config.initial_size(problem.n_x, problem.n_u)
    if n0 < 2:
        raise ConfigError('initial_design.size', "must be >= 2")

    _prepare_run_dir(config, problem, run_dir)

    logger.info("=" * 70)
    logger.info(f"BO RUN: problem={problem.name} kind={kind} n0={n0} budget={budget}")
    logger.info("=" * 70)

    # Restore or build the initial design
    history = [HistoryRecord.from_dict(r) for r in store.read_history(run_dir)]
    existing = None
    if (run_dir / store.DOE_FILE).exists():
        existing = store.read_doe(run_dir, problem.joint_lower, problem.joint_upper)
    if existing is None or existing.size < n0:
        try:
            doe = initial_design(problem, n0, seeds['design'], existing)
        except PartialDesignError as e:
            if e.partial.size:
                store.write_doe(run_dir, e.partial)
            logger.error(f"Initial design aborted; {e.partial.size} points saved: {e}")
            raise
        store.write_doe(run_dir, doe)
        history = []
        store.truncate_history(run_dir, 0)
    else:
        # drop rows evaluated after the last recorded iteration
        keep = n0 + min(len(history), budget)
        history = history[:keep - n0]
        doe = DesignOfExperiments(existing.inputs[:keep], existing.outputs[:keep],
                                  problem.n_x, problem.joint_lower, problem.joint_upper)
        store.truncate_history(run_dir, len(history))
        if history:
            logger.info(f"Resuming after iteration {len(history) - 1} ({doe.size} points)")

    fixed_pareto = None
    if kind != acq.RANDOM and not config.get('acquisition.pareto_resample'):
        fixed_pareto = pc.sobol_set(problem.x_lower, problem.x_upper,
                                    config.get('acquisition.n_pareto'), seed=seeds['pareto'])
    fixed_u = None
    if kind == acq.IEHVI and config.get('acquisition.crn'):
        fixed_u = sample_u(problem.u_dist, config.get('acquisition.n_u'), seed=seeds['u_samples'])

    optimizer = OptimizerSettings(**config.get('optimizer'))
    warm = _warm_start(history[-1]) if history else None

    for iteration in range(len(history), budget):
        started = time.perf_counter()
        model = None
        hyperparameters = []
        if kind != acq.RANDOM:
            model = fit(doe, fit_settings(config, derive_seed(seeds['fit'], iteration), warm, threads))
            hyperparameters = model.hyperparameters()

        spec = build_spec(config, problem, iteration, fixed_pareto, fixed_u, threads)
        rng = np.random.default_rng(derive_seed(seeds['optimizer'], iteration))
        x, u, value, fallback = select_next(model, spec, problem.u_dist, rng, optimizer,
                                            x_box=(problem.x_lower, problem.x_upper))

        point = np.clip(np.r_[x, u], problem.joint_lower, problem.joint_upper)
        x, u = point[:problem.n_x], point[problem.n_x:]
        try:
            y = problem.evaluate(x, u)[0]
        except pc.EvaluatorError as e:
            logger.error(f"Evaluator failed at iteration {iteration}; run saved for resumption: {e}")
            raise

        doe = doe.append(point, y)
        store.write_doe(run_dir, doe)
        record = HistoryRecord(iteration, kind, x.tolist(), u.tolist(), value, fallback, hyperparameters)
        store.append_history(run_dir, record.to_dict())
        elapsed = time.perf_counter() - started
        store.append_timing(run_dir, {'iteration': iteration, 'wall_time_s': elapsed})

        if model is not None:
            warm = [obj.theta for obj in model.objectives]
        logger.info(f"  [{iteration + 1}/{budget}] x={np.round(x, 4).tolist()} u={np.round(u, 4).tolist()} "
                    f"acq={value:.4g}{' (fallback)' if fallback else ''} ({elapsed:.1f}s)")

    final = fit(doe, fit_settings(config, derive_seed(seeds['fit'], 'final'), warm, threads))
    store.write_model(run_dir, final.to_snapshot(store.DOE_FILE))

    logger.info("=" * 70)
    logger.info(f"RUN COMPLETE: {doe.size} points -> {run_dir}")
    logger.info("=" * 70)
    return run_dir


def load_run(run_dir) -> Tuple[RunConfig, ProblemDefinition, DesignOfExperiments, GpSurrogate]:
    """
    Config, problem, design and final surrogate of a run directory.
    Close the problem when done (it is a context manager).

    Raises:
        MissingArtifactError: when config.json, doe.csv or model.json is missing
    """
    config = RunConfig(store.read_config_snapshot(run_dir))
    problem = resolve_problem(config.get('problem'))
    doe = store.read_doe(run_dir, problem.joint_lower, problem.joint_upper)
    model = GpSurrogate.from_snapshot(store.read_model(run_dir), doe)
    return config, problem, doe, model
