#!/usr/bin/env python3
"""
Benchmark Problems for ParetoCover
Analytic test problems with uncertain inputs, and external evaluators.

This module provides:
- f2x2 / f2x2_mean: two-dimensional control and environment, two objectives
- f5x5: five-dimensional control and environment, two objectives
- ProblemDefinition with strict box checks
- The problem catalog ('4d', '10d', '10d-bis') and name lookup
- ExternalEvaluator: JSON-lines subprocess protocol for user problems

Evaluators are vectorized: f(X, U) takes row-aligned (n, n_x) and (n, n_u)
arrays and returns (n, d).
"""

import json
import logging
import subprocess
import threading
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import truncnorm

import pareto_core as pc
from pareto_core import EvaluatorError
from uncertainty import UDistribution


# ============================================================================
# CONFIGURATION
# ============================================================================

F2X2_X_BOX = ([0.0, 1.0], [1.0, 2.0])
F2X2_U_BOX = ([2.0, 3.0], [3.0, 4.0])
F5X5_DIM = 5
F5X5_GAUSSIAN_VARIANCE = 0.1


class OutOfBoxError(EvaluatorError):
    """An evaluation was requested outside the problem's boxes."""


class UnknownProblemError(KeyError):
    """No catalog problem has the requested name."""

    def __str__(self):
        return str(self.args[0]) if self.args else ''


# ============================================================================
# BOX CHECKS
# ============================================================================

def _rows(values, width: int, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(values, dtype=float))
    if arr.shape[1] != width:
        raise pc.DimensionMismatchError(f"{name} must have {width} columns, got {arr.shape[1]}")
    return arr


def _check_box(values: np.ndarray, lower, upper, name: str):
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    slack = pc.BOUNDS_TOLERANCE * np.maximum(1.0, upper - lower)
    outside = np.any((values < lower - slack) | (values > upper + slack), axis=1)
    if outside.any():
        i = int(np.flatnonzero(outside)[0])
        raise OutOfBoxError(
            f"{name}={values[i].tolist()} outside box {lower.tolist()}..{upper.tolist()}"
        )


def _single(result: np.ndarray, original) -> np.ndarray:
    return result[0] if np.ndim(original) == 1 else result


# ============================================================================
# ANALYTIC PROBLEMS
# ============================================================================

def f2x2(x, u, strict: bool = True) -> np.ndarray:
    """
    Two-objective problem on x in [0,1]x[1,2], u in [2,3]x[3,4].

    f1 = (x1 - u1 + 2)^2 + (x2 - u2 + 2)^2 + 5 u1
    f2 = (x1 - x2 + 1)^2 + (x1 x2 - u1 + 1.5)^2 + 5 u2

    Example:
        >>> f2x2([0, 1], [2, 3])
        array([10.  , 15.25])
    """
    xs = _rows(x, 2, 'x')
    us = _rows(u, 2, 'u')
    if strict:
        _check_box(xs, [b[0] for b in F2X2_X_BOX], [b[1] for b in F2X2_X_BOX], 'x')
        _check_box(us, [b[0] for b in F2X2_U_BOX], [b[1] for b in F2X2_U_BOX], 'u')
    x1, x2 = xs[:, 0], xs[:, 1]
    u1, u2 = us[:, 0], us[:, 1]
    f1 = (x1 - u1 + 2) ** 2 + (x2 - u2 + 2) ** 2 + 5 * u1
    f2 = (x1 - x2 + 1) ** 2 + (x1 * x2 - u1 + 1.5) ** 2 + 5 * u2
    return _single(np.column_stack([f1, f2]), x)


def f2x2_mean(x) -> np.ndarray:
    """Closed-form E_U[f2x2(x, U)] for U uniform on [2,3]x[3,4]."""
    xs = _rows(x, 2, 'x')
    x1, x2 = xs[:, 0], xs[:, 1]
    m1 = x1 * (x1 - 1) + x2 * (x2 - 3) + 91.0 / 6.0
    m2 = (x1 ** 2 * x2 ** 2 + x1 ** 2 - 4 * x1 * x2 + 2 * x1
          + x2 ** 2 - 2 * x2 + 235.0 / 12.0)
    return _single(np.column_stack([m1, m2]), x)


def f5x5(x, u, strict: bool = True) -> np.ndarray:
    """
    Two-objective problem on x, u in [0,1]^5.

    f1 = (sum(x) + u1 + u2 + u3 - u4 + u5 - 5)^2
    f2 = (sum(x) + u1 + u2 + u3 + u4 - u5 - 5)^2
    """
    xs = _rows(x, F5X5_DIM, 'x')
    us = _rows(u, F5X5_DIM, 'u')
    if strict:
        _check_box(xs, np.zeros(F5X5_DIM), np.ones(F5X5_DIM), 'x')
        _check_box(us, np.zeros(F5X5_DIM), np.ones(F5X5_DIM), 'u')
    s = xs.sum(axis=1)
    common = s + us[:, 0] + us[:, 1] + us[:, 2] - 5
    f1 = (common - us[:, 3] + us[:, 4]) ** 2
    f2 = (common + us[:, 3] - us[:, 4]) ** 2
    return _single(np.column_stack([f1, f2]), x)


def _f5x5_mean_for(component_mean: float, component_variance: float) -> Callable:
    # u1+u2+u3±u4∓u5 has mean 3m - m + m and variance 5v for i.i.d. components
    shift = 3 * component_mean
    variance = 5 * component_variance

    def mean(x) -> np.ndarray:
        xs = _rows(x, F5X5_DIM, 'x')
        value = (xs.sum(axis=1) + shift - 5) ** 2 + variance
        return _single(np.column_stack([value, value]), x)

    return mean


# ============================================================================
# PROBLEM DEFINITIONS
# ============================================================================

@dataclass
class ProblemDefinition:
    """A named problem: boxes, U distribution, evaluator and optional mean."""

    name: str
    description: str
    x_lower: np.ndarray
    x_upper: np.ndarray
    u_dist: UDistribution
    n_objectives: int
    function: Callable[..., np.ndarray]
    mean_function: Optional[Callable[[np.ndarray], np.ndarray]] = None
    strict: bool = True

    def __post_init__(self):
        self.x_lower = np.asarray(self.x_lower, dtype=float)
        self.x_upper = np.asarray(self.x_upper, dtype=float)

    @property
    def n_x(self) -> int:
        return self.x_lower.size

    @property
    def n_u(self) -> int:
        return self.u_dist.dimension

    @property
    def joint_lower(self) -> np.ndarray:
        return np.r_[self.x_lower, self.u_dist.lower]

    @property
    def joint_upper(self) -> np.ndarray:
        return np.r_[self.x_upper, self.u_dist.upper]

    def evaluate(self, x, u) -> np.ndarray:
        """Vectorized f(X, U) -> (n, d) with box checks when strict."""
        xs = _rows(x, self.n_x, 'x')
        us = _rows(u, self.n_u, 'u')
        if self.strict:
            _check_box(xs, self.x_lower, self.x_upper, 'x')
            _check_box(us, self.u_dist.lower, self.u_dist.upper, 'u')
        values = np.atleast_2d(np.asarray(self.function(xs, us), dtype=float))
        if values.shape != (xs.shape[0], self.n_objectives):
            raise EvaluatorError(
                f"Problem '{self.name}' returned shape {values.shape}, "
                f"expected {(xs.shape[0], self.n_objectives)}"
            )
        return values

    def evaluate_joint(self, points) -> np.ndarray:
        points = _rows(points, self.n_x + self.n_u, 'joint point')
        return self.evaluate(points[:, :self.n_x], points[:, self.n_x:])

    def close(self):
        """Release evaluator resources (external subprocesses)."""
        close = getattr(self.function, 'close', None)
        if close is not None:
            close()

    def __enter__(self) -> 'ProblemDefinition':
        return self

    def __exit__(self, *exc_info):
        self.close()

    def summary(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'description': self.description,
            'n_x': self.n_x,
            'n_u': self.n_u,
            'n_objectives': self.n_objectives,
            'x_lower': self.x_lower.tolist(),
            'x_upper': self.x_upper.tolist(),
            'u_distribution': self.u_dist.to_dict(),
            'closed_form_mean': self.mean_function is not None,
        }


def _truncated_variance(variance: float) -> float:
    std = np.sqrt(variance)
    a, b = (0.0 - 0.5) / std, (1.0 - 0.5) / std
    return float(truncnorm.var(a, b, loc=0.5, scale=std))


def problem_catalog() -> List[ProblemDefinition]:
    """All built-in problems."""
    unit_lower, unit_upper = np.zeros(F5X5_DIM), np.ones(F5X5_DIM)
    gaussian = UDistribution.gaussian(np.full(F5X5_DIM, 0.5), np.full(F5X5_DIM, F5X5_GAUSSIAN_VARIANCE),
                                      unit_lower, unit_upper)
    return [
        ProblemDefinition(
            name='4d',
            description='f2x2: 2-D control, 2-D uniform environment, 2 objectives',
            x_lower=[b[0] for b in F2X2_X_BOX],
            x_upper=[b[1] for b in F2X2_X_BOX],
            u_dist=UDistribution.uniform([b[0] for b in F2X2_U_BOX], [b[1] for b in F2X2_U_BOX]),
            n_objectives=2,
            function=f2x2,
            mean_function=f2x2_mean,
        ),
        ProblemDefinition(
            name='10d',
            description='f5x5: 5-D control, 5-D uniform environment on [0,1]^5, 2 objectives',
            x_lower=unit_lower,
            x_upper=unit_upper,
            u_dist=UDistribution.uniform(unit_lower, unit_upper),
            n_objectives=2,
            function=f5x5,
            mean_function=_f5x5_mean_for(0.5, 1.0 / 12.0),
        ),
        ProblemDefinition(
            name='10d-bis',
            description='f5x5: 5-D control, truncated Gaussian environment (center 0.5, variance 0.1), 2 objectives',
            x_lower=unit_lower,
            x_upper=unit_upper,
            u_dist=gaussian,
            n_objectives=2,
            function=f5x5,
            mean_function=_f5x5_mean_for(0.5, _truncated_variance(F5X5_GAUSSIAN_VARIANCE)),
        ),
    ]


def get_problem(name: str) -> ProblemDefinition:
    """
    Look up a catalog problem by name.

    Raises:
        UnknownProblemError: listing the available names
    """
    catalog = {p.name: p for p in problem_catalog()}
    if name not in catalog:
        raise UnknownProblemError(
            f"Unknown problem '{name}'. Available: {', '.join(sorted(catalog))}"
        )
    return catalog[name]


# ============================================================================
# EXTERNAL EVALUATORS
# ============================================================================

class ExternalEvaluator:
    """
    Evaluate objectives through a long-lived subprocess.

    Protocol: one JSON line {"x": [...], "u": [...]} written to the process's
    stdin per evaluation, one JSON line {"f": [...]} read back from stdout.
    """

    def __init__(self, command: Sequence[str], n_objectives: int):
        self.command = list(command)
        self.n_objectives = n_objectives
        self._process = None
        self._lock = threading.Lock()

    def __repr__(self):
        return f"<ExternalEvaluator command={self.command!r}>"

    def _start(self):
        logger = logging.getLogger('ParetoCover')
        try:
            self._process = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding='utf-8', bufsize=1,
            )
            logger.info(f"Started external evaluator: {' '.join(self.command)}")
        except Exception as e:
            logger.error(f"Cannot start external evaluator {self.command}: {e}")
            raise EvaluatorError(f"Cannot start external evaluator: {e}") from e

    def _evaluate_one(self, x: np.ndarray, u: np.ndarray) -> List[float]:
        if self._process is None or self._process.poll() is not None:
            self._start()
        request = json.dumps({'x': [float(v) for v in x], 'u': [float(v) for v in u]})
        try:
            self._process.stdin.write(request + '\n')
            self._process.stdin.flush()
            line = self._process.stdout.readline()
        except Exception as e:
            raise EvaluatorError(f"External evaluator I/O failed: {e}") from e
        if not line:
            raise EvaluatorError(f"External evaluator exited without answering {request}")
        try:
            values = json.loads(line)['f']
        except (ValueError, KeyError, TypeError) as e:
            raise EvaluatorError(f"Malformed evaluator reply {line.strip()!r}: {e}") from e
        if len(values) != self.n_objectives:
            raise EvaluatorError(
                f"Evaluator returned {len(values)} objectives, expected {self.n_objectives}"
            )
        return [float(v) for v in values]

    def __call__(self, x, u) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        us = np.atleast_2d(np.asarray(u, dtype=float))
        with self._lock:
            return np.array([self._evaluate_one(xi, ui) for xi, ui in zip(xs, us)], dtype=float)

    def close(self):
        """Close stdin, wait for the child to exit (kill it after 5 s)."""
        if self._process is None:
            return
        process, self._process = self._process, None
        try:
            process.stdin.close()
            process.wait(timeout=5)
        except Exception:
            process.kill()
            process.wait()
        finally:
            process.stdout.close()
        logging.getLogger('ParetoCover').debug(f"External evaluator exited ({process.returncode})")


def external_problem(spec: Dict[str, Any]) -> ProblemDefinition:
    """
    Build a ProblemDefinition from an {"external": {...}} configuration.

    Keys: command (list), x_lower, x_upper, n_objectives, and either
    u_lower/u_upper (uniform U) or u_distribution (UDistribution dict).
    """
    if 'u_distribution' in spec:
        u_dist = UDistribution.from_dict(spec['u_distribution'])
    else:
        u_dist = UDistribution.uniform(spec['u_lower'], spec['u_upper'])
    evaluator = ExternalEvaluator(spec['command'], int(spec['n_objectives']))
    return ProblemDefinition(
        name=spec.get('name', 'external'),
        description=f"external: {' '.join(spec['command'])}",
        x_lower=spec['x_lower'],
        x_upper=spec['x_upper'],
        u_dist=u_dist,
        n_objectives=int(spec['n_objectives']),
        function=evaluator,
    )


def resolve_problem(value) -> ProblemDefinition:
    """Catalog name or {"external": {...}} mapping to a ProblemDefinition."""
    if isinstance(value, str):
        return get_problem(value)
    if isinstance(value, dict) and 'external' in value:
        return external_problem(value['external'])
    raise UnknownProblemError(f"Cannot interpret problem specification: {value!r}")
