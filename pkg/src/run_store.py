#!/usr/bin/env python3
"""
Run Store for ParetoCover
Reads and writes the artifacts of a run directory.

This module provides:
- doe.csv: evaluated design, full double precision
- history.jsonl: one record per BO iteration
- timings.jsonl: wall-clock time per iteration
- model.json: final surrogate snapshot
- problem.json: boxes and U distribution (truncation, acceptance mass)
- Run statistics for resumption and reporting

Layout of a run directory:
    config.json     effective configuration (see run_config)
    doe.csv         header x1..x_nx,u1..u_nu,f1..f_d
    history.jsonl
    timings.jsonl
    model.json
    problem.json
"""

import csv
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from gaussian_process import DesignOfExperiments
from run_config import CONFIG_FILE


# ============================================================================
# CONFIGURATION
# ============================================================================

DOE_FILE = 'doe.csv'
HISTORY_FILE = 'history.jsonl'
TIMINGS_FILE = 'timings.jsonl'
MODEL_FILE = 'model.json'
PROBLEM_FILE = 'problem.json'


class MissingArtifactError(FileNotFoundError):
    """A required run-directory artifact does not exist."""


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"Missing run artifact: {path}")
    return path


def _replace_atomically(path: Path, write):
    tmp = path.with_name(path.name + '.tmp')
    with open(tmp, 'w', newline='', encoding='utf-8') as f:
        write(f)
    os.replace(tmp, path)


# ============================================================================
# DESIGN OF EXPERIMENTS
# ============================================================================

def doe_header(n_x: int, n_u: int, d: int) -> List[str]:
    return ([f'x{i + 1}' for i in range(n_x)] + [f'u{i + 1}' for i in range(n_u)]
            + [f'f{i + 1}' for i in range(d)])


def write_doe(run_dir, doe: DesignOfExperiments) -> Path:
    """
    Rewrite doe.csv with every evaluated row.

    Floats are written with repr() so reading back is bit-exact.
    """
    logger = logging.getLogger('ParetoCover')
    path = Path(run_dir) / DOE_FILE

    def write(f):
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(doe_header(doe.n_x, doe.n_u, doe.n_objectives))
        for x, y in zip(doe.inputs, doe.outputs):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])

    try:
        Path(run_dir).mkdir(parents=True, exist_ok=True)
        _replace_atomically(path, write)
        logger.debug(f"DoE saved: {path} ({doe.size} rows)")
        return path
    except Exception as e:
        logger.error(f"Failed to write DoE {path}: {e}")
        raise


def read_doe(run_dir, lower, upper) -> DesignOfExperiments:
    """
    Load doe.csv.

    Args:
        run_dir: Run directory
        lower: Joint-box lower bounds (x then u)
        upper: Joint-box upper bounds

    Raises:
        MissingArtifactError: if doe.csv is absent
    """
    logger = logging.getLogger('ParetoCover')
    path = _require(Path(run_dir) / DOE_FILE)
    try:
        with open(path, 'r', newline='', encoding='utf-8') as f:
            reader = csv.reader(f)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
    except Exception as e:
        logger.error(f"Failed to read DoE {path}: {e}")
        raise

    n_x = sum(1 for name in header if name.startswith('x'))
    n_u = sum(1 for name in header if name.startswith('u'))
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return DesignOfExperiments(data[:, :n_x + n_u], data[:, n_x + n_u:], n_x, lower, upper)


# ============================================================================
# JSON LINES
# ============================================================================

def _append_line(path: Path, record: Dict[str, Any]):
    logger = logging.getLogger('ParetoCover')
    try:
        with open(path, 'a', encoding='utf-8', newline='\n') as f:
            f.write(json.dumps(record, ensure_ascii=False) + '\n')
    except Exception as e:
        logger.error(f"Failed to append to {path}: {e}")
        raise


def _read_lines(path: Path) -> List[Dict[str, Any]]:
    if not path.exists():
        return []
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]


def append_history(run_dir, record: Dict[str, Any]):
    _append_line(Path(run_dir) / HISTORY_FILE, record)


def read_history(run_dir) -> List[Dict[str, Any]]:
    return _read_lines(Path(run_dir) / HISTORY_FILE)


def truncate_history(run_dir, n_records: int):
    """Keep the first n_records history lines (used when resuming)."""
    path = Path(run_dir) / HISTORY_FILE
    records = read_history(run_dir)[:n_records]
    _replace_atomically(path, lambda f: f.writelines(
        json.dumps(r, ensure_ascii=False) + '\n' for r in records))


def append_timing(run_dir, record: Dict[str, Any]):
    _append_line(Path(run_dir) / TIMINGS_FILE, record)


def read_timings(run_dir) -> List[Dict[str, Any]]:
    return _read_lines(Path(run_dir) / TIMINGS_FILE)


# ============================================================================
# MODEL AND CONFIG SNAPSHOTS
# ============================================================================

def write_model(run_dir, snapshot: Dict[str, Any]) -> Path:
    logger = logging.getLogger('ParetoCover')
    path = Path(run_dir) / MODEL_FILE
    try:
        _replace_atomically(path, lambda f: json.dump(snapshot, f, indent=2, ensure_ascii=False))
        logger.debug(f"Model snapshot saved: {path}")
        return path
    except Exception as e:
        logger.error(f"Failed to write model snapshot: {e}")
        raise


def read_model(run_dir) -> Dict[str, Any]:
    """Raises MissingArtifactError when the run has no model.json."""
    path = _require(Path(run_dir) / MODEL_FILE)
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def write_problem_metadata(run_dir, summary: Dict[str, Any]) -> Path:
    """Problem boxes and U distribution, including Gaussian truncation details."""
    logger = logging.getLogger('ParetoCover')
    path = Path(run_dir) / PROBLEM_FILE
    try:
        _replace_atomically(path, lambda f: json.dump(summary, f, indent=2, ensure_ascii=False))
        return path
    except Exception as e:
        logger.error(f"Failed to write problem metadata: {e}")
        raise


def read_problem_metadata(run_dir) -> Dict[str, Any]:
    path = _require(Path(run_dir) / PROBLEM_FILE)
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def read_config_snapshot(run_dir) -> Dict[str, Any]:
    path = _require(Path(run_dir) / CONFIG_FILE)
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


# ============================================================================
# STATISTICS
# ============================================================================

def run_exists(run_dir) -> bool:
    return (Path(run_dir) / CONFIG_FILE).exists()


def run_stats(run_dir) -> Dict[str, Any]:
    """
    Summary of what a run directory holds.

    Returns:
        Dictionary with row and record counts and total wall time
    """
    run_dir = Path(run_dir)
    doe_rows = 0
    if (run_dir / DOE_FILE).exists():
        with open(run_dir / DOE_FILE, 'r', encoding='utf-8') as f:
            doe_rows = max(0, sum(1 for line in f if line.strip()) - 1)
    history = read_history(run_dir)
    timings = read_timings(run_dir)
    return {
        'run_dir': str(run_dir),
        'doe_rows': doe_rows,
        'iterations': len(history),
        'fallbacks': sum(1 for r in history if r.get('fallback')),
        'has_model': (run_dir / MODEL_FILE).exists(),
        'wall_time_s': round(sum(t.get('wall_time_s', 0.0) for t in timings), 3),
    }
