#!/usr/bin/env python3
"""
Report Generator for ParetoCover
Writes command outputs for external plotting and prints console summaries.

Supports:
- Coverage CSV plus metadata JSON
- Metric report JSON plus per-u deltas CSV
- Benchmark summary JSON
- Console-friendly summaries
"""

import csv
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from metrics import MetricReport
from uncertainty import CoverageField, DiscretizationAccuracy


# ============================================================================
# CONFIGURATION
# ============================================================================

COVERAGE_CSV = 'coverage.csv'
COVERAGE_JSON = 'coverage.json'
METRICS_JSON = 'metrics.json'
DELTAS_CSV = 'deltas.csv'
BENCH_SUMMARY = 'bench_summary.json'


def report_metadata(command: str, **extra) -> Dict[str, Any]:
    """Provenance block shared by all JSON outputs."""
    data = {'command': command, 'generated_at': datetime.now().isoformat()}
    data.update(extra)
    return data


# ============================================================================
# EXPORTS
# ============================================================================

def export_to_json(data: Dict[str, Any], output_path) -> Path:
    """
    Export a dictionary to a JSON file.

    Args:
        data: JSON-serializable dictionary
        output_path: Path to output JSON file

    Returns:
        Path written
    """
    logger = logging.getLogger('ParetoCover')

    try:
        output_file = Path(output_path)
        output_file.parent.mkdir(parents=True, exist_ok=True)
        with open(output_file, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
        logger.info(f"JSON exported: {output_file}")
        return output_file

    except Exception as e:
        logger.error(f"Failed to export JSON {output_path}: {e}")
        raise


def export_deltas_csv(report: MetricReport, output_path) -> Path:
    """One row per U sample: u_index, delta (full precision)."""
    logger = logging.getLogger('ParetoCover')

    try:
        output_file = Path(output_path)
        output_file.parent.mkdir(parents=True, exist_ok=True)
        with open(output_file, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['u_index', 'delta'])
            for i, delta in enumerate(report.deltas):
                writer.writerow([i, repr(float(delta))])
        logger.info(f"Deltas exported: {output_file}")
        return output_file

    except Exception as e:
        logger.error(f"Failed to export deltas {output_path}: {e}")
        raise


def read_deltas_csv(path) -> np.ndarray:
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        next(reader)
        return np.array([float(row[1]) for row in reader if row], dtype=float)


def export_metrics(report: MetricReport, output_dir, metadata: Optional[Dict[str, Any]] = None) -> List[Path]:
    """Write metrics.json and deltas.csv into output_dir."""
    output_dir = Path(output_dir)
    data = report.to_dict()
    data['report_metadata'] = metadata or report_metadata('metrics')
    return [
        export_to_json(data, output_dir / METRICS_JSON),
        export_deltas_csv(report, output_dir / DELTAS_CSV),
    ]


def export_coverage(field: CoverageField, output_dir,
                    in_mean_set: Optional[np.ndarray] = None,
                    accuracy: Optional[DiscretizationAccuracy] = None,
                    metadata: Optional[Dict[str, Any]] = None) -> List[Path]:
    """
    Write coverage.csv (x1..x_nx, probability[, in_mean_set]) and coverage.json.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    extra = None
    if in_mean_set is not None:
        extra = {'in_mean_set': [int(bool(v)) for v in in_mean_set]}
    csv_path = field.to_csv(output_dir / COVERAGE_CSV, extra_columns=extra)

    data = {
        'estimator': field.estimator,
        'n_u': field.n_u,
        'candidates': field.candidates.describe(),
        'rows': len(field.candidates),
        'argmax': field.argmax().tolist(),
        'max_probability': float(np.max(field.probabilities)),
        'discretization': None if accuracy is None else accuracy.to_dict(),
        'report_metadata': metadata or report_metadata('coverage'),
    }
    return [csv_path, export_to_json(data, output_dir / COVERAGE_JSON)]


# ============================================================================
# CONSOLE SUMMARIES
# ============================================================================

def print_coverage_summary(field: CoverageField, accuracy: Optional[DiscretizationAccuracy] = None):
    logger = logging.getLogger('ParetoCover')
    logger.info("=" * 70)
    logger.info(f"COVERAGE PROBABILITY ({field.estimator})")
    logger.info("=" * 70)
    logger.info(f"Candidates: {len(field.candidates)} ({field.candidates.layout})")
    logger.info(f"U samples: {field.n_u}")
    logger.info(f"Argmax: {np.round(field.argmax(), 4).tolist()} "
                f"(p = {np.max(field.probabilities):.4f})")
    logger.info(f"Candidates with p > 0: {int(np.sum(field.probabilities > 0))}")
    if accuracy is not None:
        logger.info(f"Maximin distance delta: {accuracy.delta:.4g}")
        if accuracy.epsilon is not None:
            logger.info(f"Front accuracy L*delta: {accuracy.epsilon:.4g}")
    logger.info("=" * 70)


def print_metric_summary(report: MetricReport):
    logger = logging.getLogger('ParetoCover')
    summary = report.summary()
    logger.info("=" * 70)
    logger.info(f"METRIC REPORT (Delta_{report.p:g} over {report.n_u} U samples)")
    logger.info("=" * 70)
    for key in ('median', 'q25', 'q75', 'mean', 'min', 'max'):
        logger.info(f"  {key:8s} {summary[key]:.6g}")
    if report.coverage_l2 is not None:
        logger.info(f"  coverage L2: {report.coverage_l2:.6g}")
    logger.info("=" * 70)


def print_run_summary(stats: Dict[str, Any]):
    logger = logging.getLogger('ParetoCover')
    logger.info(f"Run directory: {stats['run_dir']}")
    logger.info(f"  DoE rows: {stats['doe_rows']}  iterations: {stats['iterations']}  "
                f"fallbacks: {stats['fallbacks']}  wall time: {stats['wall_time_s']}s")


def print_bench_summary(summary: Dict[str, Any]):
    logger = logging.getLogger('ParetoCover')
    logger.info("=" * 70)
    logger.info("BENCHMARK SUMMARY")
    logger.info("=" * 70)
    logger.info(f"{'kind':10s} {'runs':>6s} {'median Delta':>14s} {'coverage L2':>14s}")
    logger.info("-" * 70)
    for kind, data in summary['kinds'].items():
        median = data.get('median_delta')
        l2 = data.get('median_coverage_l2')
        logger.info(
            f"{kind:10s} {data['completed']:>3d}/{data['replications']:<2d} "
            f"{'-' if median is None else f'{median:.6g}':>14s} "
            f"{'-' if l2 is None else f'{l2:.6g}':>14s}"
            f"{'' if data['complete'] else '  (incomplete)'}"
        )
    logger.info("=" * 70)


def print_problem_catalog(problems):
    logger = logging.getLogger('ParetoCover')
    logger.info("=" * 70)
    logger.info("PROBLEM CATALOG")
    logger.info("=" * 70)
    for problem in problems:
        logger.info(f"{problem.name:8s} n_x={problem.n_x} n_u={problem.n_u} d={problem.n_objectives}  "
                    f"U: {problem.u_dist.kind}")
        logger.info(f"         {problem.description}")
    logger.info("=" * 70)
