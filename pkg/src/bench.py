#!/usr/bin/env python3
"""
Replication Benchmark for ParetoCover
Runs R replications of several acquisition kinds and compares them by the
median Δ_2 of the plug-in conditional fronts and by coverage L2.

Replication r of every kind shares one derived seed set, so kinds start
from the same initial design. Evaluation U samples and X_test are shared
by all runs.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

import engine
import pareto_core as pc
import report_generator as report
from metrics import DEFAULT_P, delta_distribution
from problems import resolve_problem
from run_config import ACQUISITION_KINDS, ConfigError, RunConfig, derive_seed
from uncertainty import sample_u


@dataclass
class BenchSpec:
    """Replication benchmark description."""

    problem: Any = '10d'
    kinds: List[str] = field(default_factory=lambda: ['iehvi', 'pehvi', 'random'])
    replications: int = 5
    budget: int = 100
    initial_size: Optional[int] = None
    n_u: int = 128                       # evaluation U samples
    x_test_size: int = 2000
    master_seed: int = 0
    output_dir: str = 'runs/bench'
    p: float = DEFAULT_P
    overrides: Dict[str, Any] = field(default_factory=dict)   # merged into every run config

    def __post_init__(self):
        if not self.kinds:
            raise ConfigError('kinds', "at least one acquisition kind is required")
        for kind in self.kinds:
            if kind not in ACQUISITION_KINDS:
                raise ConfigError('kinds', f"unknown acquisition kind '{kind}'")
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ConfigError('replications', "must be an integer >= 1")
        if not isinstance(self.budget, int) or self.budget < 0:
            raise ConfigError('budget', "must be an integer >= 0")
        for name in ('n_u', 'x_test_size'):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ConfigError(name, "must be a positive integer")

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> 'BenchSpec':
        known = set(BenchSpec.__dataclass_fields__)
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown key")
        return BenchSpec(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def replication_config(spec: BenchSpec, kind: str, replication: int) -> RunConfig:
    """Run configuration of one replication, seeds derived from the master seed."""
    data = dict(spec.overrides)
    data['problem'] = spec.problem
    data['budget'] = spec.budget
    data['initial_design'] = {'size': spec.initial_size}
    acquisition = dict(data.get('acquisition', {}))
    acquisition['kind'] = kind
    data['acquisition'] = acquisition
    data['output_dir'] = str(Path(spec.output_dir) / kind / f"rep_{replication:03d}")
    config = RunConfig(data)
    config.apply_master_seed(derive_seed(spec.master_seed, 'replication', replication))
    return config


def _aggregate(spec: BenchSpec, runs: List[Dict[str, Any]]) -> Dict[str, Any]:
    kinds = {}
    for kind in spec.kinds:
        done = [r for r in runs if r['kind'] == kind and r['status'] == 'ok']
        medians = [r['median_delta'] for r in done]
        l2 = [r['coverage_l2'] for r in done]
        kinds[kind] = {
            'replications': spec.replications,
            'completed': len(done),
            'complete': len(done) == spec.replications,
            'median_delta': float(np.median(medians)) if medians else None,
            'median_coverage_l2': float(np.median(l2)) if l2 else None,
            'median_deltas': medians,
        }
    return kinds


def run_bench(spec: BenchSpec, threads: int = 1) -> Dict[str, Any]:
    """
    Run every (kind, replication) pair and write bench_summary.json.

    Replications run concurrently when threads > 1; each one is isolated
    in its own directory and the summary order does not depend on timing.

    Returns:
        Summary dictionary (also written to output_dir)
    """
    logger = logging.getLogger('ParetoCover')
    with resolve_problem(spec.problem) as problem:
        u_eval = sample_u(problem.u_dist, spec.n_u, seed=derive_seed(spec.master_seed, 'evaluation-u'))
    x_test = pc.sobol_set(problem.x_lower, problem.x_upper, spec.x_test_size,
                          seed=derive_seed(spec.master_seed, 'x-test'))

    jobs = [(kind, r) for kind in spec.kinds for r in range(spec.replications)]

    logger.info("=" * 70)
    logger.info(f"BENCHMARK: {len(jobs)} runs on problem {problem.name}")
    logger.info("=" * 70)

    def one(job):
        kind, r = job
        entry = {'kind': kind, 'replication': r,
                 'seed': derive_seed(spec.master_seed, 'replication', r)}
        try:
            config = replication_config(spec, kind, r)
            entry['run_dir'] = config.get('output_dir')
            engine.run(config, threads=1)
            _, run_problem, _, model = engine.load_run(entry['run_dir'])
            with run_problem:
                metric = delta_distribution(model, run_problem, u_eval, x_test, p=spec.p,
                                            provenance={'run_dir': entry['run_dir'], 'kind': kind})
            report.export_metrics(metric, entry['run_dir'])
            entry.update(status='ok', median_delta=metric.summary()['median'],
                         coverage_l2=metric.coverage_l2)
            logger.info(f"  {kind} rep {r}: median Delta = {entry['median_delta']:.6g}")
        except Exception as e:
            logger.error(f"  {kind} rep {r} failed: {e}")
            entry.update(status='failed', error=str(e))
        return entry

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(one, jobs))
    else:
        runs = [one(job) for job in jobs]

    summary = {
        'spec': spec.to_dict(),
        'evaluation': {'n_u': spec.n_u, 'x_test': x_test.describe()},
        'runs': runs,
        'kinds': _aggregate(spec, runs),
        'report_metadata': report.report_metadata('bench'),
    }
    report.export_to_json(summary, Path(spec.output_dir) / report.BENCH_SUMMARY)
    return summary

