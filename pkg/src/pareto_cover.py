#!/usr/bin/env python3
"""
ParetoCover
Multiobjective Bayesian optimization under uncertain environmental inputs.

Commands:
- run:       BO loop (PEHVI, WPEHVI, IEHVI or random filling) into a run directory
- coverage:  coverage probability of conditional Pareto sets on a candidate grid
- metrics:   Delta_2 distribution and coverage L2 of a finished run
- bench:     replicated comparison of acquisition kinds
- problems:  list the built-in problems

Outputs are CSV/JSON files meant for external plotting.
"""

import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

import bench
import engine
import pareto_core as pc
import report_generator as report
import run_store as store
import uncertainty as unc
from metrics import DEFAULT_METRIC_NU, DEFAULT_X_TEST_SIZE, delta_distribution
from problems import EvaluatorError, UnknownProblemError, get_problem, problem_catalog
from run_config import ConfigError, derive_seed, describe, load_run_config


# ============================================================================
# CONFIGURATION
# ============================================================================

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EVALUATOR = 3
EXIT_MISSING = 4

MAX_CANDIDATES = 10 ** 7
DEFAULT_COVERAGE_NU = 2048
DEFAULT_GRID = 64
DEFAULT_LOG_FILE = 'pareto_cover.log'


# ============================================================================
# LOGGING SETUP
# ============================================================================

def setup_logging(log_file: Optional[str] = DEFAULT_LOG_FILE, log_level: int = logging.INFO):
    """
    Configure logging to write to both file and console.

    Args:
        log_file: Name of the log file (None: console only)
        log_level: Logging level (default: INFO)
    """
    logger = logging.getLogger('ParetoCover')
    logger.setLevel(log_level)

    # Clear existing handlers to avoid duplicates
    logger.handlers.clear()

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setLevel(log_level)
        file_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        ))
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(logging.Formatter('%(levelname)s - %(message)s'))
    logger.addHandler(console_handler)

    return logger


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_run(args) -> int:
    logger = logging.getLogger('ParetoCover')
    config = load_run_config(args.config)
    if args.seed is not None:
        config.apply_master_seed(args.seed)
    if args.out:
        config.set('output_dir', args.out)
    if args.budget is not None:
        config.set('budget', args.budget)

    for line in describe(config):
        logger.info(line)

    run_dir = engine.run(config, threads=args.threads)
    report.print_run_summary(store.run_stats(run_dir))
    print(run_dir)
    return EXIT_OK


def _candidates(args, lower, upper) -> pc.CandidateSet:
    dim = len(lower)
    layout = args.layout
    if layout == pc.AUTO:
        layout = pc.GRID if dim <= pc.MAX_GRID_DIMENSION else pc.SOBOL
    size = args.grid ** dim if layout == pc.GRID else args.candidates
    if size > MAX_CANDIDATES:
        raise ConfigError('grid', f"{size} candidates exceed the limit of {MAX_CANDIDATES}; "
                                  f"lower --grid or use --layout sobol --candidates N")
    if layout == pc.GRID:
        return pc.regular_grid(lower, upper, args.grid)
    return pc.sobol_set(lower, upper, args.candidates, seed=derive_seed(args.seed or 0, 'candidates'))


def cmd_coverage(args) -> int:
    seed = args.seed or 0
    if args.top_quantile is not None and not 0 < args.top_quantile <= 100:
        raise ConfigError('top_quantile', f"must be in (0, 100], got {args.top_quantile}")
    if args.run:
        _, problem, _, model = engine.load_run(args.run)
        source = f"run {args.run}"
    else:
        problem = get_problem(args.problem)
        model = None
        source = f"problem {problem.name}"

    with problem:
        return _coverage(args, problem, model, source, seed)


def _coverage(args, problem, model, source: str, seed: int) -> int:
    candidates = _candidates(args, problem.x_lower, problem.x_upper)
    u_samples = unc.sample_u(problem.u_dist, args.n_u, seed=derive_seed(seed, 'coverage-u'))

    if model is None:
        field = unc.coverage_probability(problem.evaluate, candidates, u_samples, threads=args.threads)
        evaluator = problem.evaluate
    else:
        field = unc.coverage_probability_plugin(model, candidates, u_samples, threads=args.threads)
        evaluator = unc.gp_mean_evaluator(model)

    in_mean_set = None
    if args.mean_front:
        mean_function = problem.mean_function if model is None else None
        _, idx, _ = unc.mean_objective_front(evaluator, candidates, u_samples, mean_function)
        in_mean_set = np.zeros(len(candidates), dtype=bool)
        in_mean_set[idx] = True

    accuracy = None
    if args.lipschitz is not None:
        accuracy = unc.discretization_accuracy(candidates, args.lipschitz,
                                               seed=derive_seed(seed, 'probe'))

    written = field
    if args.top_quantile is not None:
        keep = field.top_quantile_indices(args.top_quantile)
        written = field.top_quantile(args.top_quantile)
        if in_mean_set is not None:
            in_mean_set = in_mean_set[keep]

    report.print_coverage_summary(field, accuracy)
    metadata = report.report_metadata('coverage', source=source, seed=seed,
                                      top_quantile=args.top_quantile)
    out_dir = Path(args.out or 'coverage_out')
    paths = report.export_coverage(written, out_dir, in_mean_set, accuracy, metadata)
    print(paths[0])
    return EXIT_OK


def cmd_metrics(args) -> int:
    seed = args.seed or 0
    _, problem, _, model = engine.load_run(args.run_dir)
    u_samples = unc.sample_u(problem.u_dist, args.n_u, seed=derive_seed(seed, 'evaluation-u'))
    x_test = pc.sobol_set(problem.x_lower, problem.x_upper, args.x_test,
                          seed=derive_seed(seed, 'x-test'))

    with problem:
        metric = delta_distribution(model, problem, u_samples, x_test, threads=args.threads,
                                    provenance={'run_dir': str(args.run_dir), 'seed': seed})
    report.print_metric_summary(metric)
    paths = report.export_metrics(metric, Path(args.out or args.run_dir))
    print(paths[0])
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        with open(args.spec, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigError('<file>', f"cannot read bench spec {args.spec}: {e}") from e
    spec = bench.BenchSpec.from_dict(data)
    if args.seed is not None:
        spec.master_seed = args.seed
    if args.out:
        spec.output_dir = args.out

    summary = bench.run_bench(spec, threads=args.threads)
    report.print_bench_summary(summary)
    print(Path(spec.output_dir) / report.BENCH_SUMMARY)
    return EXIT_OK


def cmd_problems(args) -> int:
    catalog = problem_catalog()
    report.print_problem_catalog(catalog)
    if args.json:
        print(json.dumps([p.summary() for p in catalog], indent=2))
    return EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'coverage': cmd_coverage,
    'metrics': cmd_metrics,
    'bench': cmd_bench,
    'problems': cmd_problems,
}


# ============================================================================
# MAIN
# ============================================================================

def _add_common_options(parser, seed, out, threads):
    parser.add_argument('--seed', type=int, default=seed,
                        help='Master seed (run/bench: replaces config seeds; default 0 elsewhere)')
    parser.add_argument('--out', default=out, help='Output directory')
    parser.add_argument('--threads', type=int, default=threads,
                        help='Worker threads (results do not depend on it)')


def build_parser():
    import argparse

    parser = argparse.ArgumentParser(
        description='ParetoCover - multiobjective Bayesian optimization with uncertain inputs',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run the BO loop described by a config file
  python pareto_cover.py run configs/4d_iehvi.json

  # Coverage probability of f2x2 on a 64x64 grid with 2048 U samples
  python pareto_cover.py coverage --problem 4d --grid 64 --n-u 2048 --out cov4d

  # Same, keeping the top 10% and flagging the mean-objective Pareto set
  python pareto_cover.py coverage --problem 4d --top-quantile 10 --mean-front

  # Delta_2 distribution of a finished run
  python pareto_cover.py metrics runs/run --n-u 512 --x-test 5000

  # Replicated benchmark
  python pareto_cover.py --threads 4 bench configs/bench_10d.json

  # List problems
  python pareto_cover.py problems
        """
    )

    _add_common_options(parser, seed=None, out=None, threads=1)
    parser.add_argument('--log-file', default=DEFAULT_LOG_FILE, help='Log file path')
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')

    # Accepted after the subcommand too; SUPPRESS keeps the value given before it
    common = argparse.ArgumentParser(add_help=False)
    _add_common_options(common, seed=argparse.SUPPRESS, out=argparse.SUPPRESS,
                        threads=argparse.SUPPRESS)

    sub = parser.add_subparsers(dest='command', required=True)

    p_run = sub.add_parser('run', parents=[common], help='Run (or resume) a BO loop')
    p_run.add_argument('config', help='JSON run configuration')
    p_run.add_argument('--budget', type=int, default=None, help='Override the number of added points')

    p_cov = sub.add_parser('coverage', parents=[common], help='Coverage probability field')
    source = p_cov.add_mutually_exclusive_group(required=True)
    source.add_argument('--problem', help='Catalog problem (true-function estimator)')
    source.add_argument('--run', help='Run directory (GP plug-in estimator)')
    p_cov.add_argument('--grid', type=int, default=DEFAULT_GRID, help='Grid levels per X coordinate')
    p_cov.add_argument('--layout', choices=[pc.AUTO, pc.GRID, pc.SOBOL], default=pc.AUTO)
    p_cov.add_argument('--candidates', type=int, default=4096, help='Sobol candidate count')
    p_cov.add_argument('--n-u', type=int, default=DEFAULT_COVERAGE_NU, help='U samples')
    p_cov.add_argument('--top-quantile', type=float, default=None, help='Keep the top Q%% candidates')
    p_cov.add_argument('--mean-front', action='store_true', help='Add the in_mean_set column')
    p_cov.add_argument('--lipschitz', type=float, default=None, help='Lipschitz constant L for the L*delta bound')

    p_met = sub.add_parser('metrics', parents=[common], help='Delta_2 distribution and coverage L2 of a run')
    p_met.add_argument('run_dir', help='Run directory with model.json')
    p_met.add_argument('--n-u', type=int, default=DEFAULT_METRIC_NU, help='U samples')
    p_met.add_argument('--x-test', type=int, default=DEFAULT_X_TEST_SIZE, help='|X_test|')

    p_bench = sub.add_parser('bench', parents=[common], help='Replicated benchmark')
    p_bench.add_argument('spec', help='JSON bench specification')

    p_prob = sub.add_parser('problems', parents=[common], help='List built-in problems')
    p_prob.add_argument('--json', action='store_true', help='Also print the catalog as JSON')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for command-line usage.

    Returns:
        Exit status: 0 ok, 2 config error, 3 evaluator error, 4 missing artifact
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = setup_logging(args.log_file, logging.DEBUG if args.verbose else logging.INFO)

    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UnknownProblemError, unc.TruncationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except EvaluatorError as e:
        logger.error(f"Evaluator error: {e}")
        return EXIT_EVALUATOR
    except store.MissingArtifactError as e:
        logger.error(f"Missing artifact: {e}")
        return EXIT_MISSING


if __name__ == '__main__':
    sys.exit(main())
