"""Command-line front end: commands, outputs and exit codes"""

import csv
import json
import sys

import pytest

import pareto_cover
from report_generator import COVERAGE_CSV, COVERAGE_JSON, DELTAS_CSV, METRICS_JSON

ECHO_SCRIPT = (
    "import json, sys\n"
    "for line in sys.stdin:\n"
    "    q = json.loads(line)\n"
    "    print(json.dumps({'f': [sum(q['x']) + q['u'][0], sum(q['x']) - q['u'][0]]}), flush=True)\n"
)


def cli(tmp_path, *argv):
    return pareto_cover.main(['--log-file', str(tmp_path / 'cli.log'), *argv])


def write_config(tmp_path, **overrides):
    data = {
        'problem': '4d',
        'initial_design': {'size': 10},
        'budget': 1,
        'acquisition': {'kind': 'pehvi', 'n_pareto': 32},
        'optimizer': {'n_init': 32, 'top_k': 1, 'max_iter': 10},
        'gp': {'n_restarts': 1},
        'output_dir': str(tmp_path / 'run'),
    }
    data.update(overrides)
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(data), encoding='utf-8')
    return path


def read_rows(path):
    with open(path, newline='', encoding='utf-8') as f:
        return list(csv.DictReader(f))


@pytest.fixture(scope='module')
def finished_run(tmp_path_factory):
    base = tmp_path_factory.mktemp('cli_run')
    assert cli(base, 'run', str(write_config(base))) == 0
    return base / 'run'


def test_run_writes_snapshots(finished_run):
    assert (finished_run / 'model.json').exists()
    assert (finished_run / 'config.json').exists()


def test_coverage_true_function(tmp_path, capsys):
    out = tmp_path / 'cov'
    code = cli(tmp_path, 'coverage', '--problem', '4d', '--grid', '8', '--n-u', '32',
               '--mean-front', '--lipschitz', '10', '--out', str(out))
    assert code == 0
    assert capsys.readouterr().out.strip() == str(out / COVERAGE_CSV)

    rows = read_rows(out / COVERAGE_CSV)
    assert len(rows) == 64
    assert set(rows[0]) == {'x1', 'x2', 'probability', 'in_mean_set'}
    assert all(0.0 <= float(r['probability']) <= 1.0 for r in rows)
    assert any(r['in_mean_set'] == '1' for r in rows)

    data = json.loads((out / COVERAGE_JSON).read_text(encoding='utf-8'))
    assert data['estimator'] == 'true-function'
    assert data['discretization']['lipschitz'] == 10.0


def test_coverage_top_quantile(tmp_path):
    out = tmp_path / 'top'
    assert cli(tmp_path, 'coverage', '--problem', '4d', '--grid', '10', '--n-u', '32',
               '--top-quantile', '10', '--out', str(out)) == 0
    assert cli(tmp_path, 'coverage', '--problem', '4d', '--grid', '10', '--n-u', '32',
               '--out', str(tmp_path / 'all')) == 0
    every = sorted((float(r['probability']) for r in read_rows(tmp_path / 'all' / COVERAGE_CSV)),
                   reverse=True)
    kept = [float(r['probability']) for r in read_rows(out / COVERAGE_CSV)]
    assert len(kept) >= 10
    assert min(kept) == every[9]


def test_coverage_from_run(finished_run, tmp_path):
    out = tmp_path / 'plugin'
    assert cli(tmp_path, 'coverage', '--run', str(finished_run), '--grid', '6', '--n-u', '8',
               '--out', str(out)) == 0
    data = json.loads((out / COVERAGE_JSON).read_text(encoding='utf-8'))
    assert data['estimator'] == 'gp-plugin'
    assert data['rows'] == 36


def test_coverage_candidate_limit(tmp_path):
    assert cli(tmp_path, 'coverage', '--problem', '10d', '--layout', 'grid', '--grid', '64',
               '--out', str(tmp_path / 'big')) == pareto_cover.EXIT_CONFIG


def test_metrics_writes_one_delta_per_u(finished_run, tmp_path):
    out = tmp_path / 'metrics'
    assert cli(tmp_path, 'metrics', str(finished_run), '--n-u', '12', '--x-test', '64',
               '--out', str(out)) == 0
    assert len(read_rows(out / DELTAS_CSV)) == 12
    data = json.loads((out / METRICS_JSON).read_text(encoding='utf-8'))
    assert data['n_u'] == 12
    assert data['delta_summary']['median'] >= 0


def test_common_options_before_or_after_the_command(tmp_path):
    before, after = tmp_path / 'before', tmp_path / 'after'
    args = ('--problem', '4d', '--grid', '4', '--n-u', '8')
    assert cli(tmp_path, '--seed', '3', '--out', str(before), 'coverage', *args) == 0
    assert cli(tmp_path, 'coverage', *args, '--seed', '3', '--out', str(after), '--threads', '2') == 0
    assert (before / COVERAGE_CSV).read_bytes() == (after / COVERAGE_CSV).read_bytes()


def test_rerunning_a_config_gives_identical_doe(tmp_path):
    doe_files = []
    for name in ('first', 'second'):
        base = tmp_path / name
        base.mkdir()
        assert cli(base, 'run', str(write_config(base))) == 0
        doe_files.append((base / 'run' / 'doe.csv').read_bytes())
    assert doe_files[0] == doe_files[1]


def test_problems_json(tmp_path, capsys):
    assert cli(tmp_path, 'problems', '--json') == 0
    listing = json.loads(capsys.readouterr().out)
    assert [p['name'] for p in listing] == ['4d', '10d', '10d-bis']


# ============================================================================
# EXIT CODES
# ============================================================================

def test_config_error_exit_code(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps({'acquisition': {'kind': 'ucb'}}), encoding='utf-8')
    assert cli(tmp_path, 'run', str(path)) == pareto_cover.EXIT_CONFIG


def test_unknown_problem_exit_code(tmp_path):
    assert cli(tmp_path, 'coverage', '--problem', '11d', '--out', str(tmp_path / 'x')) == \
        pareto_cover.EXIT_CONFIG


@pytest.mark.parametrize('quantile', ['0', '150'])
def test_top_quantile_out_of_range_exit_code(tmp_path, quantile):
    assert cli(tmp_path, 'coverage', '--problem', '4d', '--grid', '4', '--n-u', '8',
               '--top-quantile', quantile, '--out', str(tmp_path / 'q')) == pareto_cover.EXIT_CONFIG


def test_truncation_error_exit_code(tmp_path):
    # centered on a corner with a huge variance: about 4e-4 of the mass stays in the box
    config = write_config(tmp_path, acquisition={'kind': 'iehvi', 'n_pareto': 32},
                          problem={'external': {
                              'command': [sys.executable, '-c', ECHO_SCRIPT],
                              'x_lower': [0, 0], 'x_upper': [1, 1],
                              'u_distribution': {'kind': 'gaussian', 'lower': [0], 'upper': [1],
                                                  'center': [0], 'variances': [1e6]},
                              'n_objectives': 2,
                          }})
    assert cli(tmp_path, 'run', str(config)) == pareto_cover.EXIT_CONFIG


def test_evaluator_error_exit_code(tmp_path):
    config = write_config(tmp_path, problem={'external': {
        'command': [sys.executable, '-c', 'pass'],
        'x_lower': [0, 0], 'x_upper': [1, 1],
        'u_lower': [0], 'u_upper': [1],
        'n_objectives': 2,
    }})
    assert cli(tmp_path, 'run', str(config)) == pareto_cover.EXIT_EVALUATOR


def test_missing_artifact_exit_code(tmp_path):
    empty = tmp_path / 'empty'
    empty.mkdir()
    assert cli(tmp_path, 'metrics', str(empty)) == pareto_cover.EXIT_MISSING
