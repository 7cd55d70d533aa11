"""Run directory artifacts: DoE, history, timings, model snapshot"""

import numpy as np
import pytest

import run_store
from gaussian_process import DesignOfExperiments
from problems import get_problem
from run_config import RunConfig, save_run_config


def make_doe(rng, n=6):
    inputs = rng.random((n, 4)) * [1, 1, 1, 1] + [0, 1, 2, 3]
    outputs = rng.standard_normal((n, 2)) * 1e3
    return DesignOfExperiments(inputs, outputs, 2, [0, 1, 2, 3], [1, 2, 3, 4])


def test_doe_header():
    assert run_store.doe_header(2, 2, 2) == ['x1', 'x2', 'u1', 'u2', 'f1', 'f2']


def test_doe_is_bit_exact(tmp_path, rng):
    doe = make_doe(rng)
    run_store.write_doe(tmp_path, doe)
    loaded = run_store.read_doe(tmp_path, doe.lower, doe.upper)
    assert loaded.n_x == 2 and loaded.n_u == 2
    assert np.array_equal(loaded.inputs, doe.inputs)
    assert np.array_equal(loaded.outputs, doe.outputs)
    assert not (tmp_path / 'doe.csv.tmp').exists()


def test_doe_rewrite_replaces_rows(tmp_path, rng):
    run_store.write_doe(tmp_path, make_doe(rng, 6))
    run_store.write_doe(tmp_path, make_doe(rng, 3))
    assert run_store.read_doe(tmp_path, [0, 1, 2, 3], [1, 2, 3, 4]).size == 3


def test_missing_artifacts(tmp_path):
    with pytest.raises(run_store.MissingArtifactError):
        run_store.read_doe(tmp_path, [0], [1])
    with pytest.raises(run_store.MissingArtifactError):
        run_store.read_model(tmp_path)
    with pytest.raises(run_store.MissingArtifactError):
        run_store.read_config_snapshot(tmp_path)
    assert run_store.read_history(tmp_path) == []


def test_history_append_and_truncate(tmp_path):
    for i in range(4):
        run_store.append_history(tmp_path, {'iteration': i, 'fallback': i == 2})
    assert [r['iteration'] for r in run_store.read_history(tmp_path)] == [0, 1, 2, 3]
    run_store.truncate_history(tmp_path, 2)
    assert [r['iteration'] for r in run_store.read_history(tmp_path)] == [0, 1]


def test_model_snapshot(tmp_path):
    run_store.write_model(tmp_path, {'kernel': 'matern52', 'objectives': []})
    assert run_store.read_model(tmp_path)['kernel'] == 'matern52'


def test_run_stats(tmp_path, rng):
    assert not run_store.run_exists(tmp_path)
    save_run_config(RunConfig(), tmp_path)
    run_store.write_doe(tmp_path, make_doe(rng, 5))
    for i in range(3):
        run_store.append_history(tmp_path, {'iteration': i, 'fallback': i == 1})
        run_store.append_timing(tmp_path, {'iteration': i, 'wall_time_s': 0.5})

    stats = run_store.run_stats(tmp_path)
    assert run_store.run_exists(tmp_path)
    assert stats['doe_rows'] == 5
    assert stats['iterations'] == 3
    assert stats['fallbacks'] == 1
    assert stats['has_model'] is False
    assert stats['wall_time_s'] == pytest.approx(1.5)


def test_problem_metadata_round_trip(tmp_path):
    summary = get_problem('10d-bis').summary()
    run_store.write_problem_metadata(tmp_path, summary)
    loaded = run_store.read_problem_metadata(tmp_path)
    assert loaded == summary
    assert loaded['u_distribution']['truncation'] == 'rejection'
    assert loaded['u_distribution']['acceptance_mass'] == get_problem('10d-bis').u_dist.acceptance_mass()
    with pytest.raises(run_store.MissingArtifactError):
        run_store.read_problem_metadata(tmp_path / 'elsewhere')
