"""Benchmark problems, catalog lookup and external evaluators"""

import sys

import numpy as np
import pytest

import problems
from problems import EvaluatorError, OutOfBoxError, UnknownProblemError


# ============================================================================
# ANALYTIC PROBLEMS
# ============================================================================

def test_f2x2_direct_substitution():
    assert problems.f2x2([0, 1], [2, 3]).tolist() == [10.0, 15.25]
    assert problems.f2x2([0, 1], [3, 4]).tolist() == [17.0, 22.25]


def test_f2x2_mean_direct_substitution():
    assert problems.f2x2_mean([0, 1]) == pytest.approx([79 / 6, 223 / 12])
    assert problems.f2x2_mean([0, 2]) == pytest.approx([79 / 6, 235 / 12])


def test_f2x2_rejects_out_of_box():
    with pytest.raises(OutOfBoxError):
        problems.f2x2([0, 0.5], [2, 3])
    with pytest.raises(OutOfBoxError):
        problems.f2x2([0, 1], [1.9, 3])
    assert problems.f2x2([0, 0.5], [2, 3], strict=False).shape == (2,)


def test_f2x2_batch_matches_rows(rng):
    x = np.column_stack([rng.random(10), 1 + rng.random(10)])
    u = np.column_stack([2 + rng.random(10), 3 + rng.random(10)])
    batch = problems.f2x2(x, u)
    assert batch.shape == (10, 2)
    for i in range(10):
        assert np.array_equal(batch[i], problems.f2x2(x[i], u[i]))


def test_f2x2_mean_matches_monte_carlo(rng):
    n = 1_000_000
    u = np.column_stack([2 + rng.random(n), 3 + rng.random(n)])
    for _ in range(10):
        x = np.array([rng.random(), 1 + rng.random()])
        values = problems.f2x2(np.tile(x, (n, 1)), u)
        std_error = values.std(axis=0, ddof=1) / np.sqrt(n)
        assert np.all(np.abs(values.mean(axis=0) - problems.f2x2_mean(x)) <= 3.5 * std_error)


def test_f5x5_examples():
    assert problems.f5x5(np.zeros(5), np.zeros(5)).tolist() == [25.0, 25.0]
    assert problems.f5x5(np.ones(5), np.zeros(5)).tolist() == [0.0, 0.0]
    assert problems.f5x5(np.zeros(5), [1, 1, 1, 1, 0]).tolist() == [9.0, 1.0]


def test_f5x5_swap_symmetry(rng):
    x = rng.random((20, 5))
    u = rng.random((20, 5))
    swapped = u[:, [0, 1, 2, 4, 3]]
    assert np.allclose(problems.f5x5(x, u), problems.f5x5(x, swapped)[:, ::-1], rtol=0, atol=1e-12)


@pytest.mark.parametrize('name', ['10d', '10d-bis'])
def test_f5x5_mean_matches_monte_carlo(name, rng):
    problem = problems.get_problem(name)
    u = problem.u_dist.sample(400_000, rng)
    x = rng.random(5)
    values = problem.evaluate(np.tile(x, (u.shape[0], 1)), u)
    std_error = values.std(axis=0, ddof=1) / np.sqrt(u.shape[0])
    assert np.all(np.abs(values.mean(axis=0) - problem.mean_function(x)) <= 4 * std_error)


# ============================================================================
# CATALOG
# ============================================================================

def test_catalog_names():
    assert [p.name for p in problems.problem_catalog()] == ['4d', '10d', '10d-bis']


def test_4d_boxes():
    problem = problems.get_problem('4d')
    assert problem.x_lower.tolist() == [0, 1] and problem.x_upper.tolist() == [1, 2]
    assert problem.u_dist.lower.tolist() == [2, 3] and problem.u_dist.upper.tolist() == [3, 4]
    assert problem.joint_lower.tolist() == [0, 1, 2, 3]


def test_10d_bis_distribution():
    problem = problems.get_problem('10d-bis')
    assert problem.u_dist.kind == 'gaussian'
    assert problem.u_dist.variances.tolist() == [0.1] * 5
    assert problem.u_dist.center.tolist() == [0.5] * 5
    assert problem.n_x == 5 and problem.n_u == 5


def test_unknown_problem_lists_catalog():
    with pytest.raises(UnknownProblemError) as info:
        problems.get_problem('11d')
    assert '10d-bis' in str(info.value)


def test_evaluate_joint_splits_columns():
    problem = problems.get_problem('4d')
    assert problem.evaluate_joint([[0, 1, 2, 3]]).tolist() == [[10.0, 15.25]]


def test_summary_is_json_friendly():
    summary = problems.get_problem('10d').summary()
    assert summary['n_objectives'] == 2
    assert summary['closed_form_mean'] is True
    assert summary['u_distribution']['kind'] == 'uniform'


def test_resolve_problem_rejects_garbage():
    with pytest.raises(UnknownProblemError):
        problems.resolve_problem(42)


# ============================================================================
# EXTERNAL EVALUATORS
# ============================================================================

ECHO_SCRIPT = (
    "import json, sys\n"
    "for line in sys.stdin:\n"
    "    q = json.loads(line)\n"
    "    print(json.dumps({'f': [sum(q['x']) + q['u'][0], sum(q['x']) - q['u'][0]]}), flush=True)\n"
)


def test_external_problem_round_trip():
    problem = problems.resolve_problem({'external': {
        'command': [sys.executable, '-c', ECHO_SCRIPT],
        'x_lower': [0, 0], 'x_upper': [1, 1],
        'u_lower': [0], 'u_upper': [1],
        'n_objectives': 2,
    }})
    try:
        values = problem.evaluate([[0.25, 0.5], [1.0, 1.0]], [[0.5], [0.0]])
        assert values.tolist() == [[1.25, 0.25], [2.0, 2.0]]
    finally:
        problem.function.close()


def test_external_wrong_objective_count():
    evaluator = problems.ExternalEvaluator([sys.executable, '-c', ECHO_SCRIPT], n_objectives=3)
    try:
        with pytest.raises(EvaluatorError):
            evaluator([[0.1]], [[0.2]])
    finally:
        evaluator.close()


def test_external_process_that_exits():
    evaluator = problems.ExternalEvaluator([sys.executable, '-c', 'pass'], n_objectives=2)
    try:
        with pytest.raises(EvaluatorError):
            evaluator([[0.1]], [[0.2]])
    finally:
        evaluator.close()


def test_problem_context_stops_the_evaluator():
    with problems.resolve_problem({'external': {
        'command': [sys.executable, '-c', ECHO_SCRIPT],
        'x_lower': [0], 'x_upper': [1],
        'u_lower': [0], 'u_upper': [1],
        'n_objectives': 2,
    }}) as problem:
        problem.evaluate([[0.5]], [[0.25]])
        process = problem.function._process
        assert process.poll() is None
    assert process.poll() is not None
    assert problem.function._process is None


def test_catalog_problems_close_without_effect():
    with problems.get_problem('4d') as problem:
        pass
    assert problem.evaluate([0, 1], [2, 3]).tolist() == [[10.0, 15.25]]
