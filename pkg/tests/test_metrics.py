"""Front distances, coverage L2 and the per-u Δ_p distribution"""

import numpy as np
import pytest

import gaussian_process as gp
import metrics
import pareto_core as pc
import uncertainty as unc
from problems import get_problem


@pytest.fixture(scope='module')
def problem():
    return get_problem('4d')


@pytest.fixture(scope='module')
def model(problem):
    design = pc.sobol_set(problem.joint_lower, problem.joint_upper, 40, seed=0)
    doe = gp.DesignOfExperiments(design.points, problem.evaluate_joint(design.points),
                                 problem.n_x, problem.joint_lower, problem.joint_upper)
    return gp.fit(doe, gp.FitSettings(seed=0, n_restarts=2))


# ============================================================================
# FRONT DISTANCES
# ============================================================================

def test_distance_examples():
    reference = [[1, 0], [0, 1]]
    assert metrics.gd_p([[0, 0]], reference) == pytest.approx(1.0)
    assert metrics.igd_p([[0, 0]], reference) == pytest.approx(1.0)
    assert metrics.delta_p([[0, 0]], reference) == pytest.approx(1.0)

    assert metrics.gd_p([[1, 0]], reference) == 0.0
    assert metrics.igd_p([[1, 0]], reference) == pytest.approx(1.0)
    assert metrics.delta_p([[1, 0]], reference) == pytest.approx(1.0)


def test_identical_fronts_have_zero_distance(rng):
    front = rng.random((12, 2))
    assert metrics.delta_p(front, front) == 0.0


def test_delta_is_symmetric(rng):
    a, b = rng.random((7, 2)), rng.random((11, 2))
    assert metrics.delta_p(a, b) == pytest.approx(metrics.delta_p(b, a))
    assert metrics.gd_p(a, b) == pytest.approx(metrics.igd_p(b, a))


def test_delta_grows_with_p(rng):
    a, b = rng.random((7, 2)), rng.random((11, 2))
    assert metrics.delta_p(a, b, p=1) <= metrics.delta_p(a, b, p=2) + 1e-12


def test_distances_accept_front_estimates():
    front = pc.FrontEstimate([[0.0, 1.0], [1.0, 0.0]])
    assert metrics.delta_p(front, [[0.0, 1.0], [1.0, 0.0]]) == 0.0


def test_distances_reject_bad_input():
    with pytest.raises(ValueError):
        metrics.gd_p(np.empty((0, 2)), [[0, 0]])
    with pytest.raises(ValueError):
        metrics.gd_p([[0, 0]], [[1, 1]], p=0)
    with pytest.raises(pc.DimensionMismatchError):
        metrics.gd_p([[0, 0]], [[1, 1, 1]])


# ============================================================================
# COVERAGE L2
# ============================================================================

def test_coverage_l2_values():
    candidates = pc.regular_grid([0, 0], [1, 1], 2)
    ones = unc.CoverageField(candidates, np.ones(4), 10)
    zeros = unc.CoverageField(candidates, np.zeros(4), 10, unc.GP_PLUGIN)
    assert metrics.coverage_l2(ones, ones) == 0.0
    assert metrics.coverage_l2(ones, zeros) == 1.0
    half = unc.CoverageField(candidates, [1, 1, 0, 0], 10)
    assert metrics.coverage_l2(ones, half) == pytest.approx(0.5)


def test_coverage_l2_rejects_other_candidates():
    a = unc.CoverageField(pc.regular_grid([0, 0], [1, 1], 2), np.ones(4), 10)
    b = unc.CoverageField(pc.regular_grid([0, 0], [2, 2], 2), np.ones(4), 10)
    with pytest.raises(ValueError):
        metrics.coverage_l2(a, b)


# ============================================================================
# METRIC REPORT
# ============================================================================

def test_report_summary_ordering(rng):
    report = metrics.MetricReport(rng.random(50), coverage_l2=0.1)
    summary = report.summary()
    assert summary['min'] <= summary['q25'] <= summary['median'] <= summary['q75'] <= summary['max']
    assert report.n_u == 50
    assert report.to_dict()['delta_summary'] == summary


def test_empty_report_has_empty_summary():
    assert metrics.MetricReport([]).summary() == {}


# ============================================================================
# DELTA DISTRIBUTION
# ============================================================================

def test_delta_distribution(model, problem):
    u_samples = unc.sample_u(problem.u_dist, 8, seed=5)
    x_test = pc.sobol_set(problem.x_lower, problem.x_upper, 128, seed=9)
    report = metrics.delta_distribution(model, problem, u_samples, x_test, provenance={'kind': 'test'})
    assert report.n_u == 8
    assert np.all(report.deltas >= 0)
    assert 0.0 <= report.coverage_l2 <= 1.0
    assert report.provenance['kind'] == 'test'
    assert report.provenance['n_u'] == 8


def test_delta_distribution_threads_invariant(model, problem):
    u_samples = unc.sample_u(problem.u_dist, 6, seed=5)
    x_test = pc.sobol_set(problem.x_lower, problem.x_upper, 64, seed=9)
    single = metrics.delta_distribution(model, problem, u_samples, x_test)
    threaded = metrics.delta_distribution(model, problem, u_samples, x_test, threads=3)
    assert np.array_equal(single.deltas, threaded.deltas)
    assert single.coverage_l2 == threaded.coverage_l2


def test_delta_distribution_needs_fitted_model(problem):
    u_samples = unc.sample_u(problem.u_dist, 2, seed=0)
    x_test = pc.sobol_set(problem.x_lower, problem.x_upper, 8, seed=0)
    with pytest.raises(gp.NotFittedError):
        metrics.delta_distribution(gp.GpSurrogate(), problem, u_samples, x_test)
