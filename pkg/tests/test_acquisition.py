"""β-fronts, reference points and the PEHVI / WPEHVI / IEHVI acquisitions"""

import numpy as np
import pytest

import acquisition as acq
import gaussian_process as gp
import hypervolume as hvm
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


@pytest.fixture(scope='module')
def pareto(problem):
    return pc.sobol_set(problem.x_lower, problem.x_upper, 64, seed=1)


@pytest.fixture(scope='module')
def u_samples(problem):
    return unc.sample_u(problem.u_dist, 6, seed=2)


def make_spec(kind, pareto, u_samples=None, beta=0.0, **kwargs):
    return acq.AcquisitionSpec(kind=kind, beta=beta, pareto_candidates=pareto,
                               u_samples=u_samples, **kwargs)


def random_joint(problem, rng, n):
    return problem.joint_lower + rng.random((n, 4)) * (problem.joint_upper - problem.joint_lower)


# ============================================================================
# SPEC VALIDATION
# ============================================================================

def test_spec_rejects_unknown_kind(pareto):
    with pytest.raises(ValueError):
        make_spec('ucb', pareto)


def test_spec_requires_pareto_candidates():
    with pytest.raises(ValueError):
        acq.AcquisitionSpec(kind=acq.PEHVI)


def test_spec_iehvi_requires_u_samples(pareto):
    with pytest.raises(ValueError):
        make_spec(acq.IEHVI, pareto)


def test_random_kind_needs_nothing():
    spec = acq.AcquisitionSpec(kind=acq.RANDOM)
    with pytest.raises(ValueError):
        acq.acquisition_batch(None, np.zeros((1, 4)), spec)


# ============================================================================
# β-FRONTS AND REFERENCE POINTS
# ============================================================================

def test_beta_zero_front_is_non_dominated_mean(model, pareto, problem):
    u = np.array([2.4, 3.6])
    front = acq.beta_front(model, u, make_spec(acq.PEHVI, pareto))
    means, _ = model.predict(np.hstack([pareto.points, np.tile(u, (len(pareto), 1))]))
    assert np.array_equal(front.points, means[pc.non_dominated(means)])
    assert front.provenance == pc.PROVENANCE_GP


def test_pessimistic_front_is_dominated_by_mean_front(model, pareto):
    u = np.array([2.4, 3.6])
    optimistic = acq.beta_front(model, u, make_spec(acq.PEHVI, pareto, beta=0.0))
    pessimistic = acq.beta_front(model, u, make_spec(acq.PEHVI, pareto, beta=10.0))
    for p in pessimistic.points:
        assert np.any(np.all(optimistic.points <= p, axis=1))

    ref = acq.reference_point(pessimistic)
    assert hvm.hv(pessimistic, ref) <= hvm.hv(optimistic, ref)


def test_beta_front_requires_fitted_model(pareto):
    with pytest.raises(gp.NotFittedError):
        acq.beta_front(gp.GpSurrogate(), [2.5, 3.5], make_spec(acq.PEHVI, pareto))


def test_reference_point_policy():
    assert acq.reference_point(pc.FrontEstimate([[0, 1], [1, 0]])).values == pytest.approx([1.1, 1.1])

    single = acq.reference_point(pc.FrontEstimate([[3, 4]]))
    assert single.values == pytest.approx([3 + 1e-6, 4 + 1e-6])

    fixed = acq.reference_point(pc.FrontEstimate([[0, 1]]), acq.ReferencePolicy(fixed=[7, 8]))
    assert fixed.values.tolist() == [7, 8]


def test_reference_point_empty_front():
    with pytest.raises(ValueError):
        acq.reference_point(pc.FrontEstimate.empty(2))


# ============================================================================
# PEHVI
# ============================================================================

def test_pehvi_is_ehvi_against_beta_front(model, pareto, problem, rng):
    spec = make_spec(acq.PEHVI, pareto, beta=10.0)
    for point in random_joint(problem, rng, 5):
        x, u = point[:2], point[2:]
        front = acq.beta_front(model, u, spec)
        ref = acq.reference_point(front, spec.ref_policy)
        means, stds = model.predict(point)
        expected = hvm.ehvi_2d(means[0], stds[0], front, ref)
        assert acq.pehvi(model, x, u, spec) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_pehvi_matches_monte_carlo(model, pareto, problem, rng):
    spec = make_spec(acq.PEHVI, pareto, beta=10.0)
    for i, point in enumerate(random_joint(problem, rng, 20)):
        front = acq.beta_front(model, point[2:], spec)
        ref = acq.reference_point(front)
        means, stds = model.predict(point)
        estimate, std_error = hvm.ehvi_mc(means[0], stds[0], front, ref, n_samples=20_000, seed=i)
        value = acq.pehvi(model, point[:2], point[2:], spec)
        # rare-improvement cases can leave every draw at zero
        slack = 1e-6 * np.prod(ref.values - front.points.min(axis=0))
        assert abs(value - estimate) <= 4 * std_error + slack


def test_pehvi_no_phantom_improvement_at_training_points(problem):
    x_train = pc.regular_grid(problem.x_lower, problem.x_upper, 5).points
    u = np.array([2.5, 3.5])
    inputs = np.hstack([x_train, np.tile(u, (len(x_train), 1))])
    extra = pc.sobol_set(problem.joint_lower, problem.joint_upper, 16, seed=4).points
    inputs = np.vstack([inputs, extra])
    doe = gp.DesignOfExperiments(inputs, problem.evaluate_joint(inputs), 2,
                                 problem.joint_lower, problem.joint_upper)
    theta = np.r_[np.full(4, np.log(0.5)), 0.0]
    model = gp.fit(doe, gp.FitSettings(hyperparameters=[theta, theta]))

    spec = make_spec(acq.PEHVI, pc.CandidateSet(x_train, problem.x_lower, problem.x_upper))
    values = acq.pehvi_batch(model, inputs[:len(x_train)], spec)
    outputs = doe.outputs
    scale = float(np.prod(outputs.max(axis=0) - outputs.min(axis=0)))
    assert np.all(values >= 0)
    assert np.all(values <= 1e-6 * scale)


def test_pehvi_batch_uses_cache(model, pareto, problem, rng):
    spec = make_spec(acq.PEHVI, pareto)
    cache = acq.FrontCache(model, spec)
    u = np.array([2.2, 3.3])
    points = np.hstack([rng.random((10, 1)), 1 + rng.random((10, 1)), np.tile(u, (10, 1))])
    acq.pehvi_batch(model, points, spec, cache)
    assert cache.misses == 1 and cache.hits == 9


def test_cache_invalidated_for_a_new_model(model, pareto):
    spec = make_spec(acq.PEHVI, pareto)
    cache = acq.FrontCache(gp.GpSurrogate(), spec)
    acq.pehvi(model, [0.5, 1.5], [2.5, 3.5], spec, cache)
    assert cache.model is model
    assert len(cache) == 1


# ============================================================================
# WPEHVI
# ============================================================================

def test_wpehvi_uniform_is_scaled_pehvi(model, pareto, problem, rng):
    spec = make_spec(acq.WPEHVI, pareto, beta=10.0)
    points = random_joint(problem, rng, 12)
    pehvi = acq.pehvi_batch(model, points, spec)
    wpehvi = acq.wpehvi_batch(model, points, spec, problem.u_dist)
    # the 4d environment box has unit area
    assert np.allclose(wpehvi, pehvi, rtol=1e-12, atol=0)
    assert np.argmax(wpehvi) == np.argmax(pehvi)


def test_wpehvi_gaussian_ratio_is_density(model, pareto, problem, rng):
    dist = unc.UDistribution.gaussian([2.5, 3.5], [0.1, 0.1], problem.u_dist.lower, problem.u_dist.upper)
    spec = make_spec(acq.WPEHVI, pareto, beta=10.0)
    points = random_joint(problem, rng, 12)
    pehvi = acq.pehvi_batch(model, points, spec)
    wpehvi = acq.wpehvi_batch(model, points, spec, dist)
    density = dist.pdf(points[:, 2:])
    assert (pehvi > 0).any()
    np.testing.assert_allclose(wpehvi, pehvi * density, rtol=1e-12, atol=1e-300)
    # ratios of subnormal values carry no digits
    normal = pehvi > 1e-200
    assert np.allclose(wpehvi[normal] / pehvi[normal], density[normal], rtol=1e-12)


def test_wpehvi_zero_outside_support(model, pareto, problem):
    spec = make_spec(acq.WPEHVI, pareto)
    assert acq.wpehvi(model, [0.5, 1.5], [3.5, 3.5], spec, problem.u_dist) == 0.0


def test_dispatcher_needs_distribution_for_wpehvi(model, pareto):
    with pytest.raises(ValueError):
        acq.acquisition_batch(model, [[0.5, 1.5, 2.5, 3.5]], make_spec(acq.WPEHVI, pareto))


# ============================================================================
# IEHVI
# ============================================================================

def test_iehvi_single_sample_equals_pehvi(model, pareto):
    samples = unc.USampleSet([[2.3, 3.7]])
    spec = make_spec(acq.IEHVI, pareto, samples, beta=10.0)
    assert acq.iehvi(model, [0.4, 1.4], spec) == pytest.approx(
        acq.pehvi(model, [0.4, 1.4], [2.3, 3.7], spec), rel=1e-12, abs=1e-15)


def test_iehvi_equals_loop_over_pehvi(model, pareto, u_samples, rng):
    spec = make_spec(acq.IEHVI, pareto, u_samples, beta=10.0)
    xs = np.column_stack([rng.random(8), 1 + rng.random(8)])
    batch = acq.iehvi_batch(model, xs, spec)
    for x, value in zip(xs, batch):
        loop = np.mean([acq.pehvi(model, x, u, spec) for u in u_samples.samples])
        assert value == pytest.approx(loop, rel=1e-12, abs=1e-12)
    assert np.all(batch >= 0)


def test_iehvi_threads_do_not_change_result(model, pareto, u_samples, rng):
    xs = np.column_stack([rng.random(8), 1 + rng.random(8)])
    single = acq.iehvi_batch(model, xs, make_spec(acq.IEHVI, pareto, u_samples, beta=10.0))
    threaded = acq.iehvi_batch(model, xs, make_spec(acq.IEHVI, pareto, u_samples, beta=10.0, threads=3))
    assert np.array_equal(single, threaded)


def test_iehvi_cache_computes_each_front_once(model, pareto, u_samples, rng):
    spec = make_spec(acq.IEHVI, pareto, u_samples)
    cache = acq.FrontCache(model, spec)
    xs = np.column_stack([rng.random(5), 1 + rng.random(5)])
    acq.iehvi_batch(model, xs, spec, cache)
    acq.iehvi_batch(model, xs, spec, cache)
    assert cache.misses == len(u_samples)
    assert cache.hits == len(u_samples)


def test_iehvi_empty_samples_rejected(model, pareto, u_samples):
    spec = make_spec(acq.IEHVI, pareto, u_samples)
    with pytest.raises(ValueError):
        acq.iehvi_batch(model, [[0.5, 1.5]], spec, u_samples=unc.USampleSet(np.empty((0, 2))))
