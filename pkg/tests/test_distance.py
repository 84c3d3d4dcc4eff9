import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sampled_cbf.distance import (
    DEFAULT_ACTIVATION_TOLERANCE,
    ObstacleIndex,
    certify_epsilon,
    evaluate_distance,
    exact_clearance,
    resampled_distance,
    sampled_min_squared,
    sampling_gap,
)
from sampled_cbf.errors import DimensionMismatch, EmptySampleSet, UnsupportedShape
from sampled_cbf.geometry import (
    Disc,
    Obstacle,
    Rectangle,
    RobotBody,
    SampledShape,
    UnionOfDiscs,
    certify_rho,
    merge_samples,
    sample_boundary_grid,
)

POINT_BODY = RobotBody(SampledShape([[0.0, 0.0]]))


def double_loop(body, obstacles):
    best = math.inf
    for e in body:
        for o in obstacles:
            best = min(best, float(((e - o) ** 2).sum()))
    return best


def test_min_squared_examples():
    sq, pair = sampled_min_squared([[0.0, 0.0]], [[1.0, 0.0], [0.0, 2.0]])
    assert sq == 1.0 and pair.o.tolist() == [1.0, 0.0]
    sq, pair = sampled_min_squared([[0.0, 0.0]], [[1.0, 0.0], [-1.0, 0.0]])
    assert sq == 1.0 and pair.o.tolist() == [1.0, 0.0]


def test_min_squared_seed3_matches_double_loop():
    rng = np.random.default_rng(3)
    body, obs = rng.normal(size=(20, 2)), rng.normal(size=(50, 2))
    assert sampled_min_squared(body, obs)[0] == double_loop(body, obs)


def test_min_squared_errors():
    with pytest.raises(EmptySampleSet):
        sampled_min_squared(np.empty((0, 2)), [[1.0, 0.0]])
    with pytest.raises(DimensionMismatch):
        sampled_min_squared([[0.0, 0.0]], [[1.0, 0.0, 0.0]])


def test_evaluate_examples():
    ev = evaluate_distance([0, 0, 0], POINT_BODY, SampledShape([[1.0, 0.0]]), 0.0)
    assert ev.min_squared == 1.0
    np.testing.assert_array_equal(ev.gradients, [[-2.0, 0.0, 0.0]])
    ev = evaluate_distance([0, 0, 0], POINT_BODY, SampledShape([[1.0, 0.0], [-1.0, 0.0]]), 0.0)
    np.testing.assert_array_equal(ev.gradients, [[-2.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    # the gap is decided by the explicit squared distances, not by eye
    for far in (1.0004, 1.0004999, 1.0005):
        ev = evaluate_distance([0, 0, 0], POINT_BODY, SampledShape([[1.0, 0.0], [far, 0.0]]), 1e-3)
        gap = far * far - 1.0
        assert ev.active_count == (2 if gap <= 1e-3 else 1)
    # 1.0004999^2 - 1 = 1.00005e-3 lies just past the tolerance
    assert 1.0004999**2 - 1.0 > 1e-3
    ev = evaluate_distance([0, 0, 0], POINT_BODY, SampledShape([[1.0, 0.0], [1.0004, 0.0]]), 1e-3)
    assert ev.active_count == 2
    assert ev.active[1].squared_distance - ev.min_squared == pytest.approx(1.0004**2 - 1.0)


def test_default_tolerance_and_domain_errors():
    assert DEFAULT_ACTIVATION_TOLERANCE == 1e-8
    with pytest.raises(ValueError):
        evaluate_distance([0, 0, 0], POINT_BODY, SampledShape([[1.0, 0.0]]), -1.0)


def random_world(seed):
    rng = np.random.default_rng(seed)
    body = RobotBody(SampledShape(rng.normal(scale=0.3, size=(rng.integers(1, 30), 2))))
    obstacles = SampledShape(rng.uniform(-5, 5, size=(rng.integers(1, 200), 2)))
    x = np.append(rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
    return body, obstacles, x


@given(st.integers(0, 10_000), st.sampled_from([0.0, 1e-8, 1e-4, 1e-2, 0.3]))
@settings(max_examples=150, deadline=None)
def test_active_pairs_invariants(seed, tol):
    body, obstacles, x = random_world(seed)
    ev = evaluate_distance(x, body, obstacles, tol)
    pts = body.offset_set.points + x[:2]
    all_sq = ((pts[:, None, :] - obstacles.points[None, :, :]) ** 2).sum(axis=2)
    assert ev.min_squared == pytest.approx(all_sq.min(), rel=1e-14, abs=1e-300)
    assert ev.active_count >= 1 and len(ev.active) == ev.active_count
    for pair, grad in zip(ev.active, ev.gradients):
        direct = float(((x[:2] + pair.e - pair.o) ** 2).sum())
        assert abs(pair.squared_distance - direct) <= 1e-12 * max(1.0, direct)
        assert pair.squared_distance <= ev.min_squared + tol
        np.testing.assert_array_equal(grad[:2], 2.0 * ((pair.e + x[:2]) - pair.o))
        assert grad[2] == 0.0
    expected = int((all_sq <= ev.min_squared + tol).sum())
    assert ev.active_count == expected


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_active_set_monotone_in_tolerance(seed):
    body, obstacles, x = random_world(seed)
    counts = [evaluate_distance(x, body, obstacles, tol).active_count for tol in (0.0, 1e-6, 1e-3, 0.1, 1.0)]
    assert counts == sorted(counts)


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_index_and_exhaustive_paths_bit_identical(seed):
    body, obstacles, x = random_world(seed)
    index = ObstacleIndex(obstacles)
    results = [
        evaluate_distance(x, body, obstacles, 1e-3),
        evaluate_distance(x, body, obstacles, 1e-3, exhaustive=True),
        evaluate_distance(x, body, obstacles, 1e-3, index=index),
    ]
    for other in results[1:]:
        assert other.min_squared == results[0].min_squared
        np.testing.assert_array_equal(other.body_index, results[0].body_index)
        np.testing.assert_array_equal(other.obstacle_index, results[0].obstacle_index)
        np.testing.assert_array_equal(other.gradients, results[0].gradients)


def test_gradients_match_central_differences():
    rng = np.random.default_rng(11)
    for _ in range(200):
        body, obstacles, x = random_world(int(rng.integers(1 << 30)))
        ev = evaluate_distance(x, body, obstacles, 1e-2)
        h = 1e-6
        for pair, grad in zip(ev.active, ev.gradients):
            fd = np.zeros(3)
            for k in range(3):
                step = np.zeros(3)
                step[k] = h
                fp = float(((x[:2] + step[:2] + pair.e - pair.o) ** 2).sum())
                fm = float(((x[:2] - step[:2] + pair.e - pair.o) ** 2).sum())
                fd[k] = (fp - fm) / (2 * h)
            scale = max(np.linalg.norm(grad), 1e-3)
            assert np.linalg.norm(fd - grad) <= 1e-5 * scale


# oracles ------------------------------------------------------------------------


def disc_world(n=60):
    body_shape = Disc((0, 0), 0.25)
    body = RobotBody(certify_rho(sample_boundary_grid(body_shape, n), body_shape))
    specs = [Obstacle(Rectangle((0, 0), (10, 8)), enclosing=True), Obstacle(Disc((5, 4), 1.0)), Obstacle(Rectangle((1, 1), (2, 3)))]
    clouds = [certify_rho(sample_boundary_grid(s.shape, n), s.shape) for s in specs]
    return body, body_shape, merge_samples(clouds), specs


def test_exact_clearance_matches_dense_resampling():
    body, body_shape, obstacles, specs = disc_world()
    rng = np.random.default_rng(4)
    pos = rng.uniform([0.5, 0.5], [9.5, 7.5], size=(200, 2))
    exact = exact_clearance(pos, body_shape, specs)
    dense = resampled_distance(pos, body_shape, specs, 60, 60, factor=20)
    free = exact > 0.05
    # dense samples can only overshoot the continuous distance
    assert np.all(dense[free] >= exact[free] - 1e-9)
    assert np.max(dense[free] - exact[free]) < 0.02


def test_exact_clearance_needs_disc_body():
    with pytest.raises(UnsupportedShape):
        exact_clearance([[0.0, 0.0]], Rectangle((0, 0), (1, 1)), [Obstacle(Disc((3, 3), 1))])


def test_sampling_never_undershoots_true_distance():
    body, body_shape, obstacles, specs = disc_world()
    rng = np.random.default_rng(5)
    pos = rng.uniform([0.5, 0.5], [9.5, 7.5], size=(1000, 2))
    gap = sampling_gap(pos, body, obstacles, body_shape, specs)
    assert np.all(gap >= -1e-12)


def test_certificate_covers_fresh_states_near_boundary():
    body, body_shape, obstacles, specs = disc_world(50)
    gamma = 0.05
    cert = certify_epsilon(body, body_shape, obstacles, specs, gamma, n_probes=5000, seed=0, bounds=([0, 0], [10, 8]))
    assert cert.net_bound == 2 * max(body.offset_set.rho, obstacles.rho)
    assert cert.epsilon >= cert.net_bound and cert.epsilon >= 1.1 * cert.measured_gap
    assert cert.n_probes == 5000 and cert.band == pytest.approx(math.sqrt(gamma))
    rng = np.random.default_rng(99)
    cand = rng.uniform([0, 0], [10, 8], size=(200_000, 2))
    c = exact_clearance(cand, body_shape, specs)
    fresh = cand[(c > 0) & (c <= math.sqrt(gamma))][:1000]
    assert np.max(sampling_gap(fresh, body, obstacles, body_shape, specs)) <= cert.epsilon


def test_union_obstacle_clearance():
    union = UnionOfDiscs((Disc((0, 0), 1.0), Disc((1.5, 0), 1.0)))
    got = exact_clearance([[0.75, 3.0]], Disc((0, 0), 0.5), [Obstacle(union)])
    expected = math.hypot(0.75, 3.0) - 1.0 - 0.5
    assert got[0] == pytest.approx(expected)
