import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sampled_cbf import kernels
from sampled_cbf import _pykernels

BACKENDS = kernels.backends()


def brute_force(body, obstacles, shift):
    best, bi, bj = np.inf, -1, -1
    for i in range(body.shape[0]):
        for j in range(obstacles.shape[0]):
            v = body[i] + shift
            sq = 0.0
            for d in range(body.shape[1]):
                diff = v[d] - obstacles[j, d]
                sq = sq + diff * diff
            if sq < best:
                best, bi, bj = sq, i, j
    return best, bi, bj


coords = st.floats(-10, 10, allow_nan=False, width=64)


@st.composite
def clouds(draw, dim=2):
    n = draw(st.integers(1, 12))
    m = draw(st.integers(1, 15))
    body = draw(arrays(np.float64, (n, dim), elements=coords))
    obs = draw(arrays(np.float64, (m, dim), elements=coords))
    shift = draw(arrays(np.float64, (dim,), elements=coords))
    return body, obs, shift


@pytest.mark.parametrize("name", sorted(BACKENDS))
@given(clouds())
@settings(max_examples=200, deadline=None)
def test_min_pair_matches_double_loop(name, data):
    body, obs, shift = data
    assert BACKENDS[name].min_pair(body, obs, shift) == brute_force(body, obs, shift)


@given(clouds(dim=3))
@settings(max_examples=100, deadline=None)
def test_backends_agree_bitwise_in_3d(data):
    body, obs, shift = data
    results = [b.min_pair(body, obs, shift) for b in BACKENDS.values()]
    assert all(r == results[0] for r in results)
    within = [b.pairs_within(body, obs, shift, results[0][0] + 1.0) for b in BACKENDS.values()]
    for other in within[1:]:
        for a, b in zip(within[0], other):
            assert np.array_equal(a, b)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@given(clouds(), st.sampled_from([0.0, 1e-8, 1e-3, 0.5, 5.0]))
@settings(max_examples=200, deadline=None)
def test_culled_scan_equals_full_scan(name, data, tol):
    body, obs, shift = data
    impl = BACKENDS[name]
    best, _, _ = impl.min_pair(body, obs, shift)
    ii, jj, sq = impl.pairs_within(body, obs, shift, best + tol)
    radius = float(np.sqrt(np.max(np.sum(body * body, axis=1))))
    b2, i2, j2, s2 = impl.active_pairs(body, obs, shift, tol, radius, kernels._CULL_SLACK)
    assert b2 == best
    assert np.array_equal(ii, i2) and np.array_equal(jj, j2) and np.array_equal(sq, s2)


def test_ties_resolve_to_lowest_indices():
    body = np.zeros((2, 2))
    obs = np.array([[1.0, 0.0], [-1.0, 0.0]])
    for impl in BACKENDS.values():
        assert impl.min_pair(body, obs, np.zeros(2)) == (1.0, 0, 0)


def test_python_fallback_chunks_preserve_first_minimum(monkeypatch):
    monkeypatch.setattr(_pykernels, "_CHUNK_PAIRS", 4)
    rng = np.random.default_rng(5)
    body = rng.normal(size=(9, 2))
    obs = rng.normal(size=(7, 2))
    obs = np.vstack([obs, obs])  # duplicated minimizers across chunks
    assert _pykernels.min_pair(body, obs, np.zeros(2)) == brute_force(body, obs, np.zeros(2))
    ii, jj, _ = _pykernels.pairs_within(body, obs, np.zeros(2), 1.0)
    order = ii * obs.shape[0] + jj
    assert np.all(np.diff(order) > 0)


def test_nearest_sq_backends_agree():
    rng = np.random.default_rng(2)
    q = rng.normal(size=(50, 2))
    p = rng.normal(size=(40, 2))
    expected = ((q[:, None, :] - p[None, :, :]) ** 2).sum(axis=2).min(axis=1)
    for impl in BACKENDS.values():
        np.testing.assert_allclose(impl.nearest_sq(q, p), expected, rtol=1e-14)


def test_backend_name_is_reported():
    assert kernels.BACKEND in BACKENDS
