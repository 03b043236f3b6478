import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recursive_mixing.errors import DimensionMismatch, EmptySample, NotPsd, TooFewSamples
from recursive_mixing.linalg_stats import (
    RngStream,
    batch_psd_factor,
    cholesky,
    frob_sq_dist,
    l2_sq_dist,
    psd_factor,
    sample_cov,
    sample_mean,
    sample_mvn,
    trace,
    trace_of_square,
)


def test_cholesky_identity():
    np.testing.assert_array_equal(cholesky(np.eye(2)), np.eye(2))


def test_cholesky_known_factor():
    L = cholesky([[4.0, 2.0], [2.0, 5.0]])
    np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, 2.0]], atol=1e-15)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPsd):
        cholesky([[1.0, 2.0], [2.0, 1.0]])


def test_cholesky_rejects_non_square():
    with pytest.raises(DimensionMismatch):
        cholesky(np.ones((2, 3)))


def test_cholesky_semidefinite_rank_one():
    v = np.array([1.0, 2.0, -1.0])
    a = np.outer(v, v)
    L = cholesky(a)
    np.testing.assert_allclose(L @ L.T, a, atol=1e-12)
    assert np.allclose(np.triu(L, 1), 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_cholesky_reconstructs_random_psd(p, seed):
    gen = np.random.default_rng(seed)
    B = gen.standard_normal((p, p + 2))
    a = B @ B.T
    L = cholesky(a)
    rel = np.linalg.norm(L @ L.T - a) / np.linalg.norm(a)
    assert rel < 1e-9
    # agrees with LAPACK on strictly positive definite input
    np.testing.assert_allclose(L, np.linalg.cholesky(a), rtol=1e-8, atol=1e-10)


def test_psd_factor_clamps_negative_eigenvalue():
    a = np.array([[1.0, 0.0], [0.0, -1e-6]])
    F, clamped = psd_factor(a)
    assert clamped
    np.testing.assert_allclose(F @ F.T, [[1.0, 0.0], [0.0, 0.0]], atol=1e-12)


def test_batch_psd_factor_matches_single():
    gen = np.random.default_rng(3)
    B = gen.standard_normal((5, 3, 3))
    a = B @ np.swapaxes(B, 1, 2)
    a[2] = np.diag([1.0, -0.5, 2.0])
    F, clamped = batch_psd_factor(a)
    assert clamped.tolist() == [False, False, True, False, False]
    for r in (0, 1, 3, 4):
        np.testing.assert_allclose(F[r] @ F[r].T, a[r], atol=1e-12)


def test_sample_mvn_zero_factor_gives_mean():
    out = sample_mvn(np.zeros(2), np.zeros((2, 2)), 3, RngStream(1))
    np.testing.assert_array_equal(out, np.zeros((3, 2)))


def test_sample_mvn_clt_bound():
    xs = sample_mvn([5.0], [[1.0]], 10 ** 5, RngStream(7))
    assert abs(xs.mean() - 5.0) < 3 * 5 / np.sqrt(10 ** 5)


def test_sample_mvn_covariance():
    L = np.array([[1.0, 0.0], [0.5, 0.8]])
    xs = sample_mvn([0.0, 0.0], L, 200_000, RngStream(2))
    np.testing.assert_allclose(np.cov(xs.T), L @ L.T, atol=0.01)


def test_sample_mvn_deterministic():
    a = sample_mvn([1.0, 2.0], np.eye(2), 5, RngStream(11, 4))
    b = sample_mvn([1.0, 2.0], np.eye(2), 5, RngStream(11, 4))
    np.testing.assert_array_equal(a, b)


def test_streams_differ_by_id_and_substream():
    a = RngStream(0, 0).standard_normal(4)
    b = RngStream(0, 1).standard_normal(4)
    assert not np.allclose(a, b)
    s = RngStream(0, 0)
    assert not np.allclose(s.substream(0).random(4), s.substream(1).random(4))
    np.testing.assert_array_equal(s.substream(1).random(4), RngStream(0, 0).substream(1).random(4))


def test_streams_roughly_uncorrelated():
    xs = np.stack([RngStream(5, i).standard_normal(20_000) for i in range(4)])
    corr = np.corrcoef(xs)
    assert np.max(np.abs(corr - np.eye(4))) < 0.04


def test_sample_mean():
    np.testing.assert_array_equal(sample_mean([[1.0, 1.0], [3.0, 3.0]]), [2.0, 2.0])
    with pytest.raises(EmptySample):
        sample_mean(np.empty((0, 2)))


def test_sample_cov_matches_numpy():
    gen = np.random.default_rng(0)
    xs = gen.standard_normal((30, 3))
    np.testing.assert_allclose(sample_cov(xs), np.cov(xs.T), rtol=1e-12)
    with pytest.raises(TooFewSamples):
        sample_cov(xs[:1])


def test_traces_and_distances():
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert trace(a) == 5.0
    assert trace_of_square(a) == pytest.approx(np.trace(a @ a))
    assert frob_sq_dist(a, np.eye(2)) == pytest.approx(1 + 1 + 1 + 4)
    assert l2_sq_dist([1.0, 2.0], [0.0, 0.0]) == 5.0
