import numpy as np
import pytest

from recursive_mixing import analytics as an
from recursive_mixing.config import MixConfig
from recursive_mixing.errors import DimensionMismatch, DomainError, NotPsd
from recursive_mixing.gaussian import (
    GaussianModel,
    run_gaussian_chain,
    run_gaussian_chain_explicit,
    run_gaussian_chains,
    run_general_weight_mean_chains,
    weighted_cov_update,
    weighted_mean_update,
)
from recursive_mixing.linalg_stats import RngStream


def streams(R, seed=0):
    return [RngStream(seed, r) for r in range(R)]


def mean_and_se(x):
    x = np.asarray(x)
    return x.mean(), x.std(ddof=1) / np.sqrt(x.size)


def test_weighted_updates():
    real = np.array([[1.0, 0.0], [3.0, 2.0]])
    synth = np.array([[0.0, 0.0], [0.0, 4.0], [3.0, 2.0]])
    np.testing.assert_allclose(weighted_mean_update(real, synth, 0.25), 0.25 * np.array([2.0, 1.0]) + 0.75 * np.array([1.0, 2.0]))
    a, b = np.eye(2), np.array([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(weighted_cov_update(a, b, 0.5), [[1.5, 0.5], [0.5, 1.5]])
    with pytest.raises(DimensionMismatch):
        weighted_cov_update(np.eye(2), np.eye(3), 0.5)


def test_model_validation():
    with pytest.raises(DimensionMismatch):
        GaussianModel(np.zeros(2), np.eye(3))
    with pytest.raises(NotPsd):
        GaussianModel(np.zeros(2), [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        GaussianModel(np.zeros(2), [[1.0, 0.5], [0.0, 1.0]])
    g = GaussianModel.isotropic(4)
    np.testing.assert_allclose(g.sigma, np.eye(4) / 4)


def test_mix_config_validation():
    with pytest.raises(DomainError):
        MixConfig(1.5, 10, 10)
    with pytest.raises(DomainError):
        MixConfig(0.5, 1, 10)
    assert MixConfig(0.5, 30, 10).k == 3.0


def test_chain_matches_batch_row_and_is_deterministic():
    truth = GaussianModel.isotropic(3)
    cfg = MixConfig(0.4, 12, 9)
    batch = run_gaussian_chains(truth, cfg, 20, streams(5, seed=3))
    single = run_gaussian_chain(truth, cfg, 20, RngStream(3, 2))
    np.testing.assert_array_equal(single.mean_err, batch.mean_err[2])
    np.testing.assert_array_equal(single.cov_err, batch.cov_err[2])
    again = run_gaussian_chains(truth, cfg, 20, streams(5, seed=3))
    np.testing.assert_array_equal(again.cov_err, batch.cov_err)
    assert single.steps == 20


@pytest.mark.parametrize("w,n,m", [(0.618, 20, 20), (0.3, 10, 10), (0.8, 15, 40)])
def test_mean_error_matches_exact_recursion(w, n, m):
    truth = GaussianModel.isotropic(4)
    R = 4000
    batch = run_gaussian_chains(truth, MixConfig(w, n, m), 30, streams(R, seed=11))
    for t in (0, 1, 5, 30):
        mean, se = mean_and_se(batch.mean_err[:, t])
        expect = an.gaussian_mean_error_at(w, n, m, t, 1.0)
        assert abs(mean - expect) < 4 * se, (t, mean, expect, se)


@pytest.mark.parametrize("w,n,m", [(0.618, 20, 20), (0.4, 10, 10), (0.9, 8, 30)])
def test_cov_error_matches_exact_recursion(w, n, m):
    truth = GaussianModel.isotropic(4)
    R = 4000
    batch = run_gaussian_chains(truth, MixConfig(w, n, m), 20, streams(R, seed=5))
    for t in (0, 1, 5, 20):
        mean, se = mean_and_se(batch.cov_err[:, t])
        expect = an.gaussian_cov_error_at(w, n, m, t, 1.0, 0.25)
        assert abs(mean - expect) < 4 * se, (t, mean, expect, se)


def test_sufficient_statistics_agree_with_explicit_samples():
    # two sampling modes of the same law: compare error distributions
    truth = GaussianModel(np.array([1.0, -1.0, 0.5]), np.array([[1.0, 0.3, 0.0], [0.3, 0.5, 0.1], [0.0, 0.1, 0.8]]))
    cfg = MixConfig(0.5, 8, 6)
    R = 3000
    fast = run_gaussian_chains(truth, cfg, 6, streams(R, seed=1))
    slow = run_gaussian_chains(truth, cfg, 6, streams(R, seed=2), exact_samples=True)
    for arr in ("mean_err", "cov_err"):
        a, b = getattr(fast, arr)[:, 6], getattr(slow, arr)[:, 6]
        ma, sa = mean_and_se(a)
        mb, sb = mean_and_se(b)
        assert abs(ma - mb) < 4 * np.hypot(sa, sb)
        assert np.median(a) == pytest.approx(np.median(b), rel=0.1)


def test_explicit_reference_loop():
    truth = GaussianModel.isotropic(2)
    cfg = MixConfig(0.618, 10, 10)
    trajs = [run_gaussian_chain_explicit(truth, cfg, 8, RngStream(9, r)) for r in range(1500)]
    errs = np.array([tr.mean_err[8] for tr in trajs])
    covs = np.array([tr.cov_err[8] for tr in trajs])
    mean, se = mean_and_se(errs)
    assert abs(mean - an.gaussian_mean_error_at(0.618, 10, 10, 8, 1.0)) < 4 * se
    mean, se = mean_and_se(covs)
    assert abs(mean - an.gaussian_cov_error_at(0.618, 10, 10, 8, 1.0, 0.5)) < 4 * se


def test_fully_synthetic_mean_error_grows_linearly():
    n = m = 20
    batch = run_gaussian_chains(GaussianModel.isotropic(4), MixConfig(0.0, n, m), 50, streams(3000, seed=4))
    for t in (10, 50):
        mean, se = mean_and_se(batch.mean_err[:, t])
        assert abs(mean - (1 / n + t / m)) < 4 * se


def test_singular_truth_is_sampled():
    truth = GaussianModel(np.zeros(2), np.array([[1.0, 1.0], [1.0, 1.0]]))
    batch = run_gaussian_chains(truth, MixConfig(0.5, 10, 10), 5, streams(4))
    assert np.all(np.isfinite(batch.cov_err))


def general_weight_limit(a, b, tr):
    n, m = a.size, b.size
    B = b.mean()
    return (a @ a / n ** 2 + b @ b / m ** 2) * tr / (1 - B ** 2)


def test_general_weights_uniform_reduces_to_group_weight():
    n = m = 10
    w = 0.618
    a, b = np.full(n, w), np.full(m, 1 - w)
    assert general_weight_limit(a, b, 1.0) == pytest.approx(an.gaussian_mean_limit(w, 1.0, n, 1.0))
    errs = run_general_weight_mean_chains(GaussianModel.isotropic(4), a, b, 60, streams(600, seed=8))
    mean, se = mean_and_se(errs[:, 30:].mean(axis=1))
    # tail averages are correlated within a chain; the replication SE is still valid
    assert abs(mean - general_weight_limit(a, b, 1.0)) < 4 * se


def test_perturbed_weights_are_worse():
    n = m = 10
    ws = an.optimal_weight(1.0)
    gen = np.random.default_rng(0)
    base = general_weight_limit(np.full(n, ws), np.full(m, 1 - ws), 1.0)
    for _ in range(200):
        a = ws + 0.1 * gen.standard_normal(n)
        b = (1 - ws) + 0.1 * gen.standard_normal(m)
        b += 1 - a.mean() - b.mean()
        if abs(b.mean()) >= 1:
            continue
        assert general_weight_limit(a, b, 1.0) > base
    # and the simulated chains agree on the direction
    a = ws + np.linspace(-0.3, 0.3, n)
    b = np.full(m, 1 - ws)
    pert = run_general_weight_mean_chains(GaussianModel.isotropic(4), a, b, 60, streams(800, seed=1))
    unif = run_general_weight_mean_chains(GaussianModel.isotropic(4), np.full(n, ws), b, 60, streams(800, seed=1))
    assert pert[:, 30:].mean() > unif[:, 30:].mean()


def test_general_weights_reject_bad_totals():
    with pytest.raises(ValueError):
        run_general_weight_mean_chains(GaussianModel.isotropic(2), np.full(3, 0.5), np.full(3, 0.6), 2, streams(1))
