import numpy as np
import pytest

from pqlwcr.datagen import (SIZE_DISTRIBUTIONS, ScenarioConfig, default_beta, gen_ar_covariates,
                            gen_cluster_sizes, gen_correlated_binary, gen_dataset, gen_exchangeable_normal,
                            marginal_beta_star)
from pqlwcr.model_core import BINOMIAL, GAUSSIAN


def test_size_distributions_sum_to_one():
    for values, probs in SIZE_DISTRIBUTIONS.values():
        assert len(values) == len(probs)
        assert sum(probs) == pytest.approx(1.0, abs=1e-15)


def test_example1_size_frequencies():
    sizes = gen_cluster_sizes(1, 160000, np.random.default_rng(0))
    assert set(np.unique(sizes)) <= {2, 4, 15}
    assert abs(np.mean(sizes == 2) - 9 / 16) < 0.01
    assert abs(np.mean(sizes == 4) - 3 / 8) < 0.01
    assert abs(np.mean(sizes == 15) - 1 / 16) < 0.01


@pytest.mark.parametrize("example", [2, 4])
def test_binary_designs_size_set(example):
    for seed in range(5):
        assert set(np.unique(gen_cluster_sizes(example, 500, np.random.default_rng(seed)))) <= {4, 6, 10}


def test_sizes_deterministic_and_validated():
    a = gen_cluster_sizes(1, 50, np.random.default_rng(3))
    b = gen_cluster_sizes(1, 50, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        gen_cluster_sizes(5, 10, np.random.default_rng(0))
    with pytest.raises(ValueError):
        gen_cluster_sizes(1, 0, np.random.default_rng(0))


def test_ar_covariates_independent_case():
    X = gen_ar_covariates(100000, 3, 0.0, np.random.default_rng(1))
    C = np.corrcoef(X, rowvar=False)
    assert np.max(np.abs(C - np.eye(3))) < 0.02


def test_ar_covariates_correlation_and_variance():
    X = gen_ar_covariates(100000, 5, 0.4, np.random.default_rng(2))
    C = np.corrcoef(X, rowvar=False)
    assert abs(C[0, 2] - 0.16) < 0.02
    assert abs(C[0, 1] - 0.4) < 0.02
    np.testing.assert_allclose(X.var(axis=0), 1.0, atol=0.02)


def test_ar_covariates_reject_unit_root():
    for bad in (1.0, -1.0, 1.5):
        with pytest.raises(ValueError):
            gen_ar_covariates(10, 3, bad, np.random.default_rng(0))


@pytest.mark.parametrize("rho", [0.0, 0.5, 0.8])
def test_exchangeable_normal_moments(rho):
    rng = np.random.default_rng(4)
    E = np.array([gen_exchangeable_normal(2, rho, rng) for _ in range(100000)])
    assert abs(np.corrcoef(E[:, 0], E[:, 1])[0, 1] - rho) < 0.02
    np.testing.assert_allclose(E.var(axis=0), 1.0, atol=0.02)


def test_exchangeable_normal_rejects_bad_rho():
    for bad in (-0.1, 1.0):
        with pytest.raises(ValueError):
            gen_exchangeable_normal(3, bad, np.random.default_rng(0))


def test_binary_all_ones():
    np.testing.assert_array_equal(gen_correlated_binary([1.0, 1.0, 1.0], 0.5, np.random.default_rng(0)), 1.0)


def test_binary_independent_marginal():
    rng = np.random.default_rng(5)
    Y = np.array([gen_correlated_binary([0.3], 0.0, rng)[0] for _ in range(100000)])
    assert abs(Y.mean() - 0.3) < 0.01


def test_binary_latent_correlation_maps_to_one_third():
    rng = np.random.default_rng(6)
    Y = np.array([gen_correlated_binary([0.5, 0.5], 0.5, rng) for _ in range(100000)])
    assert abs(np.corrcoef(Y[:, 0], Y[:, 1])[0, 1] - 1 / 3) < 0.02
    np.testing.assert_allclose(Y.mean(axis=0), 0.5, atol=0.01)


def test_binary_rejects_bad_probability():
    with pytest.raises(ValueError):
        gen_correlated_binary([0.5, 1.2], 0.5, np.random.default_rng(0))


def test_default_beta():
    np.testing.assert_array_equal(default_beta(1, 6), [2.0, -1.0, 1.5, -2.0, 0.0, 0.0])
    np.testing.assert_array_equal(default_beta(4, 4), [1.0, -0.9, 0.7, 0.0])
    with pytest.raises(ValueError):
        default_beta(1, 3)


def test_config_invariants():
    cfg = ScenarioConfig(example_id=2, p=10)
    assert cfg.family is BINOMIAL and cfg.has_ics and cfg.u_max == 6
    assert cfg.support == (0, 1, 2)
    assert ScenarioConfig(example_id=3).family is GAUSSIAN
    assert not ScenarioConfig(example_id=4).has_ics
    with pytest.raises(ValueError):
        ScenarioConfig(p=5, beta_star=(1.0, 2.0))
    with pytest.raises(ValueError):
        ScenarioConfig(example_id=7)


def test_example3_pooled_ols_recovers_beta():
    ds, beta, support = gen_dataset(ScenarioConfig(example_id=3, n=200, p=50, rho=0.5, seed=17))
    X = ds.X[:, list(support)]
    est = np.linalg.lstsq(X, ds.y, rcond=None)[0]
    assert np.max(np.abs(est - beta[list(support)])) < 0.1


def test_example1_large_clusters_have_zero_mean():
    ds, _, _ = gen_dataset(ScenarioConfig(example_id=1, n=40000, p=10, seed=3))
    big = np.repeat(ds.cluster_sizes == 15, ds.cluster_sizes)
    assert big.sum() > 30000
    # shared errors make the cluster means the independent units
    means = np.add.reduceat(ds.y, ds.offsets[:-1])[ds.cluster_sizes == 15] / 15
    assert abs(means.mean()) < 0.05


def test_example1_within_cluster_correlation():
    rho = 0.8
    ds, beta, _ = gen_dataset(ScenarioConfig(example_id=1, n=40000, p=5, rho=rho, seed=8))
    first = ds.offsets[:-1]
    small = ds.cluster_sizes <= 4
    resid = ds.y - ds.X @ beta * np.repeat(ds.cluster_sizes <= 4, ds.cluster_sizes)
    r = np.corrcoef(resid[first[small]], resid[first[small] + 1])[0, 1]
    assert abs(r - rho) < 0.03


def test_example4_marginal_mean():
    ds, beta, _ = gen_dataset(ScenarioConfig(example_id=4, n=20000, p=10, seed=9))
    assert ds.n_obs >= 100000
    pred = 1.0 / (1.0 + np.exp(-(ds.X @ beta)))
    assert abs(ds.y.mean() - pred.mean()) < 0.01
    assert set(np.unique(ds.y)) <= {0.0, 1.0}


def test_example2_responses_binary_and_switched_off():
    ds, _, _ = gen_dataset(ScenarioConfig(example_id=2, n=500, p=8, seed=1))
    assert set(np.unique(ds.y)) <= {0.0, 1.0}
    big = np.repeat(ds.cluster_sizes == 10, ds.cluster_sizes)
    assert big.any() and np.all(ds.y[big] == 0.0)


def test_gen_dataset_deterministic():
    cfg = ScenarioConfig(example_id=2, n=60, p=12, seed=44)
    a, _, _ = gen_dataset(cfg)
    b, _, _ = gen_dataset(cfg)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.offsets, b.offsets)
    c, _, _ = gen_dataset(cfg.with_seed(45))
    assert not np.array_equal(a.y, c.y) or not np.array_equal(a.offsets, c.offsets)


def test_marginal_beta_star():
    cfg = ScenarioConfig(example_id=1, p=6)
    np.testing.assert_allclose(marginal_beta_star(cfg), np.array(cfg.beta_star) * 15 / 16)
    np.testing.assert_array_equal(marginal_beta_star(ScenarioConfig(example_id=3, p=6)), default_beta(3, 6))
    with pytest.raises(ValueError):
        marginal_beta_star(ScenarioConfig(example_id=2))
