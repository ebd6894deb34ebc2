import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from conftest import fake_ensemble, make_dataset, numeric_aggregate_coordinate
from pqlwcr.datagen import ScenarioConfig, gen_dataset
from pqlwcr.model_core import GAUSSIAN, DomainError, LongitudinalDataset
from pqlwcr.solver import SolverOptions, tune_lambda
from pqlwcr.wcr import (aggregate, aggregation_objective, default_aggregation_grid, draw_resample,
                        resample_seeds, run_wcr, selected_set, tune_aggregation)


# --- draw_resample ---------------------------------------------------------

def test_singletons_always_zero():
    rng = np.random.default_rng(0)
    for _ in range(20):
        np.testing.assert_array_equal(draw_resample([1, 1, 1], rng).z, [0, 0, 0])


def test_draw_is_deterministic():
    a = draw_resample([2, 3], np.random.default_rng(42))
    b = draw_resample([2, 3], np.random.default_rng(42))
    assert a == b
    assert np.all(a.z < [2, 3])


def test_draw_uniform_chi_square():
    rng = np.random.default_rng(2024)
    draws = np.array([draw_resample([4], rng).z[0] for _ in range(40000)])
    counts = np.bincount(draws, minlength=4)
    stat = np.sum((counts - 10000.0) ** 2 / 10000.0)
    assert stat < chi2.ppf(0.999, 3)


def test_draw_rejects_empty_cluster():
    with pytest.raises(ValueError):
        draw_resample([2, 0], np.random.default_rng(0))


def test_resample_seeds_deterministic_and_distinct():
    assert resample_seeds(7, 5) == resample_seeds(7, 5)
    assert resample_seeds(7, 5) != resample_seeds(8, 5)
    assert len(set(resample_seeds(7, 100))) == 100


# --- run_wcr ---------------------------------------------------------------

def test_singleton_clusters_give_identical_fits():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 3))
    ds = LongitudinalDataset(X @ [1.0, 0.0, -1.0] + rng.standard_normal(30), X, np.arange(31))
    ens = run_wcr(ds, GAUSSIAN, K=3, master_seed=5)
    assert ens.K_effective == 3
    for f in ens.fits[1:]:
        np.testing.assert_array_equal(f.beta, ens.fits[0].beta)
        assert f.lam == ens.fits[0].lam


def test_k1_unshrunk_aggregate_equals_single_fit():
    ds = make_dataset(np.random.default_rng(2), n=40, p=5, beta=np.array([1.0, -1.0, 0, 0, 0]))
    ens = run_wcr(ds, GAUSSIAN, K=1, master_seed=9)
    agg = aggregate(ens, 0.0)
    np.testing.assert_array_equal(agg.beta_hat, ens.fits[0].beta)
    refit = tune_lambda(ds.resampled(ens.resamples[0].z), GAUSSIAN)
    np.testing.assert_array_equal(refit.beta, ens.fits[0].beta)


def test_thread_count_does_not_change_results():
    ds = make_dataset(np.random.default_rng(3), n=50, p=6, beta=np.array([1.5, 0, -1, 0, 0, 0]))
    opts = SolverOptions(n_lambda=15)
    a = run_wcr(ds, GAUSSIAN, K=8, opts=opts, master_seed=11, threads=1)
    b = run_wcr(ds, GAUSSIAN, K=8, opts=opts, master_seed=11, threads=3)
    assert a.seeds == b.seeds
    assert a.resamples == b.resamples
    assert a.coefficients.tobytes() == b.coefficients.tobytes()


def test_componentwise_mean_recomputable():
    ds = make_dataset(np.random.default_rng(4), n=40, p=4, beta=np.array([1.0, 0, 0, 0.5]))
    ens = run_wcr(ds, GAUSSIAN, K=5, opts=SolverOptions(n_lambda=10), master_seed=1)
    manual = sum(f.beta for f in ens.fits) / len(ens.fits)
    assert np.max(np.abs(ens.componentwise_mean - manual)) < 1e-12


def test_k_must_be_positive():
    ds = make_dataset(np.random.default_rng(0))
    with pytest.raises(ValueError):
        run_wcr(ds, GAUSSIAN, K=0)


@pytest.mark.slow
def test_example1_componentwise_mean_separates_signal():
    hits = 0
    runs = 20
    for seed in range(runs):
        ds, beta, _ = gen_dataset(ScenarioConfig(example_id=1, seed=1000 + seed))
        m = run_wcr(ds, GAUSSIAN, K=100, master_seed=seed).componentwise_mean
        hits += bool(np.all(np.abs(m[:4]) > 0.5) and np.all(np.abs(m[4:]) < 0.15))
    assert hits >= math.ceil(0.95 * runs)


# --- aggregate -------------------------------------------------------------

def test_aggregate_constant_ensemble():
    c = np.array([0.3, -2.0, 0.0, 1.0])
    agg = aggregate(fake_ensemble(np.tile(c, (6, 1))), 0.0)
    np.testing.assert_array_equal(agg.beta_hat, c)
    assert agg.support == (0, 1, 3)


def test_aggregate_examples():
    ens = fake_ensemble([[0.5, 0.3], [1.5, 0.3]])
    agg = aggregate(ens, 1.0)
    assert agg.beta_hat[0] == pytest.approx(0.5)
    assert agg.beta_hat[1] == 0.0
    assert agg.support == (0,)


def test_aggregate_negative_lambda():
    with pytest.raises(DomainError):
        aggregate(fake_ensemble([[1.0, 2.0]]), [0.1, -0.1])


def test_aggregate_no_signed_zero():
    agg = aggregate(fake_ensemble([[-0.1]]), 1.0)
    assert math.copysign(1.0, agg.beta_hat[0]) == 1.0


def test_selection_frequency():
    ens = fake_ensemble([[1.0, 0.0, 0.0], [2.0, 0.5, 0.0], [0.0, 0.1, 0.0], [1.0, 0.0, 0.0]])
    np.testing.assert_allclose(ens.selection_frequency, [0.75, 0.5, 0.0])


@pytest.mark.parametrize("seed", range(25))
def test_aggregate_matches_numeric_minimizer(seed):
    rng = np.random.default_rng(seed)
    K, p = int(rng.integers(1, 30)), int(rng.integers(1, 8))
    coefs = rng.standard_normal((K, p)) * rng.uniform(0.1, 3)
    lam = rng.uniform(0, 3, p)
    agg = aggregate(fake_ensemble(coefs), lam)
    for d in range(p):
        assert abs(numeric_aggregate_coordinate(coefs[:, d], lam[d]) - agg.beta_hat[d]) < 1e-8


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**31), lam=st.floats(0, 5))
def test_objective_no_worse_than_mean_or_zero(seed, lam):
    rng = np.random.default_rng(seed)
    coefs = rng.standard_normal((int(rng.integers(1, 12)), 4))
    ens = fake_ensemble(coefs)
    agg = aggregate(ens, lam)
    at_hat = aggregation_objective(ens, lam, agg.beta_hat)
    assert at_hat <= aggregation_objective(ens, lam, ens.componentwise_mean) + 1e-12
    assert at_hat <= aggregation_objective(ens, lam, np.zeros(4)) + 1e-12


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**31), l1=st.floats(0, 4), l2=st.floats(0, 4))
def test_monotone_in_lambda(seed, l1, l2):
    rng = np.random.default_rng(seed)
    ens = fake_ensemble(rng.standard_normal((5, 3)))
    small, big = sorted((l1, l2))
    assert np.all(np.abs(aggregate(ens, big).beta_hat) <= np.abs(aggregate(ens, small).beta_hat))


def test_everything_in_dead_zone():
    ens = fake_ensemble([[0.4, -1.0, 0.2], [0.6, -0.6, 0.0]])
    m = ens.componentwise_mean
    assert aggregate(ens, 2 * np.max(np.abs(m)) + 1e-9).support == ()


# --- tune_aggregation ------------------------------------------------------

def _ensemble_on(ds, coefs):
    ens = fake_ensemble(coefs)
    rng = np.random.default_rng(0)
    ens.resamples = [draw_resample(ds.cluster_sizes, rng) for _ in range(len(ens.fits))]
    return ens


def test_tune_grid_zero_returns_mean():
    ds = make_dataset(np.random.default_rng(6), n=30, p=4)
    coefs = np.array([[1.0, 0.0, 0.5, 0.0], [3.0, 0.0, -0.5, 0.0]])
    res = tune_aggregation(_ensemble_on(ds, coefs), ds, GAUSSIAN, grid=[0.0])
    np.testing.assert_array_equal(res.beta_hat, [2.0, 0.0, 0.0, 0.0])
    assert res.support == (0,)


def test_tune_recovers_exact_means():
    beta = np.zeros(10)
    beta[:4] = [2.0, -1.0, 1.5, -2.0]
    rng = np.random.default_rng(7)
    sizes = rng.integers(1, 4, 200)
    X = rng.standard_normal((sizes.sum(), 10))
    ds = LongitudinalDataset(X @ beta + 0.5 * rng.standard_normal(sizes.sum()), X,
                             np.concatenate([[0], np.cumsum(sizes)]))
    ens = _ensemble_on(ds, np.tile(beta, (10, 1)))
    for grid in ([0.5], [0.01, 1.9], default_aggregation_grid(ds.n, ds.p)):
        assert tune_aggregation(ens, ds, GAUSSIAN, grid).support == (0, 1, 2, 3)


def test_tune_ties_go_to_larger_lambda():
    ds = make_dataset(np.random.default_rng(8), n=10, p=2)
    ens = _ensemble_on(ds, [[0.0, 0.0]])
    res = tune_aggregation(ens, ds, GAUSSIAN, grid=[0.1, 0.5, 0.2])
    assert res.lambda_agg[0] == 0.5


def test_tune_empty_grid():
    ds = make_dataset(np.random.default_rng(8), n=10, p=2)
    with pytest.raises(ValueError):
        tune_aggregation(_ensemble_on(ds, [[0.0, 0.0]]), ds, GAUSSIAN, grid=[])


def test_default_grid_span():
    g = default_aggregation_grid(200, 50)
    s = math.sqrt(math.log(50) / 200)
    assert len(g) == 30
    assert g[0] == pytest.approx(2 * s) and g[-1] == pytest.approx(0.01 * s)


# --- selected_set ----------------------------------------------------------

def test_selected_set_examples():
    assert selected_set([0.0, 0.0, 0.0]) == ()
    assert selected_set([1.5, 0.0, -0.2]) == (0, 2)
