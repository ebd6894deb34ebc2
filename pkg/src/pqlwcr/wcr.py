"""Within-cluster resampling: K tuned penalized fits, then penalized aggregation.

Every resample draws one observation per cluster, uniformly within the
cluster, and fits the SCAD-penalized quasi-likelihood on that view.  The K
estimates are combined by minimizing

    K^{-1} sum_k ||beta_k - b||^2 + sum_d lam_d |b_d|,

which separates by coordinate into a soft-threshold of the componentwise
mean at ``lam_d / 2``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model_core import DatasetView, DomainError, LongitudinalDataset, ModelFamily
from .penalty import soft_threshold
from .solver import DivergenceError, FitResult, SolverOptions, tune_lambda

log = logging.getLogger(__name__)

MAX_DROP_FRACTION = 0.10


@dataclass(frozen=True, eq=False)
class ResampleIndex:
    """0-based within-cluster position chosen in each cluster."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int64)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    def __eq__(self, other):
        return isinstance(other, ResampleIndex) and np.array_equal(self.z, other.z)


@dataclass
class WcrEnsemble:
    fits: list
    resamples: list
    seeds: list
    K: int
    dropped: list = field(default_factory=list)

    @property
    def K_effective(self) -> int:
        return len(self.fits)

    @property
    def coefficients(self) -> np.ndarray:
        """(K_effective, p) matrix of resample estimates."""
        return np.vstack([f.beta for f in self.fits])

    @property
    def componentwise_mean(self) -> np.ndarray:
        return self.coefficients.mean(axis=0)

    @property
    def selection_frequency(self) -> np.ndarray:
        return (self.coefficients != 0.0).mean(axis=0)


@dataclass
class AggregateResult:
    beta_hat: np.ndarray
    support: tuple
    lambda_agg: np.ndarray
    selection_frequency: np.ndarray
    score: float = float("nan")


def draw_resample(cluster_sizes: Sequence[int], rng: np.random.Generator) -> ResampleIndex:
    sizes = np.asarray(cluster_sizes, dtype=np.int64)
    if np.any(sizes < 1):
        raise ValueError("every cluster needs at least one observation")
    return ResampleIndex(rng.integers(0, sizes))


def resample_seeds(master_seed: int, K: int) -> list:
    """Per-resample integer seeds, a pure function of ``(master_seed, K)``."""
    children = np.random.SeedSequence(master_seed).spawn(K)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _one_resample(dataset, family, opts, seed):
    z = draw_resample(dataset.cluster_sizes, np.random.default_rng(seed))
    return z, tune_lambda(DatasetView(dataset, z.z), family, opts)


def run_wcr(dataset: LongitudinalDataset, family: ModelFamily, K: int = 500,
            opts: Optional[SolverOptions] = None, master_seed: int = 0,
            threads: int = 1) -> WcrEnsemble:
    """Draw K resamples and fit each one, tuning lambda by BIC.

    Results are ordered by resample index and do not depend on ``threads``.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    opts = opts or SolverOptions()
    seeds = resample_seeds(master_seed, K)

    def task(seed):
        try:
            return _one_resample(dataset, family, opts, seed)
        except DivergenceError as exc:
            return exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(task, seeds))
    else:
        outcomes = [task(s) for s in seeds]

    fits, resamples, kept_seeds, dropped = [], [], [], []
    for k, (seed, out) in enumerate(zip(seeds, outcomes)):
        if isinstance(out, Exception):
            log.warning("resample %d dropped: %s", k, out)
            dropped.append(k)
            continue
        resamples.append(out[0])
        fits.append(out[1])
        kept_seeds.append(seed)
    if len(dropped) > MAX_DROP_FRACTION * K:
        raise DivergenceError(f"{len(dropped)} of {K} resample fits diverged")
    return WcrEnsemble(fits=fits, resamples=resamples, seeds=kept_seeds, K=K, dropped=dropped)


def _lambda_vector(lambda_agg, p: int) -> np.ndarray:
    lam = np.broadcast_to(np.asarray(lambda_agg, dtype=float), (p,)).copy()
    if np.any(~(lam >= 0)):
        raise DomainError("aggregation penalties must be non-negative")
    return lam


def aggregate(ensemble: WcrEnsemble, lambda_agg=0.0) -> AggregateResult:
    """Closed-form minimizer of the penalized mean regression over resample estimates."""
    mean = ensemble.componentwise_mean
    lam = _lambda_vector(lambda_agg, mean.shape[0])
    beta = soft_threshold(mean, lam / 2.0)
    beta = np.where(beta == 0.0, 0.0, beta)  # no signed zeros
    return AggregateResult(beta_hat=beta, support=selected_set(beta), lambda_agg=lam,
                           selection_frequency=ensemble.selection_frequency)


def aggregation_objective(ensemble: WcrEnsemble, lambda_agg, beta) -> float:
    coefs = ensemble.coefficients
    lam = _lambda_vector(lambda_agg, coefs.shape[1])
    return float(np.mean(np.sum((coefs - beta) ** 2, axis=1)) + lam @ np.abs(beta))


def default_aggregation_grid(n: int, p: int, size: int = 30) -> tuple:
    scale = math.sqrt(math.log(max(p, 2)) / n)
    return tuple(np.geomspace(2.0 * scale, 0.01 * scale, size))


def tune_aggregation(ensemble: WcrEnsemble, dataset: LongitudinalDataset, family: ModelFamily,
                     grid: Optional[Sequence[float]] = None) -> AggregateResult:
    """Pick a uniform aggregation penalty by a BIC-type score over the stored views.

    The score of a candidate is the sum over resample views of
    ``-2 sum Q(y, x'beta_hat) + |support| log(n)``.  Ties go to the larger penalty.
    """
    if grid is None:
        grid = default_aggregation_grid(dataset.n, dataset.p)
    grid = sorted((float(g) for g in grid), reverse=True)
    if not grid:
        raise ValueError("aggregation grid must not be empty")
    # each stored view contributes its chosen rows; count row multiplicities once
    counts = np.zeros(dataset.n_obs)
    starts = dataset.offsets[:-1]
    for r in ensemble.resamples:
        np.add.at(counts, starts + r.z, 1.0)
    used = counts > 0
    X, y, c = dataset.X[used], dataset.y[used], counts[used]
    n_views = len(ensemble.resamples)
    best = None
    for lam in grid:
        res = aggregate(ensemble, lam)
        q = float(c @ family.q(y, X @ res.beta_hat))
        res.score = -2.0 * q + n_views * len(res.support) * math.log(dataset.n)
        if best is None or res.score < best.score:
            best = res
    return best


def selected_set(beta) -> tuple:
    return tuple(int(d) for d in np.flatnonzero(np.asarray(beta) != 0.0))
