"""Selection/estimation metrics and replicated simulation studies.

Each replicate draws one dataset from a :class:`ScenarioConfig`, runs a
method on it and is scored by true positives, false positives, coverage
of the true support and squared error.  Both methods see the same datasets
for a given master seed, so their reports are directly comparable.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .datagen import ScenarioConfig, gen_dataset
from .penalty import PenaltyKind
from .solver import SolverOptions, tune_lambda
from .wcr import run_wcr, tune_aggregation

METHODS = ("pql_wcr", "naive_lasso")


def score_replicate(beta_hat, support_hat, beta_star, support_star):
    """Returns ``(tp, fp, covered, sq_err)`` for one estimate."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if beta_hat.shape != beta_star.shape:
        raise ValueError("estimate and truth have different dimensions")
    sel, truth = set(support_hat), set(support_star)
    tp = len(sel & truth)
    fp = len(sel - truth)
    return tp, fp, truth <= sel, float(np.sum((beta_hat - beta_star) ** 2))


@dataclass
class ReplicateRecord:
    replicate: int
    method: str
    data_seed: int
    fit_seed: int
    beta_hat: list
    support: list
    tp: int
    fp: int
    covered: bool
    sq_err: float
    lam: float
    k_effective: int
    seconds: float = field(default=0.0, compare=False)

    def to_dict(self, timings: bool = False) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("seconds")
        return d


@dataclass
class MetricsReport:
    method: str
    tp_mean: float
    tp_sd: float
    fp_mean: float
    fp_sd: float
    cr: float
    cr_sd: float
    mse_mean: float
    mse_sd: float
    replications: int
    wall_time: float = 0.0
    records: list = field(default_factory=list, repr=False)

    @classmethod
    def from_records(cls, method: str, records: list, wall_time: float = 0.0) -> "MetricsReport":
        if not records:
            raise ValueError("no replicate records")
        tp = np.array([r.tp for r in records], dtype=float)
        fp = np.array([r.fp for r in records], dtype=float)
        cov = np.array([r.covered for r in records], dtype=float)
        se = np.array([r.sq_err for r in records], dtype=float)
        ddof = 1 if len(records) > 1 else 0

        def sd(v):
            return float(np.std(v, ddof=ddof))

        return cls(method, float(tp.mean()), sd(tp), float(fp.mean()), sd(fp), float(cov.mean()), sd(cov),
                   float(se.mean()), sd(se), len(records), wall_time, list(records))


def replicate_seeds(master_seed: int, R: int) -> list:
    """``(data_seed, fit_seed)`` per replicate; independent of the method."""
    out = []
    for child in np.random.SeedSequence(master_seed).spawn(R):
        a, b = child.generate_state(2, dtype=np.uint64)
        out.append((int(a), int(b)))
    return out


def _fit_method(method, dataset, family, K, opts, fit_seed, threads):
    if method == "pql_wcr":
        ens = run_wcr(dataset, family, K=K, opts=opts, master_seed=fit_seed, threads=threads)
        agg = tune_aggregation(ens, dataset, family)
        return agg.beta_hat, agg.support, float(agg.lambda_agg[0]), ens.K_effective
    if method == "naive_lasso":
        # pooled data, working independence, L1 penalty tuned by BIC
        l1 = replace(opts, penalty=PenaltyKind.L1)
        fit = tune_lambda(dataset.full(), family, l1)
        return fit.beta, fit.support, fit.lam, 1
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def run_replicate(config: ScenarioConfig, method: str, replicate: int, seeds, K: int = 100,
                  opts: Optional[SolverOptions] = None, threads: int = 1) -> ReplicateRecord:
    data_seed, fit_seed = seeds
    t0 = time.perf_counter()
    cfg = config.with_seed(data_seed)
    try:
        dataset, beta_star, support_star = gen_dataset(cfg)
        beta_hat, support, lam, k_eff = _fit_method(method, dataset, cfg.family, K,
                                                    opts or SolverOptions(), fit_seed, threads)
    except Exception as exc:
        raise RuntimeError(f"replicate {replicate} ({method}) failed: {exc}") from exc
    tp, fp, covered, sq = score_replicate(beta_hat, support, beta_star, support_star)
    return ReplicateRecord(replicate, method, data_seed, fit_seed, [float(b) for b in beta_hat],
                           [int(d) for d in support], tp, fp, bool(covered), sq, lam, k_eff,
                           time.perf_counter() - t0)


def run_replications(config: ScenarioConfig, method: str, R: int = 20, master_seed: int = 0,
                     K: int = 100, opts: Optional[SolverOptions] = None,
                     threads: int = 1) -> MetricsReport:
    """Run ``R`` replicates of ``method`` and summarize them in replicate order."""
    if R < 1:
        raise ValueError("R must be at least 1")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    seeds = replicate_seeds(master_seed, R)
    t0 = time.perf_counter()

    def task(r):
        # parallelism is across replicates; each replicate runs its resamples serially
        return run_replicate(config, method, r, seeds[r], K, opts)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(task, range(R)))
    else:
        records = [task(r) for r in range(R)]
    return MetricsReport.from_records(method, records, time.perf_counter() - t0)
