"""Command-line interface: ``pqlwcr simulate | fit | describe``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .datagen import ScenarioConfig
from .io import (SCHEMA_VERSION, ConfigError, CsvFormatError, estimates_csv, read_config, read_dataset,
                 records_jsonl, summary_csv, summary_table)
from .metrics import run_replications
from .model_core import Family, LongitudinalDataset, ModelFamily
from .solver import SolverOptions
from .wcr import aggregate, default_aggregation_grid, run_wcr, tune_aggregation

log = logging.getLogger("pqlwcr")


def _write(path: Path, text: str, outputs: list) -> None:
    path.write_text(text)
    outputs.append(path.name)


def _manifest(path: Path, command: str, config: dict, seed: int, t0: float, outputs: list, **extra) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "master_seed": seed,
        "software_version": __version__,
        "backend": BACKEND,
        "wall_time_seconds": time.perf_counter() - t0,
        "outputs": sorted(outputs),
        **extra,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = read_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    opts = SolverOptions(n_lambda=cfg.n_lambda)
    rows, records_text, timings = [], [], {}
    for ex in cfg.examples:
        for p in cfg.ps:
            for rho in cfg.rhos:
                scen = ScenarioConfig(example_id=ex, n=cfg.n, p=p, rho=rho, rho_x=cfg.rho_x)
                for method in cfg.methods:
                    log.info("example %d p=%d rho=%g %s", ex, p, rho, method)
                    rep = run_replications(scen, method, R=cfg.replications, master_seed=cfg.master_seed,
                                           K=cfg.k, opts=opts, threads=args.threads)
                    rows.append((ex, cfg.n, p, rho, cfg.k, rep))
                    ctx = {"example": ex, "n": cfg.n, "p": p, "rho": rho, "k": cfg.k}
                    records_text.append(records_jsonl(rep.records, ctx))
                    timings[f"{ex}/{p}/{rho:g}/{method}"] = [r.seconds for r in rep.records]
    outputs: list = []
    _write(out / "summary.csv", summary_csv(rows), outputs)
    _write(out / "summary.txt", summary_table(rows), outputs)
    _write(out / "records.jsonl", "".join(records_text), outputs)
    sys.stdout.write(summary_table(rows))
    _manifest(out / "manifest.json", "simulate", cfg.snapshot(), cfg.master_seed, t0, outputs,
              replicate_seconds=timings, threads=args.threads)
    return 0


def _parse_grid(text):
    if text is None:
        return None
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty lambda grid")
    return tuple(sorted(vals, reverse=True))


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    family = ModelFamily.from_name(args.family)
    ds = read_dataset(args.data)
    if family.kind is Family.BINOMIAL and not np.all((ds.y == 0) | (ds.y == 1)):
        bad = int(np.flatnonzero((ds.y != 0) & (ds.y != 1))[0])
        raise ValueError(f"binomial responses must be 0 or 1 (first offending value {ds.y[bad]!r})")
    col_scale = np.ones(ds.p)
    if args.standardize:
        sd = ds.X.std(axis=0)
        col_scale = np.where(sd > 0, sd, 1.0)
        ds = LongitudinalDataset(ds.y, ds.X / col_scale, ds.offsets, ds.names, ds.cluster_ids, ds.unpenalized)
    if args.intercept:
        ds = ds.with_intercept()
        col_scale = np.concatenate([[1.0], col_scale])
    opts = SolverOptions(n_lambda=args.n_lambda, lambda_grid=_parse_grid(args.lambda_grid))
    ens = run_wcr(ds, family, K=args.k, opts=opts, master_seed=args.seed, threads=args.threads)
    if args.agg_lambda is not None:
        agg = aggregate(ens, args.agg_lambda)
    else:
        grid = _parse_grid(args.agg_grid) or default_aggregation_grid(ds.n, ds.p, args.agg_grid_size)
        agg = tune_aggregation(ens, ds, family, grid)
    beta = agg.beta_hat / col_scale
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list = []
    _write(out / "estimates.csv", estimates_csv(ds.names, beta, agg.selection_frequency), outputs)
    selected = [ds.names[d] for d in agg.support]
    _write(out / "selected.txt",
           f"# pqlwcr-selected schema_version={SCHEMA_VERSION}\n" + "".join(s + "\n" for s in selected),
           outputs)
    print("selected: " + (", ".join(selected) if selected else "(none)"))
    config = {"data": str(args.data), "family": args.family, "k": args.k, "n_lambda": args.n_lambda,
              "lambda_grid": args.lambda_grid, "agg_lambda": args.agg_lambda, "agg_grid": args.agg_grid,
              "agg_grid_size": args.agg_grid_size, "intercept": args.intercept,
              "standardize": args.standardize}
    _manifest(out / "manifest.json", "fit", config, args.seed, t0, outputs,
              k_effective=ens.K_effective, dropped=ens.dropped, threads=args.threads,
              aggregation_lambda=float(agg.lambda_agg[0]) if agg.lambda_agg.size else 0.0)
    return 0


def ics_screen(ds: LongitudinalDataset, rng: np.random.Generator, n_boot: int = 1000):
    """Correlation of cluster size with cluster-mean response and a percentile bootstrap interval.

    Returns ``None`` when the correlation is undefined (fewer than three
    clusters or constant cluster sizes).
    """
    sizes = ds.cluster_sizes.astype(float)
    means = np.add.reduceat(ds.y, ds.offsets[:-1]) / sizes
    if ds.n < 3 or np.all(sizes == sizes[0]) or np.all(means == means[0]):
        return None
    r = float(np.corrcoef(sizes, means)[0, 1])
    boots = []
    for _ in range(n_boot):
        idx = rng.integers(0, ds.n, ds.n)
        s, m = sizes[idx], means[idx]
        if np.std(s) > 0 and np.std(m) > 0:
            boots.append(np.corrcoef(s, m)[0, 1])
    lo, hi = np.quantile(boots, [0.025, 0.975])
    return r, float(lo), float(hi)


def cmd_describe(args) -> int:
    ds = read_dataset(args.data)
    sizes = ds.cluster_sizes
    print(f"clusters (n): {ds.n}")
    print(f"covariates (p): {ds.p}")
    print(f"observations: {ds.n_obs}")
    print("cluster-size histogram:")
    vals, counts = np.unique(sizes, return_counts=True)
    for v, c in zip(vals, counts):
        print(f"  {int(v):>5d}: {int(c):>7d}  ({c / ds.n:.4f})")
    res = ics_screen(ds, np.random.default_rng(args.seed), args.bootstrap)
    if res is None:
        print("ICS screen: suppressed (needs at least 3 clusters with varying sizes and responses)")
    else:
        r, lo, hi = res
        flag = "interval excludes 0; cluster size may be informative" if lo > 0 or hi < 0 else "interval covers 0"
        print(f"ICS screen: corr(cluster size, cluster mean response) = {r:.4f}, "
              f"95% bootstrap interval [{lo:.4f}, {hi:.4f}] ({flag}; advisory only)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqlwcr", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run replicated simulation studies from a config file")
    p.add_argument("config")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=None, help="overrides master_seed in the config")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit PQL with within-cluster resampling to a CSV file")
    p.add_argument("data")
    p.add_argument("--family", choices=["gaussian", "binomial"], default="gaussian")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--k", type=int, default=500, help="number of within-cluster resamples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--n-lambda", type=int, default=50)
    p.add_argument("--lambda-grid", default=None, help="comma-separated SCAD lambdas (overrides --n-lambda)")
    p.add_argument("--agg-lambda", type=float, default=None, help="fixed aggregation penalty (skips tuning)")
    p.add_argument("--agg-grid", default=None, help="comma-separated aggregation penalties")
    p.add_argument("--agg-grid-size", type=int, default=30)
    p.add_argument("--intercept", action="store_true", help="add an unpenalized intercept")
    p.add_argument("--standardize", action="store_true", help="scale covariates to unit sd, report original scale")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("describe", help="summarize a CSV file and screen for informative cluster size")
    p.add_argument("data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bootstrap", type=int, default=1000)
    p.set_defaults(func=cmd_describe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, CsvFormatError, ValueError, OSError, RuntimeError) as exc:
        print(f"pqlwcr {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
