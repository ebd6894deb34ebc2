"""Reading and writing the package's file formats.

Input CSV: header ``cluster,y,<covariate names...>``; rows in any order,
cluster ids are arbitrary strings and are grouped in order of first
appearance.  Output files carry a leading ``# <kind> schema_version=N``
comment line.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model_core import LongitudinalDataset

SCHEMA_VERSION = 1


class CsvFormatError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def _parse_float(text: str, lineno: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise CsvFormatError(f"line {lineno}: column {column!r}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise CsvFormatError(f"line {lineno}: column {column!r}: value must be finite, got {text!r}")
    return v


def read_dataset(path) -> LongitudinalDataset:
    with open(path, newline="") as fh:
        return parse_dataset(fh)


def parse_dataset(fh) -> LongitudinalDataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError("line 1: empty file") from None
    header = [h.strip() for h in header]
    if len(header) < 3 or header[0] != "cluster" or header[1] != "y":
        raise CsvFormatError("line 1: header must be 'cluster,y,x1,...,xp' with at least one covariate")
    names = tuple(header[2:])
    if len(set(names)) != len(names):
        raise CsvFormatError("line 1: duplicate covariate names")
    groups: dict = {}
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        cid = row[0].strip()
        if not cid:
            raise CsvFormatError(f"line {lineno}: empty cluster id")
        vals = [_parse_float(t.strip(), lineno, header[j + 1]) for j, t in enumerate(row[1:])]
        groups.setdefault(cid, []).append(vals)
    if not groups:
        raise CsvFormatError("no data rows")
    ids = tuple(groups)
    blocks = [np.asarray(groups[c]) for c in ids]
    data = np.vstack(blocks)
    offsets = np.concatenate([[0], np.cumsum([b.shape[0] for b in blocks])])
    return LongitudinalDataset(data[:, 0], data[:, 1:], offsets, names=names, cluster_ids=ids)


def write_dataset(dataset: LongitudinalDataset, path) -> None:
    ids = dataset.cluster_ids or tuple(str(i + 1) for i in range(dataset.n))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "y", *dataset.names])
        for i in range(dataset.n):
            for r in range(dataset.offsets[i], dataset.offsets[i + 1]):
                w.writerow([ids[i], repr(float(dataset.y[r])), *(repr(float(v)) for v in dataset.X[r])])


# --- simulation config -------------------------------------------------------

@dataclass
class SimulationConfig:
    examples: list = field(default_factory=lambda: [1])
    n: int = 200
    ps: list = field(default_factory=lambda: [50])
    rhos: list = field(default_factory=lambda: [0.5])
    rho_x: float = 0.4
    methods: list = field(default_factory=lambda: ["pql_wcr", "naive_lasso"])
    replications: int = 20
    k: int = 100
    master_seed: int = 0
    n_lambda: int = 50
    agg_grid_size: int = 30

    def snapshot(self) -> dict:
        return {
            "example": self.examples, "n": self.n, "p": self.ps, "rho": self.rhos,
            "rho_x": self.rho_x, "methods": self.methods, "replications": self.replications,
            "k": self.k, "master_seed": self.master_seed, "n_lambda": self.n_lambda,
            "agg_grid_size": self.agg_grid_size,
        }


def _ints(v):
    return [int(x) for x in v.split(",") if x.strip()]


def _floats(v):
    return [float(x) for x in v.split(",") if x.strip()]


_CONFIG_KEYS = {
    "example": ("examples", _ints),
    "n": ("n", int),
    "p": ("ps", _ints),
    "rho": ("rhos", _floats),
    "rho_x": ("rho_x", float),
    "methods": ("methods", lambda v: [m.strip() for m in v.split(",") if m.strip()]),
    "replications": ("replications", int),
    "k": ("k", int),
    "master_seed": ("master_seed", int),
    "n_lambda": ("n_lambda", int),
    "agg_grid_size": ("agg_grid_size", int),
}


def parse_config(text: str) -> SimulationConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment; lists are comma separated."""
    cfg = SimulationConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        attr, conv = _CONFIG_KEYS[key]
        try:
            setattr(cfg, attr, conv(value))
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for key {key!r}: {value!r}") from None
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: SimulationConfig) -> None:
    from .metrics import METHODS

    def bad(key, why):
        raise ConfigError(f"key {key!r}: {why}")

    if not cfg.examples or any(e not in (1, 2, 3, 4) for e in cfg.examples):
        bad("example", "values must be in 1..4")
    if cfg.n < 1:
        bad("n", "must be at least 1")
    if not cfg.ps or any(p < 4 for p in cfg.ps):
        bad("p", "values must be at least 4")
    if not cfg.rhos or any(not 0 <= r < 1 for r in cfg.rhos):
        bad("rho", "values must lie in [0, 1)")
    if not abs(cfg.rho_x) < 1:
        bad("rho_x", "must satisfy |rho_x| < 1")
    if not cfg.methods or any(m not in METHODS for m in cfg.methods):
        bad("methods", f"values must be among {', '.join(METHODS)}")
    if cfg.replications < 1:
        bad("replications", "must be at least 1")
    if cfg.k < 1:
        bad("k", "must be at least 1")
    if cfg.n_lambda < 1:
        bad("n_lambda", "must be at least 1")
    if cfg.agg_grid_size < 1:
        bad("agg_grid_size", "must be at least 1")


def read_config(path) -> SimulationConfig:
    return parse_config(Path(path).read_text())


# --- outputs -------------------------------------------------------------------

SUMMARY_COLUMNS = ["example", "n", "p", "rho", "method", "replications", "k",
                   "tp_mean", "tp_sd", "fp_mean", "fp_sd", "cr", "cr_sd", "mse_mean", "mse_sd"]


def _num(v) -> str:
    return f"{v:.10g}"


def summary_csv(rows: list) -> str:
    """``rows`` are ``(example, n, p, rho, k, MetricsReport)`` tuples."""
    buf = io.StringIO()
    buf.write(f"# pqlwcr-summary schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for ex, n, p, rho, k, rep in rows:
        w.writerow([ex, n, p, _num(rho), rep.method, rep.replications, k,
                    *(_num(getattr(rep, c)) for c in SUMMARY_COLUMNS[7:])])
    return buf.getvalue()


_APPROACH = {"pql_wcr": "PQL_WCR", "naive_lasso": "naive lasso"}


def summary_table(rows: list) -> str:
    """Aligned text table with one row per (example, p, rho, method) and sds in parentheses."""
    head = ["example", "p", "rho", "approach", "TP", "FP", "CR", "MSE"]
    body = []
    for ex, n, p, rho, k, rep in rows:
        body.append([str(ex), str(p), f"{rho:g}", _APPROACH.get(rep.method, rep.method),
                     f"{rep.tp_mean:.2f}({rep.tp_sd:.2f})", f"{rep.fp_mean:.2f}({rep.fp_sd:.2f})",
                     f"{rep.cr:.2f}({rep.cr_sd:.2f})", f"{rep.mse_mean:.3f}({rep.mse_sd:.3f})"])
    widths = [max(len(r[j]) for r in [head] + body) for j in range(len(head))]
    lines = [f"# pqlwcr-table schema_version={SCHEMA_VERSION}"]
    for r in [head] + body:
        lines.append("  ".join(c.ljust(wd) for c, wd in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def records_jsonl(records: list, context: dict) -> str:
    lines = [json.dumps({"schema_version": SCHEMA_VERSION, **context, **r.to_dict()}, sort_keys=True)
             for r in records]
    return "".join(line + "\n" for line in lines)


def estimates_csv(names, beta_hat, frequency) -> str:
    buf = io.StringIO()
    buf.write(f"# pqlwcr-estimates schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["coordinate", "name", "beta_hat", "selection_frequency"])
    for d, (name, b, f) in enumerate(zip(names, beta_hat, frequency), 1):
        w.writerow([d, name, repr(float(b)), repr(float(f))])
    return buf.getvalue()
