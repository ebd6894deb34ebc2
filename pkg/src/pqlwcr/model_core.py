"""Marginal mean model, quasi-likelihood and score for clustered data.

Data are stored ragged: one flat ``(N, p)`` covariate matrix and one flat
response vector, with ``offsets`` marking where each cluster starts.  A
:class:`DatasetView` selects either every row or exactly one row per cluster
(a within-cluster resample) without copying anything.

The log quasi-likelihood is normalized by the number of clusters ``n`` in
both the full-data and the resampled form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

ETA_CLAMP = 30.0


class DomainError(ValueError):
    """Argument outside the domain of a link, variance or penalty function."""


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    BINOMIAL = "binomial"


@dataclass(frozen=True)
class ModelFamily:
    """Canonical link/variance pair; the dispersion is fixed at one."""

    kind: Family = Family.GAUSSIAN
    dispersion: float = field(default=1.0, init=False)

    @classmethod
    def from_name(cls, name: str) -> "ModelFamily":
        try:
            return cls(Family(name.lower()))
        except ValueError:
            raise ValueError(f"unknown family {name!r}; expected 'gaussian' or 'binomial'") from None

    @property
    def code(self) -> int:
        # integer tag understood by the compiled kernels
        return 0 if self.kind is Family.GAUSSIAN else 1

    # vectorized helpers used by the solver; the scalar functions below check domains
    def mean(self, eta: np.ndarray) -> np.ndarray:
        if self.kind is Family.GAUSSIAN:
            return np.asarray(eta, dtype=float)
        eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        return 1.0 / (1.0 + np.exp(-eta))

    def variance(self, mu: np.ndarray) -> np.ndarray:
        if self.kind is Family.GAUSSIAN:
            return np.ones_like(np.asarray(mu, dtype=float))
        mu = np.asarray(mu, dtype=float)
        return mu * (1.0 - mu)

    def mean_deriv(self, eta: np.ndarray) -> np.ndarray:
        if self.kind is Family.GAUSSIAN:
            return np.ones_like(np.asarray(eta, dtype=float))
        mu = self.mean(eta)
        return mu * (1.0 - mu)

    def q(self, y: np.ndarray, eta: np.ndarray) -> np.ndarray:
        """Closed-form Q(y, eta) per observation."""
        if self.kind is Family.GAUSSIAN:
            return -0.5 * (y - eta) ** 2
        eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        return y * eta - np.logaddexp(0.0, eta)


GAUSSIAN = ModelFamily(Family.GAUSSIAN)
BINOMIAL = ModelFamily(Family.BINOMIAL)


def mean_link(family: ModelFamily, eta: float) -> float:
    if not math.isfinite(eta):
        raise DomainError(f"linear predictor must be finite, got {eta}")
    return float(family.mean(np.float64(eta)))


def variance_fn(family: ModelFamily, mu: float) -> float:
    if family.kind is Family.BINOMIAL and not 0.0 < mu < 1.0:
        raise DomainError(f"binomial variance needs mu in (0, 1), got {mu}")
    return float(family.variance(np.float64(mu)))


@dataclass(frozen=True, eq=False)
class LongitudinalDataset:
    """Clusters of (response, covariate row) observations.

    Parameters
    ----------
    y : ndarray, shape (N,)
        Responses for all observations, cluster by cluster.
    X : ndarray, shape (N, p)
        Covariate rows aligned with ``y``.
    offsets : ndarray, shape (n + 1,)
        ``offsets[i]:offsets[i + 1]`` are the rows of cluster ``i``.
    names : tuple of str, optional
        Covariate names; defaults to ``x1 .. xp``.
    cluster_ids : tuple, optional
        External cluster labels (kept for export only).
    unpenalized : tuple of int
        Columns never penalized by the solver (an intercept, when present).
    """

    y: np.ndarray
    X: np.ndarray
    offsets: np.ndarray
    names: tuple = ()
    cluster_ids: tuple = ()
    unpenalized: tuple = ()

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        offsets = np.ascontiguousarray(self.offsets, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("covariates must be a 2-d array")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError("responses and covariate rows must have the same ragged shape")
        if offsets.ndim != 1 or offsets.shape[0] < 2:
            raise ValueError("need at least one cluster")
        if offsets[0] != 0 or offsets[-1] != y.shape[0]:
            raise ValueError("offsets must start at 0 and end at the number of rows")
        if np.any(np.diff(offsets) < 1):
            raise ValueError("every cluster must contain at least one observation")
        for arr in (y, X, offsets):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "offsets", offsets)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{d + 1}" for d in range(X.shape[1])))
        elif len(self.names) != X.shape[1]:
            raise ValueError("one name per covariate column required")

    @classmethod
    def from_clusters(cls, ys: Sequence, Xs: Sequence, **kw) -> "LongitudinalDataset":
        """Build from per-cluster response vectors and covariate matrices."""
        sizes = [len(v) for v in ys]
        Xs = [np.atleast_2d(np.asarray(x, dtype=float)) for x in Xs]
        if any(x.shape[0] != m for x, m in zip(Xs, sizes)):
            raise ValueError("responses and covariates have different cluster sizes")
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        return cls(np.concatenate([np.asarray(v, dtype=float) for v in ys]), np.vstack(Xs), offsets, **kw)

    @property
    def n(self) -> int:
        return self.offsets.shape[0] - 1

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def cluster_of_row(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.cluster_sizes)

    def with_intercept(self) -> "LongitudinalDataset":
        """Prepend an unpenalized column of ones."""
        X = np.hstack([np.ones((self.n_obs, 1)), self.X])
        unpen = (0,) + tuple(d + 1 for d in self.unpenalized)
        return LongitudinalDataset(self.y, X, self.offsets, ("(intercept)",) + tuple(self.names),
                                   self.cluster_ids, unpen)

    def full(self) -> "DatasetView":
        return DatasetView(self, None)

    def resampled(self, z) -> "DatasetView":
        return DatasetView(self, z)


@dataclass(frozen=True, eq=False)
class DatasetView:
    """Either all observations (``selector is None``) or one row per cluster.

    ``selector`` holds 0-based within-cluster positions, one per cluster.
    """

    base: LongitudinalDataset
    selector: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.selector is None:
            return
        z = np.asarray(getattr(self.selector, "z", self.selector), dtype=np.int64)
        if z.shape != (self.base.n,):
            raise ValueError("a resample index needs one entry per cluster")
        if np.any(z < 0) or np.any(z >= self.base.cluster_sizes):
            raise ValueError("resample index out of range for its cluster")
        z.setflags(write=False)
        object.__setattr__(self, "selector", z)

    @property
    def n_clusters(self) -> int:
        return self.base.n

    @property
    def is_full(self) -> bool:
        return self.selector is None

    def rows(self):
        """Row indices of visible observations, or a full slice."""
        if self.selector is None:
            return slice(None)
        return self.base.offsets[:-1] + self.selector

    @property
    def n_visible(self) -> int:
        return self.base.n_obs if self.selector is None else self.base.n

    def design(self):
        """Visible ``(X, y)``; the full view returns the stored arrays uncopied."""
        r = self.rows()
        return self.base.X[r], self.base.y[r]


def _check_beta(view: DatasetView, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (view.base.p,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({view.base.p},)")
    return beta


def quasi_loglik(view: DatasetView, beta, family: ModelFamily) -> float:
    """n^{-1} times the summed closed-form Q(y, x'beta) over visible rows."""
    beta = _check_beta(view, beta)
    X, y = view.design()
    return float(np.sum(family.q(y, X @ beta)) / view.n_clusters)


def quasi_score(view: DatasetView, beta, family: ModelFamily) -> np.ndarray:
    """Gradient of :func:`quasi_loglik`; canonical links give ``X'(y - mu) / n``."""
    beta = _check_beta(view, beta)
    X, y = view.design()
    return X.T @ (y - family.mean(X @ beta)) / view.n_clusters


def full_gee_score(dataset: LongitudinalDataset, beta, family: ModelFamily) -> np.ndarray:
    """Working-independence GEE estimating function over all observations.

    Written in its general ``mu'(eta) / g(mu)`` weighted form rather than
    the canonical shortcut, so it can serve as a bias diagnostic on its own.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (dataset.p,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({dataset.p},)")
    eta = dataset.X @ beta
    mu = family.mean(eta)
    w = family.mean_deriv(eta) / family.variance(mu)
    return dataset.X.T @ (w * (dataset.y - mu)) / dataset.n
