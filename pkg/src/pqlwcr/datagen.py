"""Simulation designs for clustered data with and without informative cluster size.

Examples 1 and 3 have correlated Gaussian responses, Examples 2 and 4
correlated binary responses.  In Examples 1 and 2 the mean is switched off
(``U_ij = 0``) in the rare large clusters, which makes cluster size
informative; Examples 3 and 4 have no such dependence.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .model_core import BINOMIAL, GAUSSIAN, LongitudinalDataset, ModelFamily

SIZE_DISTRIBUTIONS = {
    1: ((2, 4, 15), (9 / 16, 3 / 8, 1 / 16)),
    2: ((4, 6, 10), (9 / 16, 3 / 8, 1 / 16)),
}
SIZE_DISTRIBUTIONS[3] = SIZE_DISTRIBUTIONS[1]
SIZE_DISTRIBUTIONS[4] = SIZE_DISTRIBUTIONS[2]

# largest cluster size whose mean is switched on in the ICS designs
DEFAULT_U_MAX = {1: 4, 2: 6}

_SIGNAL = {1: (2.0, -1.0, 1.5, -2.0), 2: (1.0, -0.9, 0.7)}
_SIGNAL[3] = _SIGNAL[1]
_SIGNAL[4] = _SIGNAL[2]


def _check_example(example_id: int) -> None:
    if example_id not in SIZE_DISTRIBUTIONS:
        raise ValueError(f"unknown example id {example_id!r}; expected 1, 2, 3 or 4")


def default_beta(example_id: int, p: int) -> np.ndarray:
    _check_example(example_id)
    sig = _SIGNAL[example_id]
    if p < len(sig):
        raise ValueError(f"example {example_id} needs p >= {len(sig)}")
    beta = np.zeros(p)
    beta[: len(sig)] = sig
    return beta


@dataclass(frozen=True)
class ScenarioConfig:
    example_id: int = 1
    n: int = 200
    p: int = 50
    rho: float = 0.5
    rho_x: float = 0.4
    beta_star: Optional[tuple] = None
    seed: int = 0
    u_max: Optional[int] = None

    def __post_init__(self):
        _check_example(self.example_id)
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.beta_star is None:
            object.__setattr__(self, "beta_star", tuple(default_beta(self.example_id, self.p)))
        elif len(self.beta_star) != self.p:
            raise ValueError("beta_star must have length p")
        if self.u_max is None and self.example_id in DEFAULT_U_MAX:
            object.__setattr__(self, "u_max", DEFAULT_U_MAX[self.example_id])

    @property
    def family(self) -> ModelFamily:
        return GAUSSIAN if self.example_id in (1, 3) else BINOMIAL

    @property
    def has_ics(self) -> bool:
        return self.example_id in (1, 2)

    @property
    def support(self) -> tuple:
        return tuple(int(d) for d in np.flatnonzero(self.beta_star))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)


def gen_cluster_sizes(example_id: int, n: int, rng: np.random.Generator) -> np.ndarray:
    _check_example(example_id)
    if n < 1:
        raise ValueError("n must be at least 1")
    values, probs = SIZE_DISTRIBUTIONS[example_id]
    return rng.choice(np.array(values), size=n, p=np.array(probs))


def gen_ar_covariates(total_obs: int, p: int, rho_x: float, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. N(0, Sigma) with ``Sigma[a, b] = rho_x ** |a - b|`` via the AR(1) recursion."""
    if not abs(rho_x) < 1:
        raise ValueError(f"|rho_x| must be < 1, got {rho_x}")
    e = rng.standard_normal((total_obs, p))
    X = np.empty_like(e)
    X[:, 0] = e[:, 0]
    s = np.sqrt(1.0 - rho_x * rho_x)
    for a in range(1, p):
        X[:, a] = rho_x * X[:, a - 1] + s * e[:, a]
    return X


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"exchangeable correlation must lie in [0, 1), got {rho}")


def gen_exchangeable_normal(M: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    _check_rho(rho)
    return np.sqrt(rho) * rng.standard_normal() + np.sqrt(1.0 - rho) * rng.standard_normal(M)


def _exchangeable_errors(sizes: np.ndarray, rho: float, rng: np.random.Generator) -> np.ndarray:
    # one shared component per cluster, one idiosyncratic per observation
    _check_rho(rho)
    shared = np.repeat(rng.standard_normal(sizes.shape[0]), sizes)
    own = rng.standard_normal(int(sizes.sum()))
    return np.sqrt(rho) * shared + np.sqrt(1.0 - rho) * own


def _threshold(probs: np.ndarray, latent: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if np.any(~(probs >= 0.0) | ~(probs <= 1.0)):
        raise ValueError("marginal probabilities must lie in [0, 1]")
    return (latent <= ndtri(probs)).astype(float)


def gen_correlated_binary(marginal_probs, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Exchangeable binary vector by thresholding a latent Gaussian vector.

    ``rho`` is the latent correlation; ``P(Y_j = 1)`` equals ``marginal_probs[j]``.
    """
    probs = np.asarray(marginal_probs, dtype=float)
    latent = gen_exchangeable_normal(probs.shape[0], rho, rng)
    return _threshold(probs, latent)


def _indicator_u(config: ScenarioConfig, sizes: np.ndarray) -> np.ndarray:
    if not config.has_ics:
        return np.ones(int(sizes.sum()))
    return np.repeat((sizes <= config.u_max).astype(float), sizes)


def gen_dataset(config: ScenarioConfig, rng: Optional[np.random.Generator] = None):
    """Draw one dataset; returns ``(dataset, beta_star, support)``."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    ex = config.example_id
    beta = np.asarray(config.beta_star, dtype=float)
    sizes = gen_cluster_sizes(ex, config.n, rng)
    X = gen_ar_covariates(int(sizes.sum()), config.p, config.rho_x, rng)
    eta = X @ beta
    U = _indicator_u(config, sizes)
    latent = _exchangeable_errors(sizes, config.rho, rng)
    if ex in (1, 3):
        y = U * eta + latent
    else:
        if ex == 2:
            # offset inside the denominator only, as in the design's mean formula
            probs = U * np.exp(eta) / (1.0 + np.exp(eta + np.log(15.0 / 16.0)))
            probs = np.clip(probs, 0.0, 1.0)
        else:
            probs = 1.0 / (1.0 + np.exp(-eta))
        y = _threshold(probs, latent)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    ds = LongitudinalDataset(y, X, offsets)
    return ds, beta, config.support


def marginal_beta_star(config: ScenarioConfig) -> np.ndarray:
    """Coefficient of the marginal mean ``E(Y_i1 | X_i1)`` for the Gaussian designs.

    With ``U_ij = 1(M_i <= u_max)`` the first member of a cluster has mean
    ``P(M <= u_max) * x'beta``, so the marginal-model coefficient is the
    generating ``beta`` scaled by that probability.  Binary designs are not
    linear in this way and are rejected.
    """
    beta = np.asarray(config.beta_star, dtype=float)
    if config.example_id == 3:
        return beta
    if config.example_id != 1:
        raise ValueError("marginal coefficient is only closed-form for the Gaussian designs")
    values, probs = SIZE_DISTRIBUTIONS[1]
    p_on = sum(pr for v, pr in zip(values, probs) if v <= config.u_max)
    return p_on * beta
