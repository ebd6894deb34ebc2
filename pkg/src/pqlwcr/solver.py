"""Penalized quasi-likelihood fits on a dataset view, tuned by BIC.

SCAD is handled by local linear approximation (LLA): starting from the L1
solution at the same lambda, each outer round replaces the SCAD penalty
by the weighted L1 penalty ``p'(|beta_d|) |beta_d|`` at the current iterate
and re-solves.  Each weighted-L1 problem is solved by IRLS with cyclic
coordinate descent (see ``_backend``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._backend import solve_weighted_l1
from .model_core import DatasetView, ModelFamily, quasi_loglik, quasi_score
from .penalty import PenaltyKind, PenaltySpec, penalty_derivative, penalty_value

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """The penalized objective became non-finite during a fit."""


@dataclass(frozen=True)
class SolverOptions:
    max_outer_iters: int = 50
    max_cd_passes: int = 200
    max_irls: int = 25
    tol: float = 1e-6
    lambda_grid: Optional[tuple] = None
    n_lambda: int = 50
    lambda_min_ratio: float = 0.01
    zero_tol: float = 1e-8
    w_floor: float = 1e-6
    penalty: PenaltyKind = PenaltyKind.SCAD
    a: float = 3.7

    def __post_init__(self):
        object.__setattr__(self, "penalty", PenaltyKind(self.penalty))
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.zero_tol < 0:
            raise ValueError("zero_tol must be non-negative")
        if self.lambda_grid is not None:
            grid = tuple(float(v) for v in self.lambda_grid)
            if not grid:
                raise ValueError("lambda_grid must not be empty")
            if any(v < 0 for v in grid) or any(b >= a for a, b in zip(grid, grid[1:])):
                raise ValueError("lambda_grid must be non-negative and strictly descending")
            object.__setattr__(self, "lambda_grid", grid)

    def spec(self, lam: float) -> PenaltySpec:
        return PenaltySpec(self.penalty, lam, self.a)


@dataclass
class FitResult:
    beta: np.ndarray
    support: tuple
    lam: float
    bic: float
    objective: float
    converged: bool
    iterations: int
    history: list = field(default_factory=list)


def _penalized_mask(p: int, unpenalized: Sequence[int]) -> np.ndarray:
    mask = np.ones(p, dtype=bool)
    mask[list(unpenalized)] = False
    return mask


def penalized_objective(view, family, spec, beta) -> float:
    """Q_n(beta) minus the penalty summed over penalized coordinates."""
    mask = _penalized_mask(view.base.p, view.base.unpenalized)
    return quasi_loglik(view, beta, family) - float(np.sum(penalty_value(spec, np.abs(beta[mask]))))


def support_of(beta, zero_tol: float) -> tuple:
    return tuple(int(d) for d in np.flatnonzero(np.abs(beta) > zero_tol))


def bic_score(view: DatasetView, family: ModelFamily, beta, zero_tol: float = 1e-8) -> float:
    """``-2 * sum Q(y, x'beta) + |support| * log(m)`` over the m visible rows."""
    beta = np.asarray(beta, dtype=float)
    m = view.n_visible
    total_q = quasi_loglik(view, beta, family) * view.n_clusters
    return -2.0 * total_q + len(support_of(beta, zero_tol)) * math.log(m)


def kkt_violation(view: DatasetView, family: ModelFamily, spec: PenaltySpec, beta,
                  zero_tol: float = 1e-8) -> float:
    """Largest deviation from the first-order conditions of the penalized fit."""
    beta = np.asarray(beta, dtype=float)
    score = quasi_score(view, beta, family)
    mask = _penalized_mask(view.base.p, view.base.unpenalized)
    absb = np.abs(beta)
    active = absb > zero_tol
    dpen = np.where(mask, penalty_derivative(spec, absb), 0.0)
    dpen0 = np.where(mask, penalty_derivative(spec, 0.0), 0.0)
    viol = np.where(active,
                    np.abs(score - dpen * np.sign(beta)),
                    np.maximum(0.0, np.abs(score) - dpen0))
    return float(np.max(viol, initial=0.0))


class _Problem:
    """A view's visible design gathered once, shared by every fit on it."""

    def __init__(self, view: DatasetView, family: ModelFamily, opts: SolverOptions):
        if view.n_visible == 0:
            raise ValueError("empty view")
        X, y = view.design()
        self.view = view
        self.family = family
        self.opts = opts
        self.X = np.asfortranarray(X)
        self.y = np.ascontiguousarray(y)
        self.scale = 1.0 / view.n_clusters
        self.mask = _penalized_mask(view.base.p, view.base.unpenalized)

    def lambda_max(self) -> float:
        score = self.X.T @ (self.y - self.family.mean(np.zeros_like(self.y))) * self.scale
        return float(np.max(np.abs(score[self.mask]), initial=0.0))

    def default_grid(self) -> tuple:
        o = self.opts
        lmax = self.lambda_max()
        if lmax <= 0.0:
            lmax = 1e-12
        return tuple(np.geomspace(lmax, lmax * o.lambda_min_ratio, o.n_lambda))

    def solve(self, pen: np.ndarray, warm: np.ndarray):
        o = self.opts
        beta, steps, passes, ok = solve_weighted_l1(
            self.X, self.y, self.family.code, np.where(self.mask, pen, 0.0), warm,
            self.scale, o.max_irls, o.max_cd_passes, o.tol, o.w_floor)
        if not np.all(np.isfinite(beta)):
            raise DivergenceError("non-finite coefficients")
        return beta, passes, ok

    def objective(self, spec: PenaltySpec, beta) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            q = float(np.sum(self.family.q(self.y, self.X @ beta))) * self.scale
            val = q - float(np.sum(penalty_value(spec, np.abs(beta[self.mask]))))
        if not math.isfinite(val):
            raise DivergenceError("non-finite penalized objective")
        return val

    def bic(self, beta) -> float:
        total_q = float(np.sum(self.family.q(self.y, self.X @ beta)))
        k = len(support_of(beta, self.opts.zero_tol))
        return -2.0 * total_q + k * math.log(self.X.shape[0])

    def fit(self, spec: PenaltySpec, warm=None) -> tuple:
        """Returns ``(FitResult, l1_solution)``; the L1 solution seeds the next path point."""
        p = self.X.shape[1]
        start = np.zeros(p) if warm is None else np.array(warm, dtype=float)
        beta, iters, ok = self.solve(np.full(p, spec.lam), start)
        l1_beta = beta
        history = [self.objective(spec, beta)]
        if spec.kind is PenaltyKind.SCAD and spec.lam > 0:
            stationary = False
            for _ in range(self.opts.max_outer_iters):
                pen = penalty_derivative(spec, np.abs(beta))
                new, k, ok_round = self.solve(pen, beta)
                iters += k
                ok = ok and ok_round
                change = float(np.max(np.abs(new - beta), initial=0.0))
                beta = new
                history.append(self.objective(spec, beta))
                if change < self.opts.tol:
                    stationary = True
                    break
            ok = ok and stationary
        res = FitResult(beta=beta, support=support_of(beta, self.opts.zero_tol), lam=float(spec.lam),
                        bic=self.bic(beta), objective=history[-1], converged=bool(ok),
                        iterations=int(iters), history=history)
        return res, l1_beta


def fit_penalized(view: DatasetView, family: ModelFamily, spec: PenaltySpec,
                  opts: Optional[SolverOptions] = None, warm=None) -> FitResult:
    """Approximate maximizer of ``Q_n(beta) - sum_d p_lambda(|beta_d|)`` on ``view``."""
    opts = opts or SolverOptions(penalty=spec.kind, a=spec.a)
    if warm is not None and np.shape(warm) != (view.base.p,):
        raise ValueError("warm start has the wrong length")
    return _Problem(view, family, opts).fit(spec, warm)[0]


def tune_lambda(view: DatasetView, family: ModelFamily, opts: Optional[SolverOptions] = None) -> FitResult:
    """Fit along a descending lambda grid with warm starts and keep the BIC minimizer.

    Ties go to the larger lambda.  A lambda whose fit diverges is skipped
    with a warning; the call fails only when every lambda fails.
    """
    opts = opts or SolverOptions()
    prob = _Problem(view, family, opts)
    grid = opts.lambda_grid if opts.lambda_grid is not None else prob.default_grid()
    best = None
    l1_path = None
    for lam in grid:
        try:
            res, l1_path = prob.fit(opts.spec(lam), warm=l1_path)
        except DivergenceError as exc:
            log.warning("fit at lambda=%g diverged: %s", lam, exc)
            continue
        if best is None or res.bic < best.bic:
            best = res
    if best is None:
        raise DivergenceError("every lambda on the grid diverged")
    return best
