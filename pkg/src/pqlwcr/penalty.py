"""SCAD and L1 penalties and the scalar soft-threshold operator."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model_core import DomainError


class PenaltyKind(str, Enum):
    SCAD = "scad"
    L1 = "l1"


@dataclass(frozen=True)
class PenaltySpec:
    kind: PenaltyKind = PenaltyKind.SCAD
    lam: float = 0.0
    a: float = 3.7

    def __post_init__(self):
        object.__setattr__(self, "kind", PenaltyKind(self.kind))
        if not self.lam >= 0:
            raise DomainError(f"penalty level must be non-negative, got {self.lam}")
        if self.kind is PenaltyKind.SCAD and not self.a > 2:
            raise DomainError(f"SCAD needs a > 2, got {self.a}")

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.kind, lam, self.a)


def _nonneg(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("penalty argument must be non-negative")
    return t


def penalty_derivative(spec: PenaltySpec, t):
    """p'_lambda(t) for t >= 0; vectorized over ``t``."""
    t = _nonneg(t)
    lam = spec.lam
    if spec.kind is PenaltyKind.L1:
        out = np.full_like(t, lam)
    elif lam == 0.0:
        out = np.zeros_like(t)
    else:
        a = spec.a
        out = np.where(t <= lam, lam, np.maximum(a * lam - t, 0.0) / (a - 1.0))
    return out if out.ndim else float(out)


def penalty_value(spec: PenaltySpec, t):
    """p_lambda(t), the integral of :func:`penalty_derivative` from 0 to t."""
    t = _nonneg(t)
    lam = spec.lam
    if spec.kind is PenaltyKind.L1:
        out = lam * t
    else:
        a = spec.a
        mid = (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0))
        out = np.where(t <= lam, lam * t, np.where(t <= a * lam, mid, 0.5 * (a + 1.0) * lam * lam))
    return out if np.ndim(out) else float(out)


def soft_threshold(z, t):
    """sign(z) * max(|z| - t, 0)."""
    out = np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    return out if np.ndim(out) else float(out)
