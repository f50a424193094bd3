"""Pair losses, their gradients, and the three-phase weight schedule.

With ``dt = |y_a - y_b|^2 + 1`` the per-pair losses are

    neighbor   dt / (10 + dt)
    mid-near   dt / (10000 + dt)
    further    1 / (1 + dt)

and the total loss is the weighted sum over the three pair lists.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

NB_CONST = 10.0
MN_CONST = 10000.0


class PairKind(str, Enum):
    NB = "nb"
    MN = "mn"
    FP = "fp"


@dataclass(frozen=True)
class PhaseWeights:
    w_nb: float
    w_mn: float
    w_fp: float

    def __post_init__(self):
        for name in ("w_nb", "w_mn", "w_fp"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")

    def as_tuple(self):
        return (self.w_nb, self.w_mn, self.w_fp)


@dataclass(frozen=True)
class ScheduleConfig:
    """Phase boundaries: phase k runs from ``tau_k`` up to the next boundary."""

    tau1: int = 1
    tau2: int = 101
    tau3: int = 201
    n_iterations: int = 450

    def __post_init__(self):
        if not (self.tau1 == 1 and self.tau1 <= self.tau2 <= self.tau3 <= self.n_iterations):
            raise ValueError(
                "schedule needs 1 = tau1 <= tau2 <= tau3 <= n_iterations, got "
                f"({self.tau1}, {self.tau2}, {self.tau3}, {self.n_iterations})"
            )


def weight_schedule(t, cfg=ScheduleConfig()):
    """Weights ``(w_nb, w_mn, w_fp)`` in effect at 1-based iteration ``t``."""
    if not 1 <= t <= cfg.n_iterations:
        raise ValueError(f"iteration {t} outside [1, {cfg.n_iterations}]")
    if t < cfg.tau2:
        frac = (t - 1) / (cfg.tau2 - 1)
        return PhaseWeights(2.0, 1000.0 * (1.0 - frac) + 3.0 * frac, 1.0)
    if t < cfg.tau3:
        return PhaseWeights(3.0, 3.0, 1.0)
    return PhaseWeights(1.0, 0.0, 1.0)


def dtilde(y_a, y_b):
    diff = np.asarray(y_a, dtype=np.float64) - np.asarray(y_b, dtype=np.float64)
    return float(diff @ diff) + 1.0


def pair_loss(kind, dt):
    kind = PairKind(kind)
    dt = np.asarray(dt, dtype=np.float64)
    if np.any(dt < 1.0):
        raise ValueError("transformed distance must be >= 1")
    if kind is PairKind.NB:
        out = dt / (NB_CONST + dt)
    elif kind is PairKind.MN:
        out = dt / (MN_CONST + dt)
    else:
        out = 1.0 / (1.0 + dt)
    return out if out.ndim else float(out)


def pair_force(kind, d):
    """Derivative of the pair loss with respect to the embedding distance ``d``."""
    kind = PairKind(kind)
    d = np.asarray(d, dtype=np.float64)
    dt = d * d + 1.0
    if kind is PairKind.NB:
        out = 2.0 * NB_CONST * d / (NB_CONST + dt) ** 2
    elif kind is PairKind.MN:
        out = 2.0 * MN_CONST * d / (MN_CONST + dt) ** 2
    else:
        out = -2.0 * d / (1.0 + dt) ** 2
    return out if out.ndim else float(out)


def _coef(kind, dt):
    # dLoss/d(dt); the gradient w.r.t. y_a is 2 * coef * (y_a - y_b)
    if kind is PairKind.NB:
        return NB_CONST / (NB_CONST + dt) ** 2
    if kind is PairKind.MN:
        return MN_CONST / (MN_CONST + dt) ** 2
    return -1.0 / (1.0 + dt) ** 2


def _terms(pairs, w):
    return (
        (PairKind.NB, pairs.nb, w.w_nb),
        (PairKind.MN, pairs.mn, w.w_mn),
        (PairKind.FP, pairs.fp, w.w_fp),
    )


def total_loss(y, pairs, w):
    y = np.asarray(y, dtype=np.float64)
    loss = 0.0
    for kind, p, wk in _terms(pairs, w):
        if wk == 0.0 or len(p) == 0:
            continue
        diff = y[p[:, 0]] - y[p[:, 1]]
        dt = np.einsum("ij,ij->i", diff, diff) + 1.0
        loss += wk * float(np.sum(pair_loss(kind, dt)))
    return loss


def loss_and_gradient(y, pairs, w):
    """Total loss and its gradient with respect to every coordinate of ``y``.

    Each pair pushes its two endpoints with equal and opposite forces, so the
    gradient rows sum to zero. Terms are accumulated in the fixed order
    neighbor, mid-near, further.
    """
    y = np.asarray(y, dtype=np.float64)
    n, dim = y.shape
    grad = np.zeros_like(y)
    loss = 0.0
    for kind, p, wk in _terms(pairs, w):
        if wk == 0.0 or len(p) == 0:
            continue
        a, b = p[:, 0], p[:, 1]
        diff = y[a] - y[b]
        dt = np.einsum("ij,ij->i", diff, diff) + 1.0
        loss += wk * float(np.sum(pair_loss(kind, dt)))
        push = (2.0 * wk) * _coef(kind, dt)[:, None] * diff
        idx = np.concatenate([a, b])
        for c in range(dim):
            grad[:, c] += np.bincount(idx, weights=np.concatenate([push[:, c], -push[:, c]]), minlength=n)
    return loss, grad


def gradient(y, pairs, w):
    return loss_and_gradient(y, pairs, w)[1]
