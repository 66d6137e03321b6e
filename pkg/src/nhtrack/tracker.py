"""Sequential Monte Carlo approximation of NormalHedge for tracking.

Each action carries only its current state and its discounted regret. Actions
whose regret drops to zero or below are deleted and replaced by jittered copies
of surviving actions, drawn in proportion to their previous weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .hedge import compute_weights, update_regrets


def _identity(states: np.ndarray) -> np.ndarray:
    return states


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker parameters.

    ``loss`` maps ``(states (N, d), frame)`` to ``N`` losses. ``resample_spread``
    is the child jitter covariance: a scalar variance (same on every axis) or a
    ``(d, d)`` matrix. Zero spread is accepted and copies the parent exactly.
    """

    loss: Callable[[np.ndarray, object], np.ndarray]
    n_actions: int = 100
    discount: float = 0.02
    resample_spread: float | np.ndarray = 400.0
    dynamics: Callable[[np.ndarray], np.ndarray] = _identity
    box_lo: tuple = (-500.0,)
    box_hi: tuple = (500.0,)
    tol: float = 1e-10

    def __post_init__(self):
        if self.n_actions < 1:
            raise ValueError("n_actions must be >= 1")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        lo, hi = self.lo, self.hi
        if lo.shape != hi.shape or lo.ndim != 1 or not np.all(lo < hi):
            raise ValueError(f"degenerate state box: {self.box_lo} .. {self.box_hi}")
        self.spread_factor  # validates the covariance

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.box_lo, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.box_hi, dtype=float)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def spread_factor(self) -> np.ndarray:
        """Lower-triangular ``L`` with ``L L^T = resample_spread``."""
        s = np.asarray(self.resample_spread, dtype=float)
        d = self.dim
        if s.ndim == 0:
            if s < 0:
                raise ValueError("resample_spread must be >= 0")
            return np.sqrt(s) * np.eye(d)
        if s.shape != (d, d):
            raise ValueError(f"resample_spread must be scalar or ({d}, {d})")
        if not np.allclose(s, s.T):
            raise ValueError("resample_spread must be symmetric")
        if not np.any(s):
            return np.zeros((d, d))
        return np.linalg.cholesky(s)


@dataclass
class TrackerState:
    states: np.ndarray  # (N, d)
    regrets: np.ndarray  # (N,)
    weights: np.ndarray  # (N,)
    t: int = 0
    n_resampled: int = field(default=0)

    @property
    def n_actions(self) -> int:
        return self.regrets.size


def init(cfg: TrackerConfig, rng: np.random.Generator, states=None) -> TrackerState:
    """Actions uniform over the state box, zero regret, uniform weight.

    ``states`` overrides the random placement.
    """
    n, d = cfg.n_actions, cfg.dim
    if states is None:
        x = rng.uniform(cfg.lo, cfg.hi, size=(n, d))
    else:
        x = np.array(states, dtype=float).reshape(n, d)
    return TrackerState(x, np.zeros(n), np.full(n, 1.0 / n))


def estimate(states, weights) -> np.ndarray:
    """Weighted mean of the action states."""
    x = np.asarray(states, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return w @ x


def parent_probabilities(regrets: np.ndarray, prev_weights: np.ndarray) -> np.ndarray:
    """Parent distribution: previous weights restricted to positive-regret actions.

    Falls back to uniform over the positive set if those previous weights are
    all zero, and to uniform over all actions if no regret is positive.
    """
    n = regrets.size
    pos = regrets > 0
    if not np.any(pos):
        return np.full(n, 1.0 / n)
    p = np.where(pos, prev_weights, 0.0)
    total = p.sum()
    if total <= 0:
        p = pos.astype(float)
        total = p.sum()
    return p / total


def resample(deleted, states, prev_weights, loss_alg, prev_regrets, regrets, frame,
             cfg: TrackerConfig, rng: np.random.Generator):
    """Replacement actions for the ``deleted`` slots.

    For each slot a parent is drawn independently from
    :func:`parent_probabilities`; the child state is ``N(parent, spread)``
    clamped to the box, and its regret is the parent's previous-round regret
    discounted plus ``loss_alg`` minus the child's own loss on ``frame``.

    Returns ``(child_states, child_regrets, parents)``.
    """
    deleted = np.asarray(deleted, dtype=np.intp)
    k = deleted.size
    n = regrets.size
    p = parent_probabilities(regrets, prev_weights)
    parents = rng.choice(n, size=k, p=p)
    jitter = rng.standard_normal((k, cfg.dim)) @ cfg.spread_factor.T
    children = np.clip(states[parents] + jitter, cfg.lo, cfg.hi)
    child_losses = np.asarray(cfg.loss(children, frame), dtype=float)
    child_regrets = (1.0 - cfg.discount) * prev_regrets[parents] + (loss_alg - child_losses)
    return children, child_regrets, parents


def step(st: TrackerState, frame, cfg: TrackerConfig, rng: np.random.Generator):
    """One round: losses, regrets, deletion, resampling, weights, estimate, dynamics.

    Returns ``(new_state, estimate)``; the estimate is taken before the dynamics
    update.
    """
    losses = np.asarray(cfg.loss(st.states, frame), dtype=float)
    regrets, loss_alg = update_regrets(st.regrets, losses, st.weights, cfg.discount)
    states = st.states.copy()
    deleted = np.flatnonzero(regrets <= 0)
    if deleted.size:
        children, child_regrets, _ = resample(
            deleted, st.states, st.weights, loss_alg, st.regrets, regrets, frame, cfg, rng
        )
        states[deleted] = children
        regrets[deleted] = child_regrets
    weights = compute_weights(regrets, tol=cfg.tol)
    est = estimate(states, weights)
    states = np.clip(cfg.dynamics(states), cfg.lo, cfg.hi)
    new = replace(st, states=states, regrets=regrets, weights=weights, t=st.t + 1,
                  n_resampled=st.n_resampled + deleted.size)
    return new, est


def run(frames, cfg: TrackerConfig, rng: np.random.Generator, states=None) -> np.ndarray:
    """Track a whole frame sequence; returns estimates of shape ``(T, d)``."""
    st = init(cfg, rng, states=states)
    out = np.empty((len(frames), cfg.dim))
    for i, fr in enumerate(frames):
        st, out[i] = step(st, fr, cfg, rng)
    return out
