"""NormalHedge weighting: regret accounting, the potential equation and weights.

Regrets are held in plain ``numpy`` arrays. All functions here are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NoPositiveRegret(ValueError):
    """Raised when the potential equation has no solution (all regrets <= 0)."""


def _as_regrets(regrets) -> np.ndarray:
    r = np.asarray(regrets, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("regrets must be a non-empty 1-d array")
    if not np.all(np.isfinite(r)):
        raise ValueError("regrets must be finite")
    return r


def _logsumexp(z: np.ndarray) -> float:
    m = z.max()
    return float(m + math.log(np.exp(z - m).sum()))


def _log_potential_gap(a: np.ndarray, log_n: float, c: float) -> float:
    # log((1/N) sum exp(a / c)) - 1, with a = [R]_+^2 / 2
    return _logsumexp(a / c) - log_n - 1.0


def solve_potential(regrets, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Solve ``(1/N) sum_i exp([R_i]_+^2 / (2c)) = e`` for ``c > 0``.

    The potential is strictly decreasing in ``c``. The root is kept inside a
    bracket ``[c_lo, c_hi]`` and refined by Newton steps on ``log c``; any step
    that leaves the bracket is replaced by a bisection step. Iteration stops once
    the relative residual of the potential is below ``tol``.

    Raises :class:`NoPositiveRegret` if no regret is positive.
    """
    r = _as_regrets(regrets)
    pos = np.maximum(r, 0.0)
    if not np.any(pos > 0):
        raise NoPositiveRegret("potential equation needs at least one positive regret")
    a = 0.5 * pos * pos
    n = r.size
    log_n = math.log(n)
    a_max = float(a.max())

    # phi(c_hi) <= e, with equality iff all regrets equal the maximum.
    c_hi = a_max
    gap_hi = _log_potential_gap(a, log_n, c_hi)
    if abs(math.expm1(gap_hi)) <= tol:
        return c_hi
    while gap_hi > 0:  # only through rounding
        c_hi *= 2.0
        gap_hi = _log_potential_gap(a, log_n, c_hi)
    # phi(c) >= exp(a_max / c) / N, so phi(c_lo) >= e.
    c_lo = a_max / (1.0 + log_n)
    while _log_potential_gap(a, log_n, c_lo) < 0:
        c_lo *= 0.5

    u_lo, u_hi = math.log(c_lo), math.log(c_hi)
    u = 0.5 * (u_lo + u_hi)
    for _ in range(max_iter):
        c = math.exp(u)
        z = a / c
        z_max = z.max()
        s = np.exp(z - z_max)
        s_sum = s.sum()
        gap = z_max + math.log(s_sum) - log_n - 1.0
        if abs(math.expm1(gap)) <= tol:
            return c
        if gap > 0:
            u_lo = u
        else:
            u_hi = u
        # d gap / d log c = -(softmax-weighted mean of a / c)
        slope = -float(np.dot(s, z)) / s_sum
        u_new = u - gap / slope if slope < 0 else 0.5 * (u_lo + u_hi)
        if not (u_lo < u_new < u_hi):
            u_new = 0.5 * (u_lo + u_hi)
        if u_new == u:
            return c
        u = u_new
    return math.exp(u)


def compute_weights(regrets, tol: float = 1e-10) -> np.ndarray:
    """NormalHedge weights ``w_i ∝ ([R_i]_+ / c) exp([R_i]_+^2 / (2c))``.

    If no regret is positive the weights are uniform.
    """
    r = _as_regrets(regrets)
    pos = r > 0
    if not np.any(pos):
        return np.full(r.size, 1.0 / r.size)
    c = solve_potential(r, tol=tol)
    rp = r[pos]
    logw = np.log(rp) - math.log(c) + rp * rp / (2.0 * c)
    wp = np.exp(logw - logw.max())
    w = np.zeros(r.size)
    w[pos] = wp / wp.sum()
    return w


def update_regrets(regrets, losses, weights, alpha: float = 0.0):
    """Discounted regret update.

    ``R_i <- (1 - alpha) R_i + (l_A - l_i)`` where ``l_A = sum_i w_i l_i``.
    ``alpha = 0`` is the undiscounted update.

    Returns ``(new_regrets, algorithm_loss)``.
    """
    r = np.asarray(regrets, dtype=float)
    l = np.asarray(losses, dtype=float)
    w = np.asarray(weights, dtype=float)
    if not (r.shape == l.shape == w.shape) or r.ndim != 1:
        raise ValueError(
            f"length mismatch: regrets {r.shape}, losses {l.shape}, weights {w.shape}"
        )
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    loss_alg = float(np.dot(w, l))
    return (1.0 - alpha) * r + (loss_alg - l), loss_alg


def quantile_regret(cumulative_losses, algorithm_loss: float, eps: float) -> float:
    """Regret of the algorithm to the top ``eps``-quantile of actions.

    That is ``algorithm_loss - L_(k)`` with ``k = ceil(eps * N)`` and ``L_(k)``
    the k-th smallest cumulative loss.
    """
    losses = np.asarray(cumulative_losses, dtype=float)
    if losses.size == 0:
        raise ValueError("cumulative_losses is empty")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    n = losses.size
    # guard against eps * n landing a hair above an integer
    k = min(n, max(1, math.ceil(eps * n - 1e-9)))
    return float(algorithm_loss - np.partition(losses, k - 1)[k - 1])


@dataclass
class NormalHedge:
    """Stateful NormalHedge learner over ``n_actions`` actions.

    ``discount`` is the alpha of :func:`update_regrets`; 0 gives plain
    NormalHedge.
    """

    n_actions: int
    discount: float = 0.0
    tol: float = 1e-10
    regrets: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)
    cumulative_losses: np.ndarray = field(init=False)
    algorithm_loss: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.n_actions < 1:
            raise ValueError("n_actions must be >= 1")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        self.regrets = np.zeros(self.n_actions)
        self.weights = np.full(self.n_actions, 1.0 / self.n_actions)
        self.cumulative_losses = np.zeros(self.n_actions)

    def update(self, losses) -> float:
        """Feed one round of per-action losses; returns the learner's loss."""
        losses = np.asarray(losses, dtype=float)
        self.regrets, loss_alg = update_regrets(
            self.regrets, losses, self.weights, self.discount
        )
        self.cumulative_losses = self.cumulative_losses + losses
        self.algorithm_loss += loss_alg
        self.weights = compute_weights(self.regrets, tol=self.tol)
        return loss_alg

    def quantile_regret(self, eps: float) -> float:
        return quantile_regret(self.cumulative_losses, self.algorithm_loss, eps)
