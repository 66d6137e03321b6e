"""Generative-model baselines: a grid Bayes filter and a bootstrap particle filter.

Both assume the measurement model ``M(x) ~ N(H(x, z), sigma_o^2)`` independently
per cell and a Gaussian random walk with std ``sigma_d`` for the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .losses import Grid, frame_values, window_sums


class FilterDivergence(ArithmeticError):
    """Posterior mass vanished; the filter cannot continue."""


@dataclass(frozen=True)
class BayesConfig:
    """Filter model.

    ``likelihood="mixture"`` swaps the per-cell Gaussian for the two-component
    mixture ``(1 - outlier_fraction) N(h, s^2) + outlier_fraction N(h, (k s)^2)``
    with ``k = outlier_scale``.
    """

    transition_std: float = 2.0
    observation_std: float = 1.0
    pulse_halfwidth: int = 50
    grid: Grid = Grid()
    likelihood: str = "gaussian"
    outlier_fraction: float = 0.0
    outlier_scale: float = 10.0

    def __post_init__(self):
        if not self.transition_std > 0:
            raise ValueError("transition_std must be > 0")
        if not self.observation_std > 0:
            raise ValueError("observation_std must be > 0")
        if self.likelihood not in ("gaussian", "mixture"):
            raise ValueError(f"unknown likelihood {self.likelihood!r}")


def _cell_logpdf(m: np.ndarray, h: float, cfg: BayesConfig) -> np.ndarray:
    s = cfg.observation_std
    g = -0.5 * ((m - h) / s) ** 2 - math.log(s) - 0.5 * math.log(2 * math.pi)
    if cfg.likelihood == "gaussian":
        return g
    rho, k = cfg.outlier_fraction, cfg.outlier_scale
    wide = g + 0.5 * ((m - h) / s) ** 2 * (1 - 1 / k**2) - math.log(k)
    return np.logaddexp(math.log1p(-rho) + g if rho < 1 else -np.inf,
                        math.log(rho) + wide if rho > 0 else -np.inf)


def log_likelihood(frame, states, cfg: BayesConfig):
    """Joint log-density of a frame given the object at each of ``states``.

    The sum over cells splits into an all-background term plus a window sum of
    per-cell corrections where the pulse is on, so each state costs O(1) after
    one pass over the frame.
    """
    m = frame_values(frame, cfg.grid)
    off = _cell_logpdf(m, 0.0, cfg)
    on = _cell_logpdf(m, 1.0, cfg)
    out = off.sum() + window_sums(on - off, states, cfg.pulse_halfwidth, cfg.grid)
    return float(out) if np.ndim(out) == 0 else out


def transition_kernel(sigma_d: float) -> np.ndarray:
    half = math.ceil(6 * sigma_d)
    offs = np.arange(-half, half + 1, dtype=float)
    k = np.exp(-0.5 * (offs / sigma_d) ** 2)
    return k / k.sum()


def bayes_prior(grid: Grid, z1: float) -> np.ndarray:
    """Point mass at the grid cell nearest ``z1``."""
    p = np.zeros(grid.size)
    p[int(np.clip(round(z1) - grid.lo, 0, grid.size - 1))] = 1.0
    return p


def bayes_predict(post: np.ndarray, sigma_d: float) -> np.ndarray:
    """Convolve with the truncated Gaussian random-walk kernel and renormalise."""
    out = np.convolve(post, transition_kernel(sigma_d), mode="same")
    total = out.sum()
    if not total > 0:
        raise FilterDivergence("posterior mass vanished in predict")
    return out / total


def bayes_update(post: np.ndarray, frame, cfg: BayesConfig) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logp = np.log(post)
    logp = logp + log_likelihood(frame, cfg.grid.cells, cfg)
    top = logp.max()
    if not np.isfinite(top):
        raise FilterDivergence("posterior mass vanished in update")
    p = np.exp(logp - top)
    return p / p.sum()


def bayes_estimate(post: np.ndarray, grid: Grid) -> float:
    return float(np.dot(grid.cells, post))


def run_bayes(frames, z1: float, cfg: BayesConfig) -> np.ndarray:
    post = bayes_prior(cfg.grid, z1)
    out = np.empty(len(frames))
    for i, fr in enumerate(frames):
        if i:
            post = bayes_predict(post, cfg.transition_std)
        post = bayes_update(post, fr, cfg)
        out[i] = bayes_estimate(post, cfg.grid)
    return out


def systematic_resample(weights, rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling with one uniform offset ``u ~ U[0, 1/N)``."""
    w = np.asarray(weights, dtype=float)
    n = w.size
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, positions, side="right")


@dataclass
class ParticleSet:
    particles: np.ndarray
    weights: np.ndarray
    degenerate_steps: int = 0

    @classmethod
    def at(cls, z1: float, n: int) -> "ParticleSet":
        return cls(np.full(n, float(z1)), np.full(n, 1.0 / n))


def log_normaliser(cfg: BayesConfig) -> float:
    """Log of the per-frame Gaussian normalising constant, summed over cells."""
    return -cfg.grid.size * (math.log(cfg.observation_std) + 0.5 * math.log(2 * math.pi))


def pf_weights(loglik: np.ndarray, mode: str = "shifted", offset: float = 0.0):
    """Normalised importance weights from per-particle log-likelihoods.

    ``mode="shifted"`` subtracts the maximum before exponentiating, so some
    weight always survives. ``mode="direct"`` evaluates the unnormalised
    likelihood ``exp(loglik - offset)`` as is, the way a plain product of
    per-cell Gaussian kernels would, and can underflow to all zeros.

    Returns ``(weights, degenerate)``; when no weight survives normalisation the
    weights fall back to uniform and ``degenerate`` is True.
    """
    n = loglik.size
    if mode == "shifted":
        finite = np.isfinite(loglik)
        if not np.any(finite):
            return np.full(n, 1.0 / n), True
        w = np.where(finite, np.exp(loglik - loglik[finite].max()), 0.0)
    elif mode == "direct":
        w = np.exp(loglik - offset)
    else:
        raise ValueError(f"unknown weighting mode {mode!r}")
    total = w.sum()
    if not (total > 0 and np.isfinite(total)):
        return np.full(n, 1.0 / n), True
    return w / total, False


def pf_step(ps: ParticleSet, frame, cfg: BayesConfig, rng: np.random.Generator,
            weighting: str = "shifted"):
    """Bootstrap filter step: propagate, weight, estimate, resample.

    See :func:`pf_weights` for ``weighting``. Returns ``(new_set, estimate)``.
    """
    x = ps.particles + cfg.transition_std * rng.standard_normal(ps.particles.size)
    w, degenerate = pf_weights(log_likelihood(frame, x, cfg), weighting, log_normaliser(cfg))
    est = float(np.dot(w, x))
    idx = systematic_resample(w, rng)
    new = ParticleSet(x[idx], np.full(x.size, 1.0 / x.size),
                      ps.degenerate_steps + int(degenerate))
    return new, est


def run_pf(frames, z1: float, cfg: BayesConfig, n_particles: int, rng: np.random.Generator,
           weighting: str = "shifted"):
    """Returns ``(estimates, degenerate_steps)``."""
    ps = ParticleSet.at(z1, n_particles)
    out = np.empty(len(frames))
    for i, fr in enumerate(frames):
        ps, out[i] = pf_step(ps, fr, cfg, rng, weighting)
    return out, ps.degenerate_steps
