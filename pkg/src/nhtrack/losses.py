"""Clipped-window observation loss over an integer grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Integer cells ``lo, lo+1, ..., hi``."""

    lo: int = -500
    hi: int = 500

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty grid: lo={self.lo} > hi={self.hi}")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def cells(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1, dtype=float)


@dataclass(frozen=True)
class LossConfig:
    pulse_halfwidth: int = 50
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.pulse_halfwidth < 0:
            raise ValueError("pulse_halfwidth must be >= 0")
        if not self.noise_scale > 0:
            raise ValueError("noise_scale must be > 0")


def frame_values(frame, grid: Grid) -> np.ndarray:
    values = np.asarray(getattr(frame, "values", frame), dtype=float)
    if values.shape != (grid.size,):
        raise ValueError(
            f"frame has shape {values.shape}, grid needs ({grid.size},)"
        )
    return values


def clip(y, sigma_o: float):
    """Clamp measurements to ``[-sigma_o, 1 + sigma_o]``."""
    return np.minimum(1.0 + sigma_o, np.maximum(y, -sigma_o))


def window_bounds(centers, halfwidth: int, grid: Grid):
    """Index range ``[i0, i1)`` of cells ``g`` with ``|g - c| <= halfwidth``.

    ``centers`` may be real valued; the range is intersected with the grid, so
    windows outside the grid come back empty (``i0 == i1``).
    """
    c = np.asarray(centers, dtype=float)
    first = np.ceil(c - halfwidth)
    last = np.floor(c + halfwidth)
    # c -/+ halfwidth can round across an integer; settle edges on |g - c| <= W itself
    first = np.where(np.abs(first - 1 - c) <= halfwidth, first - 1, first)
    first = np.where(np.abs(first - c) > halfwidth, first + 1, first)
    last = np.where(np.abs(last + 1 - c) <= halfwidth, last + 1, last)
    last = np.where(np.abs(last - c) > halfwidth, last - 1, last)
    i0 = np.clip(first - grid.lo, 0, grid.size).astype(np.intp)
    i1 = np.clip(last - grid.lo + 1, 0, grid.size).astype(np.intp)
    return i0, np.maximum(i1, i0)


def window_sums(values: np.ndarray, centers, halfwidth: int, grid: Grid) -> np.ndarray:
    """Sum of ``values`` over each center's window, via one prefix sum."""
    prefix = np.concatenate(([0.0], np.cumsum(values)))
    i0, i1 = window_bounds(centers, halfwidth, grid)
    return prefix[i1] - prefix[i0]


def observation_loss(x, frame, cfg: LossConfig, grid: Grid):
    """Negative sum of clipped measurements in the window around ``x``.

    ``x`` may be a scalar or an array of states; the return matches its shape.
    """
    values = frame_values(frame, grid)
    q = clip(values, cfg.noise_scale)
    out = -window_sums(q, x, cfg.pulse_halfwidth, grid)
    return float(out) if np.ndim(out) == 0 else out


class ClippedWindowLoss:
    """Per-action loss callable for the tracker.

    Called as ``loss(states, frame)`` with ``states`` of shape ``(N, d)``; the
    first state coordinate is the position on the grid.
    """

    def __init__(self, cfg: LossConfig, grid: Grid):
        self.cfg = cfg
        self.grid = grid

    def __call__(self, states: np.ndarray, frame) -> np.ndarray:
        pos = np.asarray(states, dtype=float)
        if pos.ndim == 2:
            pos = pos[:, 0]
        return observation_loss(pos, frame, self.cfg, self.grid)
