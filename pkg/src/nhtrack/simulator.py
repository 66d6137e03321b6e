"""Synthetic 1-d tracking world: true paths, square pulses, mixture-noise frames.

Every random draw comes from a Philox stream keyed by ``(seed, trial, stream, t)``
so paths, per-frame noise and algorithm randomness are independent and each can
be regenerated on its own.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .losses import Grid


class Stream(enum.IntEnum):
    PATH = 0
    NOISE = 1
    NH = 2
    PF = 3
    REGRET = 4


def stream_rng(seed: int, trial: int, stream: int, t: int = 0) -> np.random.Generator:
    """Independent counter-based generator for one ``(seed, trial, stream, t)`` key."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial), int(stream), int(t)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SimConfig:
    sigma_o: float = 1.0
    rho: float = 0.0
    pulse_halfwidth: int = 50
    horizon: int = 200
    grid: Grid = field(default_factory=Grid)
    path_mode: str = "piecewise_velocity"  # or "stationary"
    segment_length: int = 40
    max_speed: float = 1.0
    outlier_scale: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if not self.sigma_o > 0:
            raise ValueError("sigma_o must be > 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.pulse_halfwidth < 0:
            raise ValueError("pulse_halfwidth must be >= 0")
        if self.path_mode not in ("stationary", "piecewise_velocity"):
            raise ValueError(f"unknown path_mode {self.path_mode!r}")
        if self.segment_length < 1:
            raise ValueError("segment_length must be >= 1")


@dataclass(frozen=True)
class MeasurementFrame:
    values: np.ndarray
    t: int


@dataclass(frozen=True)
class TruePath:
    states: np.ndarray
    velocities: np.ndarray  # one per segment; empty for a stationary path

    def __len__(self):
        return self.states.size


def pulse(x, z, halfwidth: int):
    """Square pulse: 1 where ``|x - z| <= halfwidth``, else 0."""
    return (np.abs(np.asarray(x, dtype=float) - z) <= halfwidth).astype(float)


def sample_noise(sigma_o: float, rho: float, rng: np.random.Generator, size=None,
                 outlier_scale: float = 10.0):
    """Draws from ``(1 - rho) N(0, sigma_o^2) + rho N(0, (10 sigma_o)^2)``."""
    z = rng.standard_normal(size)
    wide = rng.random(size) < rho
    return sigma_o * z * np.where(wide, outlier_scale, 1.0)


def gen_frame(z_t: float, cfg: SimConfig, rng: np.random.Generator, t: int = 0) -> MeasurementFrame:
    """One frame ``M(x, t) = H(x, z_t) + n_t(x)`` over the grid, cells ascending."""
    cells = cfg.grid.cells
    noise = sample_noise(cfg.sigma_o, cfg.rho, rng, size=cells.size,
                         outlier_scale=cfg.outlier_scale)
    return MeasurementFrame(pulse(cells, z_t, cfg.pulse_halfwidth) + noise, t)


def gen_true_path(cfg: SimConfig, rng: np.random.Generator) -> TruePath:
    """Object path with ``z_1 = 0``.

    In piecewise-velocity mode a speed ``v ~ U[-max_speed, max_speed]`` is drawn
    for every block of ``segment_length`` steps; the position reflects off the
    grid edges.
    """
    T = cfg.horizon
    if cfg.path_mode == "stationary":
        return TruePath(np.zeros(T), np.zeros(0))
    n_seg = math.ceil(T / cfg.segment_length)
    velocities = rng.uniform(-cfg.max_speed, cfg.max_speed, size=n_seg)
    lo, hi = float(cfg.grid.lo), float(cfg.grid.hi)
    z = np.empty(T)
    z[0] = pos = 0.0
    sign = 1.0
    for t in range(1, T):
        pos += sign * velocities[(t - 1) // cfg.segment_length]
        if pos > hi:
            pos, sign = 2 * hi - pos, -sign
        elif pos < lo:
            pos, sign = 2 * lo - pos, -sign
        z[t] = pos
    return TruePath(z, velocities)


def simulate(cfg: SimConfig, trial: int):
    """Path and frames for one trial; frame ``t`` (1-based) uses noise substream ``t``."""
    path = gen_true_path(cfg, stream_rng(cfg.seed, trial, Stream.PATH))
    frames = [
        gen_frame(z, cfg, stream_rng(cfg.seed, trial, Stream.NOISE, t), t)
        for t, z in enumerate(path.states, start=1)
    ]
    return path, frames


def write_frames(frames, path, grid: Grid | None = None) -> None:
    """Replay file: a header ``t,<cell lo>,...,<cell hi>`` then one line per
    frame, ``t,M(lo,t),...,M(hi,t)``."""
    frames = list(frames)
    grid = grid or Grid()
    with open(path, "w", newline="\n") as fh:
        fh.write("t," + ",".join(str(g) for g in range(grid.lo, grid.hi + 1)) + "\n")
        for fr in frames:
            if len(fr.values) != grid.size:
                raise ValueError(f"frame {fr.t} has {len(fr.values)} cells, grid has {grid.size}")
            fh.write(str(fr.t))
            for v in fr.values:
                fh.write("," + repr(float(v)))
            fh.write("\n")


def read_frames(path):
    frames = []
    with open(path) as fh:
        next(fh, None)  # header
        for line in fh:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(",")
            frames.append(MeasurementFrame(np.array([float(p) for p in parts[1:]]), int(parts[0])))
    return frames
