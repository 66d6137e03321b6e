"""Experiment orchestration: paired trials, RMSE summaries, trajectory and regret dumps."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, tracker
from .hedge import NormalHedge
from .losses import ClippedWindowLoss, Grid, LossConfig
from .simulator import SimConfig, Stream, simulate, stream_rng

log = logging.getLogger(__name__)

ALGORITHMS = ("nh", "bayes", "pf")


@dataclass(frozen=True)
class ExperimentSpec:
    """A sweep over noise levels and outlier fractions.

    Defaults are the standard benchmark settings: 100 actions, discount 0.02,
    resample spread 400, random-walk std 2, pulse half-width 50, 100 particles.

    ``nh_init="z1"`` starts every tracker action at the known initial position,
    the same information the Bayes prior and the particle filter receive;
    ``"uniform"`` scatters actions over the grid. ``pf_weighting`` is passed to
    :func:`nhtrack.baselines.pf_weights`.
    """

    algorithms: tuple = ALGORITHMS
    sigma_o: tuple = (1.0, 8.0)
    rho: tuple = (0.0, 0.01, 0.05, 0.1, 0.15, 0.2)
    trials: int = 100
    horizon: int = 200
    seed: int = 0
    n_actions: int = 100
    discount: float = 0.02
    resample_spread: float = 400.0
    nh_init: str = "z1"
    transition_std: float = 2.0
    pulse_halfwidth: int = 50
    n_particles: int = 100
    pf_weighting: str = "direct"
    bayes_likelihood: str = "gaussian"
    path_mode: str = "piecewise_velocity"
    segment_length: int = 40
    grid_lo: int = -500
    grid_hi: int = 500

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not (self.algorithms and self.sigma_o and self.rho):
            raise ValueError("algorithms, sigma_o and rho must be non-empty")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms: {sorted(bad)}")
        if self.nh_init not in ("z1", "uniform"):
            raise ValueError(f"unknown nh_init {self.nh_init!r}")
        if self.pf_weighting not in ("direct", "shifted"):
            raise ValueError(f"unknown pf_weighting {self.pf_weighting!r}")

    @property
    def grid(self) -> Grid:
        return Grid(self.grid_lo, self.grid_hi)

    def sim_config(self, sigma_o: float, rho: float) -> SimConfig:
        return SimConfig(
            sigma_o=sigma_o, rho=rho, pulse_halfwidth=self.pulse_halfwidth,
            horizon=self.horizon, grid=self.grid, path_mode=self.path_mode,
            segment_length=self.segment_length, seed=self.seed,
        )

    def tracker_config(self, sigma_o: float) -> tracker.TrackerConfig:
        grid = self.grid
        return tracker.TrackerConfig(
            loss=ClippedWindowLoss(LossConfig(self.pulse_halfwidth, sigma_o), grid),
            n_actions=self.n_actions, discount=self.discount,
            resample_spread=self.resample_spread,
            box_lo=(float(grid.lo),), box_hi=(float(grid.hi),),
        )

    def bayes_config(self, sigma_o: float, rho: float) -> baselines.BayesConfig:
        return baselines.BayesConfig(
            transition_std=self.transition_std, observation_std=sigma_o,
            pulse_halfwidth=self.pulse_halfwidth, grid=self.grid,
            likelihood=self.bayes_likelihood, outlier_fraction=rho,
        )


@dataclass
class RunResult:
    algo: str
    sigma_o: float
    rho: float
    trial: int
    rmse: float
    predictions: np.ndarray | None = field(default=None, repr=False)
    degenerate_steps: int = 0
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


def rmse(predicted, truth) -> float:
    p = np.asarray(predicted, dtype=float)
    z = np.asarray(truth, dtype=float)
    if p.shape != z.shape or p.ndim != 1 or p.size == 0:
        raise ValueError(f"length mismatch: {p.shape} vs {z.shape}")
    return float(np.sqrt(np.mean((p - z) ** 2)))


def _estimate(algo, frames, z1, sigma_o, rho, trial, spec: ExperimentSpec):
    """Run one estimator; returns ``(predictions, degenerate_steps)``."""
    if algo == "nh":
        cfg = spec.tracker_config(sigma_o)
        rng = stream_rng(spec.seed, trial, Stream.NH)
        start = np.full(cfg.n_actions, z1) if spec.nh_init == "z1" else None
        return tracker.run(frames, cfg, rng, states=start)[:, 0], 0
    bcfg = spec.bayes_config(sigma_o, rho)
    if algo == "bayes":
        return baselines.run_bayes(frames, z1, bcfg), 0
    if algo == "pf":
        rng = stream_rng(spec.seed, trial, Stream.PF)
        return baselines.run_pf(frames, z1, bcfg, spec.n_particles, rng, spec.pf_weighting)
    raise ValueError(f"unknown algorithm {algo!r}")


def run_trial(algo: str, sigma_o: float, rho: float, trial: int, spec: ExperimentSpec,
              world=None) -> RunResult:
    """One seeded simulation scored for one estimator.

    ``world`` is an optional precomputed ``(path, frames)`` pair for this
    ``(sigma_o, rho, trial)``; all estimators of a trial see the same one.
    """
    path, frames = world if world is not None else simulate(spec.sim_config(sigma_o, rho), trial)
    z = path.states
    try:
        with np.errstate(over="raise", invalid="raise"):
            pred, degenerate = _estimate(algo, frames, float(z[0]), sigma_o, rho, trial, spec)
        if not np.all(np.isfinite(pred)):
            raise FloatingPointError("non-finite prediction")
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        log.warning("trial failed: %s sigma_o=%g rho=%g trial=%d: %s", algo, sigma_o, rho, trial, exc)
        return RunResult(algo, sigma_o, rho, trial, math.nan, None, 0, f"{type(exc).__name__}: {exc}")
    return RunResult(algo, sigma_o, rho, trial, rmse(pred, z), pred, int(degenerate))


def _run_cell(args):
    sigma_o, rho, trial, spec = args
    world = simulate(spec.sim_config(sigma_o, rho), trial)
    return world[0].states, [run_trial(a, sigma_o, rho, trial, spec, world) for a in spec.algorithms]


def _sort_key(r: RunResult):
    return (r.algo, r.sigma_o, r.rho, r.trial)


def run_experiment(spec: ExperimentSpec, jobs: int = 1, keep_predictions: bool = False,
                   truths: dict | None = None):
    """Run every ``(sigma_o, rho, trial)`` cell for all algorithms.

    Returns ``(results, summary)``: per-trial results sorted by
    ``(algo, sigma_o, rho, trial)`` and the aggregate rows from
    :func:`summarize`. If ``truths`` is given it is filled with the true path of
    each ``(sigma_o, rho, trial)``.
    """
    tasks = [(s, r, k, spec) for s in spec.sigma_o for r in spec.rho for k in range(spec.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            outs = list(pool.map(_run_cell, tasks, chunksize=4))
    else:
        outs = [_run_cell(t) for t in tasks]
    results = []
    for (s, r, k, _), (z, cell) in zip(tasks, outs):
        if truths is not None:
            truths[(s, r, k)] = z
        results.extend(cell)
    if not keep_predictions:
        for res in results:
            res.predictions = None
    results.sort(key=_sort_key)
    return results, summarize(results)


def sample_std(values) -> float:
    """n - 1 denominator; 0 for a single value."""
    v = np.asarray(values, dtype=float)
    return float(np.std(v, ddof=1)) if v.size > 1 else 0.0


def summarize(results):
    """Mean and sample std of RMSE per ``(algo, sigma_o, rho)``; failed trials are counted, not averaged."""
    cells: dict = {}
    for r in results:
        cells.setdefault((r.algo, r.sigma_o, r.rho), []).append(r)
    rows = []
    for (algo, s, rho), rs in sorted(cells.items()):
        ok = [r.rmse for r in rs if not r.failed]
        rows.append({
            "algo": algo, "sigma_o": s, "rho": rho, "n": len(ok),
            "mean_rmse": float(np.mean(ok)) if ok else math.nan,
            "std_rmse": sample_std(ok) if ok else math.nan,
            "failures": len(rs) - len(ok),
        })
    return rows


def lookup(summary, algo, sigma_o, rho) -> dict:
    for row in summary:
        if row["algo"] == algo and row["sigma_o"] == sigma_o and row["rho"] == rho:
            return row
    raise KeyError((algo, sigma_o, rho))


TRIAL_FIELDS = ("algo", "sigma_o", "rho", "trial", "rmse", "degenerate_steps", "error")
SUMMARY_FIELDS = ("algo", "sigma_o", "rho", "n", "mean_rmse", "std_rmse", "failures")


def _exact(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _g6(x) -> str:
    return f"{x:.6g}" if isinstance(x, (float, np.floating)) else str(x)


def write_trials_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_FIELDS)
        for r in results:
            w.writerow([_exact(getattr(r, f)) for f in TRIAL_FIELDS])


def read_trials_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(RunResult(row["algo"], float(row["sigma_o"]), float(row["rho"]),
                                 int(row["trial"]), float(row["rmse"]),
                                 degenerate_steps=int(row["degenerate_steps"]), error=row["error"]))
    return out


def write_summary(summary, spec: ExperimentSpec, csv_path, json_path) -> None:
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for row in summary:
            w.writerow([_g6(row[f]) for f in SUMMARY_FIELDS])
    with open(json_path, "w", newline="\n") as fh:
        json.dump({"spec": asdict(spec), "summary": summary}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dump_trajectories(truth, predictions: dict, path) -> None:
    """Per-step CSV ``t,z_true,pred_nh,pred_bayes,pred_pf``; absent estimators stay blank."""
    z = np.asarray(truth, dtype=float)
    cols = [predictions.get(a) for a in ALGORITHMS]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "z_true"] + [f"pred_{a}" for a in ALGORITHMS])
        for i in range(z.size):
            w.writerow([i + 1, repr(float(z[i]))]
                       + ["" if c is None else repr(float(c[i])) for c in cols])


def trajectory_filename(sigma_o, rho, trial) -> str:
    return f"traj_sigma{sigma_o:g}_rho{rho:g}_trial{trial}.csv"


def write_experiment(results, summary, spec: ExperimentSpec, out_dir, truths=None,
                     n_trajectories: int = 0) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trials_csv(results, out / "trials.csv")
    write_summary(summary, spec, out / "summary.csv", out / "summary.json")
    if n_trajectories and truths:
        tdir = out / "trajectories"
        tdir.mkdir(exist_ok=True)
        for (s, rho, k), z in sorted(truths.items()):
            if k >= n_trajectories:
                continue
            preds = {r.algo: r.predictions for r in results
                     if (r.sigma_o, r.rho, r.trial) == (s, rho, k) and r.predictions is not None}
            dump_trajectories(z, preds, tdir / trajectory_filename(s, rho, k))
    return out


def bernoulli_losses(rng: np.random.Generator, t: int, n: int) -> np.ndarray:
    return (rng.random(n) < 0.5).astype(float)


def regret_checkpoints(horizon: int):
    return sorted({max(1, horizon // 16), max(1, horizon // 4), horizon})


def regret_bench(n: int, horizon: int, seed: int, loss_fn=bernoulli_losses) -> dict:
    """Undiscounted NormalHedge on ``n`` actions; quantile regret at ``eps = 1/n``.

    Returns ``{t: regret}`` at ``horizon/16``, ``horizon/4`` and ``horizon``.
    ``loss_fn(rng, t, n)`` supplies each round's losses.
    """
    if n < 2 or horizon < 1:
        raise ValueError("need n >= 2 and horizon >= 1")
    rng = stream_rng(seed, 0, Stream.REGRET)
    learner = NormalHedge(n, discount=0.0)
    marks = set(regret_checkpoints(horizon))
    curve = {}
    for t in range(1, horizon + 1):
        learner.update(loss_fn(rng, t, n))
        if t in marks:
            curve[t] = learner.quantile_regret(1.0 / n)
    return curve


def regret_bench_many(n: int, horizon: int, seeds: int, base_seed: int = 0):
    """Curves for ``seeds`` independent runs plus the checkpoint means."""
    curves = {s: regret_bench(n, horizon, base_seed + s) for s in range(seeds)}
    marks = regret_checkpoints(horizon)
    means = {t: float(np.mean([c[t] for c in curves.values()])) for t in marks}
    return curves, means


def write_regret_csv(curves: dict, means: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "t", "quantile_regret"])
        for s, curve in sorted(curves.items()):
            for t, v in sorted(curve.items()):
                w.writerow([s, t, repr(float(v))])
        for t, v in sorted(means.items()):
            w.writerow(["mean", t, repr(float(v))])
