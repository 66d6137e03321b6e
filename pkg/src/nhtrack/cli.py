"""Command line entry point: ``nhtrack {sweep,trial,regret-bench,dump-frames}``.

Exit status is 0 on success, 1 on a usage error and 2 when at least one trial
hit a numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import bench
from .simulator import simulate, write_frames

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text: str):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def read_config(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment. Keys use flag spelling."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _model_args(p: argparse.ArgumentParser) -> None:
    d = bench.ExperimentSpec()
    g = p.add_argument_group("model")
    g.add_argument("--t", dest="horizon", type=int, default=d.horizon, help="time steps per trial")
    g.add_argument("--seed", type=int, default=d.seed)
    g.add_argument("--n-actions", type=int, default=d.n_actions)
    g.add_argument("--discount", type=float, default=d.discount)
    g.add_argument("--resample-spread", type=float, default=d.resample_spread)
    g.add_argument("--nh-init", choices=("z1", "uniform"), default=d.nh_init)
    g.add_argument("--transition-std", type=float, default=d.transition_std)
    g.add_argument("--pulse-halfwidth", type=int, default=d.pulse_halfwidth)
    g.add_argument("--n-particles", type=int, default=d.n_particles)
    g.add_argument("--pf-weighting", choices=("direct", "shifted"), default=d.pf_weighting)
    g.add_argument("--bayes-likelihood", choices=("gaussian", "mixture"), default=d.bayes_likelihood)
    g.add_argument("--path-mode", choices=("piecewise_velocity", "stationary"), default=d.path_mode)
    g.add_argument("--segment-length", type=int, default=d.segment_length)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nhtrack", description="NormalHedge tracking benchmark")
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="RMSE table over sigma_o x rho")
    s.add_argument("--algos", type=_names, default=bench.ALGORITHMS)
    s.add_argument("--sigma-o", type=_floats, default=(1.0, 8.0))
    s.add_argument("--rho", type=_floats, default=(0.0, 0.01, 0.05, 0.1, 0.15, 0.2))
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--out", default="results")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--trajectories", type=int, default=0,
                   help="also dump per-step paths for the first K trials of each cell")
    _model_args(s)

    t = sub.add_parser("trial", help="one trial, optionally dumping its trajectories")
    t.add_argument("--algo", type=_names, default=bench.ALGORITHMS)
    t.add_argument("--sigma-o", type=float, default=1.0)
    t.add_argument("--rho", type=float, default=0.0)
    t.add_argument("--trial", type=int, default=0)
    t.add_argument("--dump-trajectory")
    _model_args(t)

    r = sub.add_parser("regret-bench", help="quantile regret growth on Bernoulli losses")
    r.add_argument("--n", type=int, default=10)
    r.add_argument("--t", dest="horizon", type=int, default=10000)
    r.add_argument("--seeds", type=int, default=20)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")

    f = sub.add_parser("dump-frames", help="write one trial's measurement frames")
    f.add_argument("--sigma-o", type=float, default=1.0)
    f.add_argument("--rho", type=float, default=0.0)
    f.add_argument("--trial", type=int, default=0)
    f.add_argument("--out", required=True)
    _model_args(f)
    return p


def _spec_from(args, **over) -> bench.ExperimentSpec:
    names = {f.name for f in fields(bench.ExperimentSpec)}
    kw = {k: v for k, v in vars(args).items() if k in names}
    return replace(bench.ExperimentSpec(), **{**kw, **over})


def cmd_sweep(args) -> int:
    spec = _spec_from(args, algorithms=tuple(args.algos), sigma_o=tuple(args.sigma_o),
                      rho=tuple(args.rho), trials=args.trials)
    truths = {} if args.trajectories else None
    results, summary = bench.run_experiment(spec, jobs=args.jobs,
                                            keep_predictions=bool(args.trajectories),
                                            truths=truths)
    out = bench.write_experiment(results, summary, spec, args.out, truths, args.trajectories)
    print("algo,sigma_o,rho,n,mean_rmse,std_rmse,failures")
    for row in summary:
        print(",".join(bench._g6(row[k]) for k in bench.SUMMARY_FIELDS))
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_NUMERIC if any(r.failed for r in results) else EXIT_OK


def cmd_trial(args) -> int:
    spec = _spec_from(args, algorithms=tuple(args.algo), sigma_o=(args.sigma_o,),
                      rho=(args.rho,), trials=args.trial + 1)
    world = simulate(spec.sim_config(args.sigma_o, args.rho), args.trial)
    results = [bench.run_trial(a, args.sigma_o, args.rho, args.trial, spec, world)
               for a in spec.algorithms]
    for r in results:
        print(f"{r.algo},{r.sigma_o:g},{r.rho:g},{r.trial},{r.rmse!r}"
              + (f",{r.error}" if r.failed else ""))
    if args.dump_trajectory:
        preds = {r.algo: r.predictions for r in results if r.predictions is not None}
        bench.dump_trajectories(world[0].states, preds, args.dump_trajectory)
    return EXIT_NUMERIC if any(r.failed for r in results) else EXIT_OK


def cmd_regret_bench(args) -> int:
    if args.n < 2 or args.horizon < 1 or args.seeds < 1:
        raise UsageError("need --n >= 2, --t >= 1, --seeds >= 1")
    curves, means = bench.regret_bench_many(args.n, args.horizon, args.seeds, args.seed)
    if args.out:
        bench.write_regret_csv(curves, means, args.out)
    print("t,mean_quantile_regret")
    for t, v in sorted(means.items()):
        print(f"{t},{v:.6g}")
    marks = bench.regret_checkpoints(args.horizon)
    if len(marks) == 3 and means[marks[1]] > 0:
        print(f"ratio T/(T/4) = {means[marks[2]] / means[marks[1]]:.4f}")
    return EXIT_OK


def cmd_dump_frames(args) -> int:
    spec = _spec_from(args, sigma_o=(args.sigma_o,), rho=(args.rho,))
    _, frames = simulate(spec.sim_config(args.sigma_o, args.rho), args.trial)
    write_frames(frames, args.out, spec.grid)
    return EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "trial": cmd_trial,
    "regret-bench": cmd_regret_bench,
    "dump-frames": cmd_dump_frames,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.config:
            cfg = read_config(ns.config)
            sub = parser._subparsers._group_actions[0].choices[ns.command]
            dests = {}
            for a in sub._actions:
                dests[a.dest] = a.dest
                for opt in a.option_strings:
                    dests[opt.lstrip("-").replace("-", "_")] = a.dest
            unknown = set(cfg) - set(dests)
            if unknown:
                raise UsageError(f"unknown config keys: {sorted(unknown)}")
            sub.set_defaults(**{dests[k]: _convert(sub, dests[k], v) for k, v in cfg.items()})
            ns = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(f"nhtrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"nhtrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _convert(sub: argparse.ArgumentParser, dest: str, value: str):
    for action in sub._actions:
        if action.dest == dest:
            conv = action.type or str
            try:
                out = conv(value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {dest}: {exc}")
            if action.choices is not None and out not in action.choices:
                raise UsageError(f"config key {dest}: {value!r} not in {sorted(action.choices)}")
            return out
    raise UsageError(f"unknown config key {dest}")


if __name__ == "__main__":
    sys.exit(main())
