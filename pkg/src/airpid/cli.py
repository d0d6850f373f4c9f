"""``airpid`` command line: train, eval, compare, plan, plot.

Exit codes: 0 ok, 2 configuration error, 3 no path, 4 corrupt artifact,
1 anything else.  ``AIRPID_OUT`` overrides the configured output directory;
an explicit ``--out`` wins over both.
"""
import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import config as config_mod
from . import neural, planner, plotting
from .controller import AdaptivePolicy, FixedPid, FrozenSteadyState, Gains
from .csvio import CsvFormatError, write_csv
from .evaluation import compare, evaluate, frozen_gains
from .ppo import TrainingDiverged, leg_stream_rows, train
from .rollout import follow_schedule
from .simenv import DroneEnv

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NO_PATH, EXIT_CORRUPT = 0, 1, 2, 3, 4

log = logging.getLogger("airpid")


class CliError(Exception):
    def __init__(self, message, code=EXIT_OTHER):
        super().__init__(message)
        self.code = code


# -- shared helpers --------------------------------------------------------------

def _load_config(args):
    cfg = config_mod.load(args.config) if getattr(args, "config", None) else config_mod.RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg, sub):
    if getattr(args, "out", None):
        path = args.out
    else:
        path = os.path.join(os.environ.get("AIRPID_OUT") or cfg.out_dir, sub)
    os.makedirs(path, exist_ok=True)
    return path


def _snapshot(out, cfg):
    with open(os.path.join(out, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(config_mod.dump(cfg))


def _clean(obj):
    """JSON-safe copy: dataclasses to dicts, non-finite floats to None."""
    if isinstance(obj, Gains):
        return {"kp": obj.kp, "ki": obj.ki, "kd": obj.kd}
    if hasattr(obj, "__dataclass_fields__"):
        return _clean(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_network(path):
    if not path:
        raise CliError("this mode needs a checkpoint", EXIT_CONFIG)
    return neural.ActorCritic(neural.load_checkpoint(path))


def _metrics_row(name, s):
    return [name, s["legs"], s["effective_speed"], s["settling_time"], s["overshoot"],
            s["not_settled_rate"], s["undefined_overshoot_rate"], s["success_rate"]]


def _write_run(out, result, prefix=""):
    rec = result.recorder
    write_csv(os.path.join(out, f"{prefix}trajectory.csv"), "trajectory", rec.rows)
    write_csv(os.path.join(out, f"{prefix}legs.csv"), "legs", rec.leg_rows())
    write_csv(os.path.join(out, f"{prefix}gains.csv"), "gains", rec.gain_rows())


def _fmt_pct(x):
    return "n/a" if x is None else f"{x + 0.0:+.1f}%"


# -- subcommands -----------------------------------------------------------------

def cmd_train(args):
    cfg = _load_config(args)
    if args.total_timesteps is not None:
        cfg = replace(cfg, total_timesteps=args.total_timesteps)
    cfg = cfg.validate()
    out = _out_dir(args, cfg, "train")
    _snapshot(out, cfg)
    sim = cfg.sim()
    params, report = train(lambda: DroneEnv(sim), cfg.ppo(), cfg.bounds(), out)
    rows = leg_stream_rows(report)
    speeds = [r[4] for r in rows]
    q = max(1, len(speeds) // 4)
    tail = float(np.mean(speeds[-q:])) if speeds else float("nan")
    last = report.iterations[-1]
    print(f"trained {len(report.iterations)} iterations, {last['timestep']} steps, "
          f"{len(rows)} legs, final-quartile effective speed {tail:.3f} m/s -> "
          f"{os.path.join(out, 'final.airppo')}")
    return EXIT_OK


def _mode_for(args, cfg, sim):
    """Controller object plus extra summary fields for eval/plan."""
    bounds = cfg.bounds()
    if args.mode == "fixed":
        return FixedPid(cfg.fixed_gains()), {"gains": cfg.fixed_gains()}
    net = _load_network(args.checkpoint)
    if args.mode == "adaptive":
        return AdaptivePolicy(net), {}
    gains, probe = frozen_gains(net, sim, bounds)
    return FrozenSteadyState(gains), {"gains": gains, "probe": probe}


def cmd_eval(args):
    cfg = _load_config(args).validate()
    episodes = args.episodes or cfg.eval_episodes
    eval_seed = cfg.eval_seed if args.seed is None else args.seed
    sim = cfg.sim(eval_seed)
    mode, extra = _mode_for(args, cfg, sim)
    out = _out_dir(args, cfg, f"eval_{args.mode}")
    _snapshot(out, cfg)
    result = evaluate(mode, sim, cfg.bounds(), episodes, None, cfg.leg_budget, args.mode)
    _write_run(out, result)
    write_csv(os.path.join(out, "metrics.csv"), "metrics", [_metrics_row(args.mode, result.summary)])
    summary = {"mode": args.mode, "episodes": episodes, "seed": eval_seed, **extra, **result.summary}
    _write_json(os.path.join(out, "summary.json"), summary)
    s = result.summary
    print(f"{args.mode}: {s['legs']} legs, effective speed {s['effective_speed']}, "
          f"settling {s['settling_time']}, overshoot {s['overshoot']}, success {s['success_rate']}")
    return EXIT_OK


def cmd_compare(args):
    cfg = _load_config(args).validate()
    episodes = args.episodes or cfg.eval_episodes
    eval_seed = cfg.eval_seed if args.seed is None else args.seed
    net = _load_network(args.checkpoint)
    out = _out_dir(args, cfg, "compare")
    _snapshot(out, cfg)
    runs, report = compare(net, cfg.fixed_gains(), cfg.sim(eval_seed), cfg.bounds(),
                           episodes, None, cfg.leg_budget)
    metrics = []
    for name, res in runs.items():
        _write_run(out, res, prefix=f"{name}_")
        metrics.append(_metrics_row(name, res.summary))
    write_csv(os.path.join(out, "metrics.csv"), "metrics", metrics)
    summary = {
        "episodes": episodes,
        "seed": eval_seed,
        "frozen_gains": report["frozen_gains"],
        "probe": report["probe"],
        "fixed_gains": cfg.fixed_gains(),
        "success_rate": {n: r.summary["success_rate"] for n, r in runs.items()},
        "precision_rate": {n: r.summary["precision_rate"] for n, r in runs.items()},
        "vs_frozen": {k: report["vs_frozen"][k] for k in ("speed_pct", "settling_pct", "overshoot_pct")},
        "vs_fixed": {k: report["vs_fixed"][k] for k in ("speed_pct", "settling_pct", "overshoot_pct")},
        "controllers": {n: r.summary for n, r in runs.items()},
    }
    _write_json(os.path.join(out, "report.json"), summary)
    for base in ("frozen", "fixed"):
        r = summary[f"vs_{base}"]
        print(f"adaptive vs {base}: speed {_fmt_pct(r['speed_pct'])}, "
              f"settling {_fmt_pct(r['settling_pct'])}, overshoot {_fmt_pct(r['overshoot_pct'])}")
    print("success: " + ", ".join(f"{n} {v:.2f}" for n, v in summary["success_rate"].items() if v is not None))
    return EXIT_OK


def cmd_plan(args):
    cfg = _load_config(args).validate()
    try:
        world = planner.load_map(args.map)
    except OSError as exc:
        raise CliError(f"cannot read map {args.map}: {exc.strerror}", EXIT_CONFIG) from None
    mode = args.plan_mode or cfg.plan_mode
    rate = cfg.plan_rate_hz if args.rate is None else args.rate
    grid = world.grid()
    start_v, goal_v = grid.voxel_of(args.start), grid.voxel_of(args.goal)
    result = planner.a_star(start_v, goal_v, grid, mode)
    schedule = planner.emit_setpoints(result.waypoints, rate)
    out = _out_dir(args, cfg, "plan")
    _snapshot(out, cfg)
    write_csv(os.path.join(out, "waypoints.csv"), "waypoints",
              [[i, *v, *w.tolist()] for i, (v, w) in enumerate(zip(result.voxels, result.waypoints))])
    write_csv(os.path.join(out, "schedule.csv"), "path", [[t, *w.tolist()] for t, w in schedule])
    print(f"path of {len(result.voxels)} voxels, cost {result.cost:.4f} ({mode}), "
          f"{result.expanded} expansions, {len(schedule)} setpoints at {rate:g} Hz")
    if args.simulate:
        sim = cfg.sim()
        ctl, _ = _mode_for(args, cfg, sim)
        rows, track = follow_schedule(schedule, ctl, sim, cfg.bounds(), np.asarray(args.start, dtype=float))
        write_csv(os.path.join(out, "tracking.csv"), "trajectory", rows)
        _write_json(os.path.join(out, "tracking.json"), {"controller": args.mode, **track})
        print(f"tracking ({args.mode}): {track['duration_s']:.2f} s, max error {track['max_error']:.3f} m, "
              f"final error {track['final_error']:.3f} m, settled {track['settled_at_goal']}")
    return EXIT_OK


def cmd_plot(args):
    svg = plotting.plot_csv(args.csv, args.kind)
    with open(args.svg, "w", encoding="utf-8") as fh:
        fh.write(svg)
    print(f"wrote {args.svg}")
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------

def _point(text):
    parts = text.replace(",", " ").split()
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three numbers 'x,y,z'")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a point: {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="airpid", description="Adaptive PID tuning with PPO, plus 3D A* planning.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train the gain-scheduling policy")
    t.add_argument("config", nargs="?", help="key = value config file (defaults if omitted)")
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.add_argument("--total-timesteps", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate one controller")
    e.add_argument("checkpoint", nargs="?")
    e.add_argument("--mode", choices=("adaptive", "fixed", "frozen"), default="adaptive")
    e.add_argument("--episodes", type=int)
    e.add_argument("--seed", type=int, help="evaluation seed (default: eval_seed from config)")
    e.add_argument("--config")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="adaptive vs frozen-gain vs fixed-gain")
    c.add_argument("checkpoint")
    c.add_argument("--episodes", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--config")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    pl = sub.add_parser("plan", help="A* path through an obstacle map")
    pl.add_argument("map")
    pl.add_argument("--start", type=_point, required=True)
    pl.add_argument("--goal", type=_point, required=True)
    pl.add_argument("--mode", dest="plan_mode", choices=planner.MODES)
    pl.add_argument("--rate", type=float, help="setpoint rate in Hz")
    pl.add_argument("--simulate", action="store_true", help="fly the schedule in the simulator")
    pl.add_argument("--controller", dest="mode", choices=("adaptive", "fixed", "frozen"), default="fixed")
    pl.add_argument("--checkpoint")
    pl.add_argument("--config")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plan)

    pt = sub.add_parser("plot", help="render a CSV as an SVG chart")
    pt.add_argument("csv")
    pt.add_argument("--kind", choices=tuple(plotting.KINDS), required=True)
    pt.add_argument("svg")
    pt.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"airpid: {exc}", file=sys.stderr)
        return exc.code
    except config_mod.ConfigError as exc:
        print(f"airpid: configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except planner.NoPath as exc:
        print(f"airpid: NO_PATH: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    except planner.PlanningError as exc:
        print(f"airpid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (neural.CheckpointError, CsvFormatError) as exc:
        print(f"airpid: corrupt artifact: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except TrainingDiverged as exc:
        print(f"airpid: {exc}", file=sys.stderr)
        return EXIT_OTHER
    except OSError as exc:
        print(f"airpid: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
