"""Deterministic evaluation of the three controller modes on shared targets."""
from dataclasses import dataclass, replace

import numpy as np

from .controller import AdaptivePolicy, FixedPid, FrozenSteadyState, GainBounds, act, default_probe, extract_steady_gains
from .metrics import improvement_report, summarize
from .rollout import Recorder, run_episode
from .simenv import DroneEnv, SimConfig


@dataclass
class EvalResult:
    name: str
    recorder: Recorder
    legs: list          # LegRecord, censored legs removed
    censored: list      # legs cut by the episode cap before their budget ran out
    summary: dict

    @property
    def metrics(self):
        return [leg.metrics for leg in self.legs]


def split_censored(legs, leg_budget):
    """Separate legs the episode clock cut short from legs that were decided.

    A leg is decided if it completed its hold, or if it ran for at least
    ``leg_budget`` steps without doing so (a failure).  Anything else was
    truncated by the episode cap while still in progress.
    """
    kept, censored = [], []
    for leg in legs:
        if leg.completed or leg.end_step - leg.start_step >= leg_budget:
            kept.append(leg)
        else:
            censored.append(leg)
    return kept, censored


def evaluate(mode, cfg=SimConfig(), bounds=GainBounds(), episodes=20, seed=None,
             leg_budget=500, name="controller", keep_rows=True):
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    env = DroneEnv(cfg)
    rec = Recorder(cfg, keep_rows=keep_rows)
    for _ in range(episodes):
        run_episode(env, mode, bounds, rec, deterministic=True)
    kept, censored = split_censored(rec.legs, leg_budget)
    summary = summarize([leg.metrics for leg in kept])
    summary["censored_legs"] = len(censored)
    summary["precision_rate"] = (
        sum(leg.metrics.final_error <= cfg.settle_tolerance for leg in kept) / len(kept) if kept else None
    )
    return EvalResult(name, rec, kept, censored, summary)


def probe_integral(network, cfg=SimConfig(), bounds=GainBounds()):
    """Median accumulated PE at leg completion over one deterministic episode.

    Falls back to the integral at truncation if no leg completes.
    """
    env = DroneEnv(cfg)
    e = env.reset()
    mode = AdaptivePolicy(network)
    seen = []
    while True:
        s = env.state
        a = act(mode, e, s.target, s.position, bounds)
        out = env.step(a.v_cmd)
        if out.leg_completed:
            seen.append(e.ipe)
        if out.episode_done:
            break
        e = out.observation
    return float(np.median(seen)) if seen else float(e.ipe)


def frozen_gains(network, cfg=SimConfig(), bounds=GainBounds()):
    probe = default_probe(cfg.settle_tolerance, probe_integral(network, cfg, bounds))
    return extract_steady_gains(network, probe, bounds), probe


def compare(network, fixed_gains, cfg=SimConfig(), bounds=GainBounds(), episodes=20, seed=None,
            leg_budget=500, keep_rows=True):
    """Adaptive vs frozen-steady-state vs fixed baseline on the same targets."""
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    g_frozen, probe = frozen_gains(network, cfg, bounds)
    runs = {
        "adaptive": evaluate(AdaptivePolicy(network), cfg, bounds, episodes, None, leg_budget, "adaptive", keep_rows),
        "frozen": evaluate(FrozenSteadyState(g_frozen), cfg, bounds, episodes, None, leg_budget, "frozen", keep_rows),
        "fixed": evaluate(FixedPid(fixed_gains), cfg, bounds, episodes, None, leg_budget, "fixed", keep_rows),
    }
    report = {
        "frozen_gains": g_frozen,
        "probe": probe,
        "vs_frozen": improvement_report(runs["adaptive"].metrics, runs["frozen"].metrics),
        "vs_fixed": improvement_report(runs["adaptive"].metrics, runs["fixed"].metrics),
    }
    return runs, report
