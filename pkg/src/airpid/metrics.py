"""Leg-level evaluation metrics: effective speed, settling time, overshoot.

Sentinels follow the conventions of a drone that never reaches its goal:
effective speed is 0 m/s, settling time is infinite (``NOT_SETTLED``) and
overshoot is ``UNDEFINED`` (``None``) when the target is never passed.
"""
import math
from dataclasses import dataclass

import numpy as np

from .kernels import settle_index

NOT_SETTLED = math.inf
UNDEFINED = None


@dataclass(frozen=True)
class Leg:
    """One navigation leg cut out of a trajectory log.

    ``positions`` and ``pe`` hold the post-step states, one row per control
    step, so ``len(pe) == n_steps``.
    """
    leg_id: int
    start: np.ndarray
    target: np.ndarray
    positions: np.ndarray
    pe: np.ndarray
    completed: bool

    @property
    def n_steps(self):
        return int(len(self.pe))

    @property
    def distance(self):
        d = np.asarray(self.target) - np.asarray(self.start)
        return float(np.sqrt(d @ d))


@dataclass(frozen=True)
class LegMetrics:
    effective_speed: float
    settling_time: float
    overshoot: object  # float or None
    final_error: float
    completed: bool = False


def effective_speed(leg, dt=0.04, hold_steps=50):
    """Leg distance over the time spent before the final hold window."""
    if not leg.completed:
        return 0.0
    if leg.n_steps <= hold_steps:
        raise ValueError(f"completed leg of {leg.n_steps} steps is shorter than the hold")
    return leg.distance / (dt * (leg.n_steps - hold_steps))


def settling_time(pe, tolerance=0.1, hold_steps=50, dt=0.04):
    """``dt * i`` for the first step ``i`` opening ``hold_steps`` in-tolerance
    steps in a row, measured from leg start; ``NOT_SETTLED`` otherwise."""
    i = settle_index(np.ascontiguousarray(pe, dtype=float), float(tolerance), int(hold_steps))
    return NOT_SETTLED if i < 0 else dt * i


def overshoot(positions, start, target):
    """Largest excursion past ``target`` along the start->target axis."""
    axis = np.asarray(target, dtype=float) - np.asarray(start, dtype=float)
    n = np.sqrt(axis @ axis)
    if n == 0.0:
        return UNDEFINED
    past = (np.asarray(positions, dtype=float) - target) @ (axis / n)
    peak = float(np.max(past)) if len(past) else 0.0
    return peak if peak > 0.0 else UNDEFINED


def leg_metrics(leg, dt=0.04, tolerance=0.1, hold_steps=50):
    return LegMetrics(
        effective_speed=effective_speed(leg, dt, hold_steps),
        settling_time=settling_time(leg.pe, tolerance, hold_steps, dt),
        overshoot=overshoot(leg.positions, leg.start, leg.target),
        final_error=float(leg.pe[-1]) if leg.n_steps else leg.distance,
        completed=leg.completed,
    )


def _aggregate(values, how):
    if not values:
        return None
    return float(np.median(values) if how == "median" else np.mean(values))


def summarize(legs, how="median"):
    """Aggregate a list of LegMetrics; sentinel legs are left out of the
    settling/overshoot aggregates and reported as rates instead."""
    settled = [m.settling_time for m in legs if math.isfinite(m.settling_time)]
    shot = [m.overshoot for m in legs if m.overshoot is not None]
    n = len(legs)
    return {
        "legs": n,
        "effective_speed": _aggregate([m.effective_speed for m in legs], how),
        "settling_time": _aggregate(settled, how),
        "overshoot": _aggregate(shot, how),
        "not_settled_rate": (n - len(settled)) / n if n else None,
        "undefined_overshoot_rate": (n - len(shot)) / n if n else None,
        "success_rate": sum(m.completed for m in legs) / n if n else None,
    }


def _pct(new, old):
    if new is None or old is None or old == 0:
        return None
    return 100.0 * (new - old) / old


def improvement_report(adaptive, baseline, how="median"):
    """Percentage change of the adaptive aggregates relative to the baseline.

    Positive speed change and negative settling/overshoot change are
    improvements.
    """
    if not adaptive or not baseline:
        raise ValueError("both metric lists must be non-empty")
    a = summarize(adaptive, how)
    b = summarize(baseline, how)
    return {
        "speed_pct": _pct(a["effective_speed"], b["effective_speed"]),
        "settling_pct": _pct(a["settling_time"], b["settling_time"]),
        "overshoot_pct": _pct(a["overshoot"], b["overshoot"]),
        "adaptive": a,
        "baseline": b,
    }
