"""Closed-loop episodes and the per-leg bookkeeping shared by training and
evaluation."""
from dataclasses import dataclass

import numpy as np

from .controller import act
from .kernels import lag_step
from .metrics import Leg, leg_metrics
from .simenv import DroneState, observe, position_error


@dataclass
class LegRecord:
    leg_id: int
    episode: int
    start: np.ndarray
    target: np.ndarray
    start_step: int
    end_step: int
    completed: bool
    metrics: object


class Recorder:
    """Splits a stream of post-step states into legs and scores each leg.

    With ``keep_rows`` the full trajectory is kept for CSV export; otherwise
    only the current leg is buffered.
    """

    def __init__(self, cfg, keep_rows=True):
        self.cfg = cfg
        self.keep_rows = keep_rows
        self.rows = []
        self.legs = []
        self.global_step = 0
        self._leg_id = -1
        self._open = False

    def begin_leg(self, state, episode):
        self._leg_id += 1
        self._open = True
        self._episode = episode
        self._start = state.position.copy()
        self._target = state.target.copy()
        self._start_step = self.global_step
        self._pos = []
        self._pe = []

    def record(self, state, action, outcome, episode):
        """Log the state reached after one step and close legs as needed."""
        self.global_step += 1
        pe = outcome.info.get("pe")
        if pe is None:  # aborted step: position did not move
            pe = float(np.linalg.norm(self._target - state.position))
        self._pos.append(state.position.copy())
        self._pe.append(pe)
        if self.keep_rows:
            g = action.gains
            self.rows.append([
                self.global_step * self.cfg.dt,
                *state.position.tolist(), *state.velocity.tolist(),
                g.kp, g.ki, g.kd, *np.asarray(action.v_cmd).tolist(),
                pe, self._leg_id,
            ])
        closed = None
        if outcome.leg_completed:
            closed = self._close(True)
            if not outcome.episode_done:
                self.begin_leg(state, episode)
        elif outcome.episode_done:
            closed = self._close(False)
        return closed

    def _close(self, completed):
        leg = Leg(self._leg_id, self._start, self._target,
                  np.array(self._pos), np.array(self._pe), completed)
        m = leg_metrics(leg, self.cfg.dt, self.cfg.settle_tolerance, self.cfg.hold_steps)
        rec = LegRecord(self._leg_id, self._episode, self._start, self._target,
                        self._start_step, self.global_step, completed, m)
        self.legs.append(rec)
        self._open = False
        return rec

    def leg_rows(self):
        out = []
        for r in self.legs:
            m = r.metrics
            out.append([r.leg_id, r.episode, *r.start.tolist(), *r.target.tolist(),
                        r.start_step, r.end_step, r.completed, m.effective_speed,
                        m.settling_time, m.overshoot, m.final_error])
        return out

    def gain_rows(self):
        return [[r[0], r[7], r[8], r[9], r[13], r[14]] for r in self.rows]


def run_episode(env, mode, bounds, recorder=None, deterministic=True, rng=None):
    """Fly one full episode with ``mode``; returns the total raw reward."""
    e = env.reset()
    episode = env.episodes
    if recorder is not None:
        recorder.begin_leg(env.state, episode)
    total = 0.0
    while True:
        s = env.state
        a = act(mode, e, s.target, s.position, bounds, deterministic=deterministic, rng=rng)
        outcome = env.step(a.v_cmd)
        total += outcome.reward
        if recorder is not None:
            recorder.record(env.state, a, outcome, episode)
        e = outcome.observation
        if outcome.episode_done:
            return total


def follow_schedule(schedule, mode, cfg, bounds, start, tail_steps=None):
    """Track a timed setpoint schedule ``[(t, point), ...]`` from ``start``.

    The active target switches to each setpoint at its time; integral and
    derivative state restart on every switch.  After the last switch the run
    continues until the hold completes or ``tail_steps`` (default: the
    episode cap) elapse.  Returns ``(rows, summary)`` with rows in the
    trajectory layout.
    """
    times = [t for t, _ in schedule]
    points = [np.asarray(p, dtype=float) for _, p in schedule]
    tail = cfg.episode_cap if tail_steps is None else tail_steps
    wind = np.asarray(cfg.wind, dtype=float)
    pos = np.asarray(start, dtype=float).copy()
    state = DroneState(position=pos, velocity=np.zeros(3), target=points[0].copy(),
                       start_of_leg=pos.copy())
    active = 0
    rows, errors = [], []
    k = 0
    last_switch = 0
    while True:
        t = k * cfg.dt
        while active + 1 < len(points) and times[active + 1] <= t + 1e-12:
            active += 1
            state.target = points[active].copy()
            state.start_of_leg = state.position.copy()
            state.integral_pe = state.prev_pe = 0.0
            state.fresh_leg = True
            state.hold_counter = 0
            last_switch = k
        e = observe(state, cfg)
        a = act(mode, e, state.target, state.position, bounds)
        state.integral_pe = e.ipe
        state.prev_pe = e.pe
        state.fresh_leg = False
        state.position, state.velocity = lag_step(state.position, state.velocity,
                                                  np.asarray(a.v_cmd, dtype=float), wind, cfg.dt, cfg.tau_v)
        k += 1
        pe = position_error(state.target, state.position)
        state.hold_counter = state.hold_counter + 1 if pe <= cfg.settle_tolerance else 0
        g = a.gains
        rows.append([k * cfg.dt, *state.position.tolist(), *state.velocity.tolist(),
                     g.kp, g.ki, g.kd, *np.asarray(a.v_cmd).tolist(), pe, active])
        errors.append(pe)
        last = active == len(points) - 1
        if last and state.hold_counter >= cfg.hold_steps:
            settled = True
            break
        if last and k - last_switch >= tail:
            settled = False
            break
    summary = {
        "steps": k,
        "duration_s": k * cfg.dt,
        "settled_at_goal": settled,
        "final_error": float(errors[-1]),
        "max_error": float(max(errors)),
        "goal_error": position_error(points[-1], state.position),
    }
    return rows, summary
