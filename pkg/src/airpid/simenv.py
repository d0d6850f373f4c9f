"""Point-mass drone environment.

The PX4 velocity/attitude/rate chain is replaced by a first-order lag on the
commanded velocity.  The environment hands out a fresh random target each
time the drone has held position inside ``settle_tolerance`` for
``hold_steps`` consecutive steps, and truncates the episode at
``episode_cap`` steps.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .kernels import lag_step


class ControllerFault(RuntimeError):
    """A controller produced a command the simulator refuses to integrate."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.04
    tau_v: float = 0.3
    workspace_lo: tuple = (-6.0, -6.0, 0.5)
    workspace_hi: tuple = (6.0, 6.0, 3.0)
    settle_tolerance: float = 0.1
    hold_steps: int = 50
    episode_cap: int = 1000
    seed: int = 0
    wind: tuple = (0.0, 0.0, 0.0)
    step_penalty: float = 0.01
    reward_exp_cap: float = 30.0
    # body-angle proxy: commands faster than this abort the episode
    max_command: float = 1.5
    abort_penalty: float = 10.0
    # targets closer than this to the previous target are redrawn
    min_leg_distance: float = 0.5

    def __post_init__(self):
        lo = np.asarray(self.workspace_lo, dtype=float)
        hi = np.asarray(self.workspace_hi, dtype=float)
        problems = []
        if not self.dt > 0:
            problems.append("dt must be > 0")
        if not self.tau_v > 0:
            problems.append("tau_v must be > 0")
        if not self.settle_tolerance > 0:
            problems.append("settle_tolerance must be > 0")
        if self.hold_steps < 1:
            problems.append("hold_steps must be >= 1")
        if self.episode_cap <= self.hold_steps:
            problems.append("episode_cap must exceed hold_steps")
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi < lo):
            problems.append("workspace must be a box with lo <= hi per axis")
        if len(self.wind) != 3 or not np.all(np.isfinite(self.wind)):
            problems.append("wind must be a finite 3-vector")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def lo(self):
        return np.asarray(self.workspace_lo, dtype=float)

    @property
    def hi(self):
        return np.asarray(self.workspace_hi, dtype=float)

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)


@dataclass
class DroneState:
    position: np.ndarray
    velocity: np.ndarray
    target: np.ndarray
    start_of_leg: np.ndarray
    integral_pe: float = 0.0
    prev_pe: float = 0.0
    hold_counter: int = 0
    leg_start_timestep: int = 0
    episode_timestep: int = 0
    fresh_leg: bool = True

    def copy(self):
        return replace(
            self,
            position=self.position.copy(),
            velocity=self.velocity.copy(),
            target=self.target.copy(),
            start_of_leg=self.start_of_leg.copy(),
        )


@dataclass(frozen=True)
class ErrorSignal:
    pe: float
    dpe: float
    ipe: float

    def as_array(self):
        return np.array([self.pe, self.dpe, self.ipe])


@dataclass
class StepOutcome:
    observation: ErrorSignal
    reward: float
    leg_completed: bool
    episode_done: bool
    aborted: bool = False
    info: dict = field(default_factory=dict)


def position_error(target, current):
    """Euclidean distance between target and current position."""
    d = np.asarray(target, dtype=float) - np.asarray(current, dtype=float)
    return float(np.sqrt(d @ d))


def observe(state, cfg):
    """Error signal the controller sees in ``state``.

    ``ipe`` already includes the current ``pe * dt`` contribution; ``dpe`` is a
    backward difference and is zero on the first step of a leg.
    """
    pe = position_error(state.target, state.position)
    dpe = 0.0 if state.fresh_leg else (pe - state.prev_pe) / cfg.dt
    return ErrorSignal(pe, dpe, state.integral_pe + pe * cfg.dt)


def sample_target(rng, lo, hi):
    """Uniform draw from the box [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return lo + (hi - lo) * rng.random(3)


def effective_speed_of(distance, timestep_count, cfg):
    if timestep_count <= cfg.hold_steps:
        raise ValueError(
            f"leg of {timestep_count} steps cannot complete a {cfg.hold_steps}-step hold"
        )
    return distance / (cfg.dt * (timestep_count - cfg.hold_steps))


def compute_leg_reward(distance, timestep_count, cfg):
    """exp(10 * effective speed), exponent capped at ``cfg.reward_exp_cap``."""
    speed = effective_speed_of(distance, timestep_count, cfg)
    return float(np.exp(min(10.0 * speed, cfg.reward_exp_cap)))


def initial_state(cfg, target):
    center = cfg.center
    return DroneState(
        position=center.copy(),
        velocity=np.zeros(3),
        target=np.asarray(target, dtype=float).copy(),
        start_of_leg=center.copy(),
    )


def step(state, v_cmd, cfg, rng):
    """Advance one control period; returns ``(new_state, outcome)``.

    ``rng`` is only consumed when a leg completes and a new target is drawn.
    """
    v_cmd = np.asarray(v_cmd, dtype=float)
    if v_cmd.shape != (3,) or not np.all(np.isfinite(v_cmd)):
        raise ControllerFault(f"non-finite velocity command {v_cmd!r}")

    seen = observe(state, cfg)
    new = state.copy()
    new.integral_pe = seen.ipe
    new.prev_pe = seen.pe
    new.fresh_leg = False
    new.episode_timestep += 1

    if np.sqrt(v_cmd @ v_cmd) > cfg.max_command:
        outcome = StepOutcome(observe(new, cfg), -cfg.abort_penalty, False, True, aborted=True)
        return new, outcome

    new.position, new.velocity = lag_step(
        state.position, state.velocity, v_cmd, np.asarray(cfg.wind, dtype=float), cfg.dt, cfg.tau_v
    )

    pe = position_error(new.target, new.position)
    new.hold_counter = new.hold_counter + 1 if pe <= cfg.settle_tolerance else 0

    leg_steps = new.episode_timestep - new.leg_start_timestep
    info = {"pe": pe, "leg_steps": leg_steps}
    completed = new.hold_counter >= cfg.hold_steps
    if completed:
        distance = position_error(new.target, new.start_of_leg)
        speed = effective_speed_of(distance, leg_steps, cfg)
        reward = compute_leg_reward(distance, leg_steps, cfg)
        info.update(distance=distance, effective_speed=speed,
                    finished_target=new.target.copy(), finished_start=new.start_of_leg.copy())
        new.target = next_target(rng, new.target, cfg)
        new.start_of_leg = new.position.copy()
        new.integral_pe = 0.0
        new.prev_pe = 0.0
        new.fresh_leg = True
        new.hold_counter = 0
        new.leg_start_timestep = new.episode_timestep
    else:
        reward = -cfg.step_penalty

    done = new.episode_timestep >= cfg.episode_cap
    return new, StepOutcome(observe(new, cfg), reward, completed, done, info=info)


def next_target(rng, previous, cfg, max_tries=1000):
    """Uniform target at least ``min_leg_distance`` away from ``previous``.

    Rejection is against the previous target rather than the drone, so the
    target sequence depends only on the seed and not on the controller.
    """
    for _ in range(max_tries):
        t = sample_target(rng, cfg.lo, cfg.hi)
        if position_error(t, previous) >= cfg.min_leg_distance:
            return t
    raise ValueError("workspace too small for min_leg_distance")


class DroneEnv:
    """Stateful wrapper with a reset/step interface.

    Targets come from a stream seeded by ``(cfg.seed, episode index)``, so
    every controller run on the same config meets the same targets in the same
    order regardless of how fast it completes legs.
    """

    def __init__(self, cfg=None):
        self.cfg = cfg or SimConfig()
        self.rng = None
        self.state = None
        self.episodes = 0

    def reset(self):
        self.rng = np.random.default_rng([self.cfg.seed, self.episodes])
        center = self.cfg.center
        self.state = initial_state(self.cfg, next_target(self.rng, center, self.cfg))
        return observe(self.state, self.cfg)

    def step(self, v_cmd):
        self.state, outcome = step(self.state, v_cmd, self.cfg, self.rng)
        if outcome.episode_done:
            self.episodes += 1
        return outcome
