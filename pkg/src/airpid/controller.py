"""PID laws, speed normalisation and the three controller modes.

The position controller is scalar: the PID output is a signed speed along the
unit vector from the drone to its target.  With gains produced per step by a
policy network the same algebra gives the adaptive (nonlinear) law.
"""
from dataclasses import dataclass

import numpy as np

from .simenv import ErrorSignal


@dataclass(frozen=True)
class Gains:
    kp: float
    ki: float
    kd: float

    def as_array(self):
        return np.array([self.kp, self.ki, self.kd])


@dataclass(frozen=True)
class GainBounds:
    kp_max: float = 4.0
    ki_max: float = 0.5
    kd_max: float = 2.0

    def __post_init__(self):
        if not (self.kp_max > 0 and self.ki_max > 0 and self.kd_max > 0):
            raise ValueError("gain bounds must be positive")

    def as_array(self):
        return np.array([self.kp_max, self.ki_max, self.kd_max])


@dataclass(frozen=True)
class FixedPid:
    gains: Gains


@dataclass(frozen=True)
class FrozenSteadyState:
    gains: Gains


@dataclass(frozen=True)
class AdaptivePolicy:
    network: object  # airpid.neural.ActorCritic or None when not loaded


@dataclass(frozen=True)
class Action:
    gains: Gains
    v_cmd: np.ndarray
    raw_action: np.ndarray  # NaN for fixed-gain modes
    log_prob: float          # NaN for fixed-gain modes


class ConfigurationError(RuntimeError):
    pass


def pid_speed(g, e):
    return g.kp * e.pe + g.kd * e.dpe + g.ki * e.ipe


def normalize_speed(v):
    """Squash a speed into (-1, 1) m/s as ``v / (|v| + 1)``."""
    return v / (abs(v) + 1.0)


def command_vector(norm_v, target, position):
    d = np.asarray(target, dtype=float) - np.asarray(position, dtype=float)
    n = np.sqrt(d @ d)
    if n < 1e-9:
        return np.zeros(3)
    return norm_v * (d / n)


def squash_gains(raw, bounds):
    """Map an unbounded 3-vector onto [0, max] per gain with a sigmoid."""
    raw = np.asarray(raw, dtype=float)
    s = 0.5 * (1.0 + np.tanh(0.5 * raw))  # overflow-free logistic
    kp, ki, kd = bounds.as_array() * s
    return Gains(float(kp), float(ki), float(kd))


def act(mode, e, target, position, bounds=GainBounds(), deterministic=True, rng=None):
    """One control step: gains, velocity command and (adaptive only) the raw
    Gaussian action with its log-probability."""
    if isinstance(mode, (FixedPid, FrozenSteadyState)):
        g = mode.gains
        raw = np.full(3, np.nan)
        logp = float("nan")
    elif isinstance(mode, AdaptivePolicy):
        if mode.network is None:
            raise ConfigurationError("adaptive controller has no policy loaded")
        raw, logp = mode.network.policy_action(e, deterministic=deterministic, rng=rng)
        g = squash_gains(raw, bounds)
    else:
        raise ConfigurationError(f"unknown controller mode {mode!r}")
    v = normalize_speed(pid_speed(g, e))
    return Action(g, command_vector(v, target, position), raw, logp)


def extract_steady_gains(network, probe, bounds=GainBounds()):
    """Gains the policy emits (mean action, no sampling) at ``probe``."""
    raw, _ = network.policy_action(probe, deterministic=True)
    return squash_gains(raw, bounds)


def default_probe(settle_tolerance, ipe):
    return ErrorSignal(settle_tolerance, 0.0, ipe)
