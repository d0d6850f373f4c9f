"""Proximal policy optimisation for the gain-scheduling policy.

One actor, horizon ``T`` per iteration, GAE advantages, then ``K`` epochs of
shuffled minibatches on the clipped surrogate + value loss + entropy bonus.
"""
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import neural
from .controller import Action, GainBounds, command_vector, normalize_speed, pid_speed, squash_gains
from .csvio import write_csv
from .kernels import gae
from .rollout import Recorder

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PpoHyperparams:
    clip_epsilon: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    c1: float = 0.5
    c2: float = 0.01
    horizon: int = 1024
    epochs: int = 10
    minibatch: int = 64
    total_timesteps: int = 20000
    lr: float = 3e-4
    reward_scale: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        problems = []
        if not 0 < self.clip_epsilon < 1:
            problems.append("clip_epsilon must be in (0, 1)")
        if not 0 < self.gamma <= 1:
            problems.append("gamma must be in (0, 1]")
        if not 0 <= self.gae_lambda <= 1:
            problems.append("gae_lambda must be in [0, 1]")
        if self.minibatch < 1 or self.minibatch > self.horizon:
            problems.append("minibatch must be in [1, horizon]")
        if self.c1 < 0 or self.c2 < 0:
            problems.append("c1 and c2 must be >= 0")
        if self.epochs < 1 or self.total_timesteps < 1:
            problems.append("epochs and total_timesteps must be >= 1")
        if not self.lr > 0 or not self.reward_scale > 0:
            problems.append("lr and reward_scale must be > 0")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    raw_actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray        # scaled, what the critic sees
    raw_rewards: np.ndarray
    values: np.ndarray
    next_values: np.ndarray    # V of the state after each step
    dones: np.ndarray          # episode boundary after this step
    terminals: np.ndarray      # boundary that is a genuine failure (no bootstrap)
    advantages: np.ndarray = None
    returns: np.ndarray = None

    def __len__(self):
        return len(self.rewards)


@dataclass
class TrainReport:
    iterations: list = field(default_factory=list)
    legs: list = field(default_factory=list)  # (global timestep, LegRecord)


class Runner:
    """Keeps the environment and the current observation across rollouts."""

    def __init__(self, env, bounds):
        self.env = env
        self.bounds = bounds
        self.recorder = Recorder(env.cfg, keep_rows=False)
        self.obs = None
        self.episode_rewards = []
        self._ep_reward = 0.0
        self.closed_legs = []

    def _reset(self):
        self.obs = self.env.reset()
        self._ep_reward = 0.0
        self.recorder.begin_leg(self.env.state, self.env.episodes)


def collect_rollout(runner, net, horizon, rng, reward_scale=1000.0):
    """Run the stochastic policy for exactly ``horizon`` steps."""
    if runner.obs is None:
        runner._reset()
    env, bounds = runner.env, runner.bounds
    buf = RolloutBuffer(
        obs=np.zeros((horizon, 3)), raw_actions=np.zeros((horizon, 3)),
        log_probs=np.zeros(horizon), rewards=np.zeros(horizon), raw_rewards=np.zeros(horizon),
        values=np.zeros(horizon), next_values=np.zeros(horizon),
        dones=np.zeros(horizon), terminals=np.zeros(horizon),
    )
    for t in range(horizon):
        x = neural.normalize_obs(runner.obs)
        mean, log_std, value = net.forward_one(x)
        raw, logp = neural.sample_action(mean, log_std, rng)
        g = squash_gains(raw, bounds)
        s = env.state
        v_cmd = command_vector(normalize_speed(pid_speed(g, runner.obs)), s.target, s.position)
        outcome = env.step(v_cmd)

        buf.obs[t] = x
        buf.raw_actions[t] = raw
        buf.log_probs[t] = logp
        buf.values[t] = value
        buf.raw_rewards[t] = outcome.reward
        buf.rewards[t] = outcome.reward / reward_scale
        runner._ep_reward += outcome.reward

        leg = runner.recorder.record(env.state, Action(g, v_cmd, raw, logp), outcome, env.episodes)
        if leg is not None:
            runner.closed_legs.append((runner.recorder.global_step, leg))

        if outcome.episode_done:
            buf.dones[t] = 1.0
            if outcome.aborted:
                buf.terminals[t] = 1.0
            else:
                # truncation: bootstrap from the state the episode was cut at
                buf.next_values[t] = net.forward_one(neural.normalize_obs(outcome.observation))[2]
            runner.episode_rewards.append(runner._ep_reward)
            runner._reset()
        else:
            runner.obs = outcome.observation
    # fill in V(s_{t+1}) for non-boundary steps
    last_value = net.forward_one(neural.normalize_obs(runner.obs))[2]
    nxt = np.append(buf.values[1:], last_value)
    mask = buf.dones == 0.0
    buf.next_values[mask] = nxt[mask]
    return buf


def compute_gae(buf, gamma, lam, normalize=True):
    """Fill ``buf.advantages`` and ``buf.returns``; returns both.

    Value targets are ``advantage + value`` before normalisation; advantages
    are then standardised over the batch when ``normalize`` is set.
    """
    adv = gae(buf.rewards, buf.values, buf.next_values, buf.dones, buf.terminals,
              float(gamma), float(lam))
    buf.returns = adv + buf.values
    if normalize and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    buf.advantages = adv
    return buf.advantages, buf.returns


def clipped_surrogate(ratio, advantage, eps):
    """Per-sample ``min(r A, clip(r, 1-eps, 1+eps) A)``."""
    ratio = np.asarray(ratio, dtype=float)
    advantage = np.asarray(advantage, dtype=float)
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantage)


def value_loss(v_pred, v_target):
    d = np.asarray(v_pred, dtype=float) - np.asarray(v_target, dtype=float)
    return float(np.mean(d * d))


def combined_objective(surrogate, vloss, entropy, c1, c2):
    """Quantity PPO maximises; the optimiser descends its negation."""
    return surrogate - c1 * vloss + c2 * entropy


def ppo_loss_and_grad(params, obs, actions, old_log_probs, advantages, returns, hp):
    """Negated combined objective on one minibatch and its exact gradient."""
    b = len(advantages)
    mean, log_std, value, trace = neural.forward(params, obs)
    sigma_inv = np.exp(-log_std)
    z = (actions - mean) * sigma_inv
    logp = np.sum(-0.5 * z * z - log_std - 0.5 * neural.LOG_2PI, axis=1)
    ratio = np.exp(logp - old_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - hp.clip_epsilon, 1.0 + hp.clip_epsilon) * advantages
    surr = np.minimum(unclipped, clipped)
    surrogate = float(surr.mean())
    vloss = value_loss(value, returns)
    entropy = neural.gaussian_entropy(log_std)
    objective = combined_objective(surrogate, vloss, entropy, hp.c1, hp.c2)

    # d(-objective)/d logp_i : only samples where the unclipped branch is active
    active = unclipped <= clipped
    d_logp = np.where(active, -unclipped / b, 0.0)
    d_mean = d_logp[:, None] * z * sigma_inv
    d_log_std = (d_logp[:, None] * (z * z - 1.0)).sum(axis=0) - hp.c2 * np.ones_like(log_std)
    d_value = hp.c1 * 2.0 * (value - returns) / b
    grads = neural.backward(params, trace, d_mean, d_log_std, d_value)

    stats = {
        "loss": -objective,
        "surrogate": surrogate,
        "value_loss": vloss,
        "entropy": entropy,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > hp.clip_epsilon)),
        "mean_ratio": float(ratio.mean()),
    }
    return -objective, grads, stats


class TrainingDiverged(FloatingPointError):
    pass


def _dump_minibatch(out_dir, it, epoch, **arrays):
    if out_dir is None:
        return None
    path = os.path.join(out_dir, f"diverged_it{it}_ep{epoch}.npz")
    np.savez(path, **arrays)
    return path


def update(params, adam, buf, hp, rng, iteration=0, out_dir=None):
    """K epochs of minibatch Adam steps on one rollout; returns new params and
    epoch-averaged statistics."""
    n = len(buf)
    sums = {"surrogate": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_fraction": 0.0}
    count = 0
    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, hp.minibatch):
            idx = order[lo:lo + hp.minibatch]
            mb = dict(obs=buf.obs[idx], actions=buf.raw_actions[idx], old_log_probs=buf.log_probs[idx],
                      advantages=buf.advantages[idx], returns=buf.returns[idx])
            loss, grads, stats = ppo_loss_and_grad(params, **mb, hp=hp)
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                path = _dump_minibatch(out_dir, iteration, epoch, **mb)
                raise TrainingDiverged(
                    f"non-finite loss at iteration {iteration} epoch {epoch}; minibatch dumped to {path}")
            params = neural.adam_step(adam, params, grads)
            for k in sums:
                sums[k] += stats[k]
            count += 1
    return params, {k: v / count for k, v in sums.items()}


def _median_or_none(values):
    values = [v for v in values if v is not None and math.isfinite(v)]
    return float(np.median(values)) if values else None


def train(env_factory, hp=PpoHyperparams(), bounds=GainBounds(), out_dir=None, on_iteration=None):
    """Full training run.  Deterministic for a fixed ``hp.seed`` and env config.

    Writes ``checkpoint_XXXX.airppo``, ``training.csv`` and
    ``training_legs.csv`` to ``out_dir`` when given.
    """
    rng = np.random.default_rng([hp.seed, 1])
    net = neural.ActorCritic.initialise(np.random.default_rng([hp.seed, 0]))
    adam = neural.AdamState.for_params(net.params, lr=hp.lr)
    runner = Runner(env_factory(), bounds)
    report = TrainReport()
    consumed = 0
    iteration = 0
    training_rows = []
    while consumed < hp.total_timesteps:
        iteration += 1
        horizon = hp.horizon
        buf = collect_rollout(runner, net, horizon, rng, hp.reward_scale)
        consumed += horizon
        compute_gae(buf, hp.gamma, hp.gae_lambda)
        net.params, stats = update(net.params, adam, buf, hp, rng, iteration, out_dir)

        legs = runner.closed_legs
        runner.closed_legs = []
        report.legs.extend(legs)
        speeds = [leg.metrics.effective_speed for _, leg in legs]
        rec = {
            "iteration": iteration,
            "timestep": consumed,
            "mean_reward_raw": float(buf.raw_rewards.mean()),
            "mean_leg_effective_speed": float(np.mean(speeds)) if speeds else None,
            "settling_time_s": _median_or_none([l.metrics.settling_time for _, l in legs]),
            "overshoot_m": _median_or_none([l.metrics.overshoot for _, l in legs]),
            **stats,
            "legs": len(legs),
        }
        report.iterations.append(rec)
        training_rows.append([rec[c] for c in (
            "iteration", "timestep", "mean_reward_raw", "mean_leg_effective_speed",
            "settling_time_s", "overshoot_m", "surrogate", "value_loss", "entropy",
            "clip_fraction")])
        log.info("iter %d  t=%d  legs=%d  speed=%s  vloss=%.4g", iteration, consumed, len(legs),
                 rec["mean_leg_effective_speed"], stats["value_loss"])
        if out_dir is not None:
            neural.save_checkpoint(os.path.join(out_dir, f"checkpoint_{iteration:04d}.airppo"), net.params)
            write_csv(os.path.join(out_dir, "training.csv"), "training", training_rows)
            write_csv(os.path.join(out_dir, "training_legs.csv"), "training_legs", leg_stream_rows(report))
        if on_iteration is not None:
            on_iteration(rec, net)
    if out_dir is not None:
        neural.save_checkpoint(os.path.join(out_dir, "final.airppo"), net.params)
    return net.params, report


def leg_stream_rows(report):
    return [[leg.leg_id, ts, leg.completed, _dist(leg), leg.metrics.effective_speed,
             leg.metrics.settling_time, leg.metrics.overshoot, leg.metrics.final_error]
            for ts, leg in report.legs]


def _dist(leg):
    return float(np.linalg.norm(leg.target - leg.start))
