"""Flat ``key = value`` run configuration.

Every key has a default; unknown keys are rejected.  Vector values are
written as space-separated numbers.  :func:`dump` produces the snapshot
stored in each run directory, and loading a snapshot reproduces the run.
"""
from dataclasses import asdict, dataclass, fields, replace

from .controller import GainBounds, Gains
from .ppo import PpoHyperparams
from .simenv import SimConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "airpid_out"
    # simulator
    dt: float = 0.04
    tau_v: float = 0.3
    workspace_lo: tuple = (-6.0, -6.0, 0.5)
    workspace_hi: tuple = (6.0, 6.0, 3.0)
    settle_tolerance: float = 0.1
    hold_steps: int = 50
    episode_cap: int = 1000
    wind: tuple = (0.0, 0.0, 0.0)
    step_penalty: float = 0.01
    reward_exp_cap: float = 30.0
    max_command: float = 1.5
    abort_penalty: float = 10.0
    min_leg_distance: float = 0.5
    # ppo
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
    # gain bounds and the fixed-gain baseline
    kp_max: float = 4.0
    ki_max: float = 0.5
    kd_max: float = 2.0
    fixed_kp: float = 2.0
    fixed_ki: float = 0.25
    fixed_kd: float = 1.0
    # evaluation
    eval_episodes: int = 20
    eval_seed: int = 1000
    leg_budget: int = 500
    # planner
    plan_mode: str = "euclid"
    plan_rate_hz: float = 1.0

    def sim(self, seed=None):
        keys = {f.name for f in fields(SimConfig)}
        kw = {k: v for k, v in asdict(self).items() if k in keys}
        kw["seed"] = self.seed if seed is None else seed
        return SimConfig(**kw)

    def ppo(self):
        keys = {f.name for f in fields(PpoHyperparams)}
        return PpoHyperparams(**{k: v for k, v in asdict(self).items() if k in keys})

    def bounds(self):
        return GainBounds(self.kp_max, self.ki_max, self.kd_max)

    def fixed_gains(self):
        return Gains(self.fixed_kp, self.fixed_ki, self.fixed_kd)

    def validate(self):
        """Build every sub-config once so bad values surface as ConfigError."""
        try:
            self.sim()
            self.ppo()
            self.bounds()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.plan_mode not in ("euclid", "uniform"):
            raise ConfigError("plan_mode: must be 'euclid' or 'uniform'")
        if self.eval_episodes < 1 or self.leg_budget < 1:
            raise ConfigError("eval_episodes and leg_budget must be >= 1")
        return self


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(name, text):
    default = _FIELDS[name].default
    parts = text.split()
    try:
        if isinstance(default, tuple):
            if len(parts) != len(default):
                raise ConfigError(f"{name}: expected {len(default)} numbers, got {len(parts)}")
            return tuple(float(p) for p in parts)
        if isinstance(default, bool):
            return text.strip().lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(text.strip())
        if isinstance(default, float):
            return float(text.strip())
        return text.strip()
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text.strip()!r}") from None


def parse(text, base=None, source="<config>"):
    values = {}
    errors = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            errors.append(f"{source}:{lineno}: expected 'key = value'")
        elif key not in _FIELDS:
            errors.append(f"{source}:{lineno}: unknown key {key!r}")
        else:
            try:
                values[key] = _convert(key, value)
            except ConfigError as exc:
                errors.append(f"{source}:{lineno}: {exc}")
    if errors:
        raise ConfigError("\n".join(errors))
    cfg = replace(base or RunConfig(), **values)
    return cfg.validate()


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse(text, source=str(path))


def _fmt(v):
    if isinstance(v, tuple):
        return " ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump(cfg):
    lines = ["# airpid run configuration"]
    for f in fields(RunConfig):
        lines.append(f"{f.name} = {_fmt(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
