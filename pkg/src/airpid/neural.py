"""Shared-trunk actor-critic MLP with hand-written backprop and Adam.

Layout (row-vector convention, ``z = x @ W + b``)::

    obs(3) -> tanh(64) -> tanh(64) -+-> policy mean (3)   + free log_std (3)
                                    +-> value (1)

Everything is float64.  Checkpoints are a small binary format, see
:func:`save_checkpoint`.
"""
import struct
from dataclasses import dataclass

import numpy as np

from .kernels import mlp_forward

OBS_DIM = 3
HIDDEN = 64
ACT_DIM = 3
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
OBS_SCALE = np.array([10.0, 2.0, 50.0])  # pe, dpe, ipe

PARAM_ORDER = ("w1", "b1", "w2", "b2", "wp", "bp", "log_std", "wv", "bv")
LOG_2PI = float(np.log(2.0 * np.pi))


def param_shapes(obs_dim=OBS_DIM, hidden=HIDDEN, act_dim=ACT_DIM):
    return {
        "w1": (obs_dim, hidden),
        "b1": (hidden,),
        "w2": (hidden, hidden),
        "b2": (hidden,),
        "wp": (hidden, act_dim),
        "bp": (act_dim,),
        "log_std": (act_dim,),
        "wv": (hidden, 1),
        "bv": (1,),
    }


def normalize_obs(e):
    """Fixed affine scaling of an ErrorSignal (or an (..., 3) array)."""
    arr = e.as_array() if hasattr(e, "as_array") else np.asarray(e, dtype=float)
    return arr / OBS_SCALE


def _orthogonal(shape, gain, rng):
    a = rng.standard_normal((max(shape), min(shape)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[: shape[0], : shape[1]]


def init_params(rng, obs_dim=OBS_DIM, hidden=HIDDEN, act_dim=ACT_DIM):
    shapes = param_shapes(obs_dim, hidden, act_dim)
    p = {k: np.zeros(s) for k, s in shapes.items()}
    p["w1"] = _orthogonal(shapes["w1"], np.sqrt(2.0), rng)
    p["w2"] = _orthogonal(shapes["w2"], np.sqrt(2.0), rng)
    p["wp"] = _orthogonal(shapes["wp"], 0.01, rng)
    p["wv"] = _orthogonal(shapes["wv"], 1.0, rng)
    return p


def zeros_like(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


def check_finite(params):
    for k in PARAM_ORDER:
        if not np.all(np.isfinite(params[k])):
            raise FloatingPointError(f"non-finite values in parameter {k!r}")


@dataclass
class ForwardTrace:
    x: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    log_std_raw: np.ndarray


def forward(params, obs):
    """Batched forward pass on normalised observations of shape (B, 3).

    Returns ``(mean (B,3), log_std (3,), value (B,), trace)``.
    """
    check_finite(params)
    x = np.atleast_2d(np.asarray(obs, dtype=float))
    h1 = np.tanh(x @ params["w1"] + params["b1"])
    h2 = np.tanh(h1 @ params["w2"] + params["b2"])
    mean = h2 @ params["wp"] + params["bp"]
    value = (h2 @ params["wv"] + params["bv"])[:, 0]
    log_std = np.clip(params["log_std"], LOG_STD_MIN, LOG_STD_MAX)
    return mean, log_std, value, ForwardTrace(x, h1, h2, params["log_std"])


def backward(params, trace, d_mean, d_log_std, d_value):
    """Reverse pass given upstream gradients of a scalar loss.

    ``d_mean`` is (B, 3), ``d_log_std`` is (3,) (already summed over the
    batch), ``d_value`` is (B,).  Returns a dict shaped like ``params``.
    """
    b = trace.x.shape[0]
    d_mean = np.asarray(d_mean, dtype=float).reshape(b, -1)
    d_value = np.asarray(d_value, dtype=float).reshape(b, 1)
    if d_mean.shape[1] != params["wp"].shape[1]:
        raise ValueError(f"d_mean has {d_mean.shape[1]} columns, expected {params['wp'].shape[1]}")
    h1, h2 = trace.h1, trace.h2
    g = {}
    g["wp"] = h2.T @ d_mean
    g["bp"] = d_mean.sum(axis=0)
    g["wv"] = h2.T @ d_value
    g["bv"] = d_value.sum(axis=0)
    inside = (trace.log_std_raw >= LOG_STD_MIN) & (trace.log_std_raw <= LOG_STD_MAX)
    g["log_std"] = np.where(inside, np.asarray(d_log_std, dtype=float), 0.0)

    dz2 = (d_mean @ params["wp"].T + d_value @ params["wv"].T) * (1.0 - h2 * h2)
    g["w2"] = h1.T @ dz2
    g["b2"] = dz2.sum(axis=0)
    dz1 = (dz2 @ params["w2"].T) * (1.0 - h1 * h1)
    g["w1"] = trace.x.T @ dz1
    g["b1"] = dz1.sum(axis=0)
    return g


def gaussian_log_prob(action, mean, log_std):
    z = (action - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * LOG_2PI, axis=-1)


def gaussian_entropy(log_std):
    return float(np.sum(log_std + 0.5 * (LOG_2PI + 1.0)))


def sample_action(mean, log_std, rng, deterministic=False):
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    if deterministic:
        a = np.array(mean, dtype=float)
    else:
        a = mean + np.exp(log_std) * rng.standard_normal(np.shape(mean))
    return a, float(gaussian_log_prob(a, mean, log_std))


class ActorCritic:
    """Parameter container with the single-step helpers rollouts need."""

    def __init__(self, params):
        self.params = params

    @classmethod
    def initialise(cls, seed):
        return cls(init_params(np.random.default_rng(seed)))

    def forward_one(self, obs):
        p = self.params
        mean, value = mlp_forward(
            np.ascontiguousarray(obs, dtype=float),
            p["w1"], p["b1"], p["w2"], p["b2"], p["wp"], p["bp"], p["wv"], p["bv"],
        )
        return mean, np.clip(p["log_std"], LOG_STD_MIN, LOG_STD_MAX), float(value)

    def value(self, e):
        return self.forward_one(normalize_obs(e))[2]

    def policy_action(self, e, deterministic=True, rng=None):
        mean, log_std, _ = self.forward_one(normalize_obs(e))
        return sample_action(mean, log_std, rng, deterministic=deterministic)


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = None
    v: dict = None

    @classmethod
    def for_params(cls, params, lr=3e-4):
        return cls(lr=lr, m=zeros_like(params), v=zeros_like(params))


def adam_step(adam, params, grads):
    """Bias-corrected Adam descent step. Mutates ``adam``, returns new params."""
    adam.step += 1
    c1 = 1.0 - adam.beta1 ** adam.step
    c2 = 1.0 - adam.beta2 ** adam.step
    out = {}
    for k in PARAM_ORDER:
        g = grads[k]
        if g.shape != params[k].shape:
            raise ValueError(f"gradient for {k} has shape {g.shape}, expected {params[k].shape}")
        adam.m[k] = adam.beta1 * adam.m[k] + (1.0 - adam.beta1) * g
        adam.v[k] = adam.beta2 * adam.v[k] + (1.0 - adam.beta2) * g * g
        m_hat = adam.m[k] / c1
        v_hat = adam.v[k] / c2
        out[k] = params[k] - adam.lr * m_hat / (np.sqrt(v_hat) + adam.eps)
    out["log_std"] = np.clip(out["log_std"], LOG_STD_MIN, LOG_STD_MAX)
    return out


# -- checkpoint format ----------------------------------------------------------
#
#   7 bytes   magic b"AIRPPO1"
#   4 x u32   obs_dim, hidden, hidden, act_dim      (little endian)
#   f64 LE    parameters in PARAM_ORDER, each flattened row-major

MAGIC = b"AIRPPO1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params):
    obs_dim, hidden = params["w1"].shape
    act_dim = params["wp"].shape[1]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<4I", obs_dim, hidden, params["w2"].shape[1], act_dim))
        for k in PARAM_ORDER:
            fh.write(np.ascontiguousarray(params[k], dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    off = len(MAGIC)
    if len(blob) < off + 16:
        raise CheckpointError(f"{path}: truncated header")
    obs_dim, h1, h2, act_dim = struct.unpack_from("<4I", blob, off)
    off += 16
    if (obs_dim, h1, h2, act_dim) != (OBS_DIM, HIDDEN, HIDDEN, ACT_DIM):
        raise CheckpointError(f"{path}: unsupported layer dims {(obs_dim, h1, h2, act_dim)}")
    shapes = param_shapes(obs_dim, h1, act_dim)
    expected = off + 8 * sum(int(np.prod(s)) for s in shapes.values())
    if len(blob) != expected:
        raise CheckpointError(f"{path}: size {len(blob)} bytes, expected {expected}")
    params = {}
    for k in PARAM_ORDER:
        n = int(np.prod(shapes[k]))
        params[k] = np.frombuffer(blob, dtype="<f8", count=n, offset=off).astype(float).reshape(shapes[k])
        off += 8 * n
    try:
        check_finite(params)
    except FloatingPointError as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    return params
