"""Hot numeric kernels.

Every kernel exists twice: ``*_loop`` is written as explicit loops and is
compiled by numba, ``*_numpy`` is the vectorised fallback.  The public name
(``lag_step``, ``gae`` ...) is bound to whichever path ``AIRPID_NUMBA``
selects; both are kept importable so tests and the benchmark can compare
them directly.
"""
import numpy as np

from ._jit import njit, select


# -- first-order velocity lag + semi-implicit Euler -------------------------

def _lag_step_loop(pos, vel, cmd, wind, dt, tau):
    new_pos = np.empty(3)
    new_vel = np.empty(3)
    for i in range(3):
        v = vel[i] + dt * ((cmd[i] + wind[i]) - vel[i]) / tau
        new_vel[i] = v
        new_pos[i] = pos[i] + dt * v
    return new_pos, new_vel


def _lag_step_numpy(pos, vel, cmd, wind, dt, tau):
    new_vel = vel + dt * ((cmd + wind) - vel) / tau
    return pos + dt * new_vel, new_vel


# -- generalised advantage estimation ---------------------------------------

def _gae_loop(rewards, values, next_values, dones, terminals, gamma, lam):
    n = rewards.shape[0]
    adv = np.empty(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * next_values[t] * (1.0 - terminals[t]) - values[t]
        last = delta + gamma * lam * (1.0 - dones[t]) * last
        adv[t] = last
    return adv


def _gae_numpy(rewards, values, next_values, dones, terminals, gamma, lam):
    # the recurrence is inherently sequential; only the residuals vectorise
    deltas = rewards + gamma * next_values * (1.0 - terminals) - values
    decay = gamma * lam * (1.0 - dones)
    adv = np.empty_like(deltas)
    last = 0.0
    for t in range(deltas.shape[0] - 1, -1, -1):
        last = deltas[t] + decay[t] * last
        adv[t] = last
    return adv


# -- settling scan: first index opening a run of `hold` in-tolerance steps ---

def _settle_index_loop(pe, tol, hold):
    run = 0
    for i in range(pe.shape[0]):
        if pe[i] <= tol:
            run += 1
            if run == hold:
                return i - hold + 1
        else:
            run = 0
    return -1


def _settle_index_numpy(pe, tol, hold):
    inside = (pe <= tol).astype(np.int64)
    if inside.shape[0] < hold:
        return -1
    csum = np.concatenate((np.zeros(1, dtype=np.int64), np.cumsum(inside)))
    window = csum[hold:] - csum[:-hold]
    hits = np.flatnonzero(window == hold)
    return int(hits[0]) if hits.size else -1


# -- voxel occupancy: center outside workspace or strictly inside a box -----

def _blocked_mask_loop(dims, origin, resolution, lo, hi, box_lo, box_hi):
    nx, ny, nz = dims[0], dims[1], dims[2]
    out = np.zeros((nx, ny, nz), dtype=np.bool_)
    c = np.empty(3)
    for i in range(nx):
        c[0] = origin[0] + (i + 0.5) * resolution
        for j in range(ny):
            c[1] = origin[1] + (j + 0.5) * resolution
            for k in range(nz):
                c[2] = origin[2] + (k + 0.5) * resolution
                outside = False
                for a in range(3):
                    if c[a] < lo[a] or c[a] > hi[a]:
                        outside = True
                if outside:
                    out[i, j, k] = True
                    continue
                for b in range(box_lo.shape[0]):
                    hit = True
                    for a in range(3):
                        if c[a] <= box_lo[b, a] or c[a] >= box_hi[b, a]:
                            hit = False
                            break
                    if hit:
                        out[i, j, k] = True
                        break
    return out


def _blocked_mask_numpy(dims, origin, resolution, lo, hi, box_lo, box_hi):
    axes = [origin[a] + (np.arange(dims[a]) + 0.5) * resolution for a in range(3)]
    cx, cy, cz = np.meshgrid(*axes, indexing="ij")
    centers = np.stack((cx, cy, cz), axis=-1)
    out = np.any((centers < lo) | (centers > hi), axis=-1)
    for b in range(box_lo.shape[0]):
        out |= np.all((centers > box_lo[b]) & (centers < box_hi[b]), axis=-1)
    return out


# -- single-observation actor-critic forward pass ----------------------------

def _mlp_forward_loop(x, w1, b1, w2, b2, wp, bp, wv, bv):
    h = w1.shape[1]
    h1 = np.empty(h)
    for j in range(h):
        s = b1[j]
        for i in range(x.shape[0]):
            s += x[i] * w1[i, j]
        h1[j] = np.tanh(s)
    h2 = np.empty(w2.shape[1])
    for j in range(w2.shape[1]):
        s = b2[j]
        for i in range(h):
            s += h1[i] * w2[i, j]
        h2[j] = np.tanh(s)
    mean = np.empty(wp.shape[1])
    for j in range(wp.shape[1]):
        s = bp[j]
        for i in range(h2.shape[0]):
            s += h2[i] * wp[i, j]
        mean[j] = s
    v = bv[0]
    for i in range(h2.shape[0]):
        v += h2[i] * wv[i, 0]
    return mean, v


def _mlp_forward_numpy(x, w1, b1, w2, b2, wp, bp, wv, bv):
    h1 = np.tanh(x @ w1 + b1)
    h2 = np.tanh(h1 @ w2 + b2)
    return h2 @ wp + bp, float((h2 @ wv + bv)[0])


lag_step_loop = njit(_lag_step_loop)
gae_loop = njit(_gae_loop)
settle_index_loop = njit(_settle_index_loop)
blocked_mask_loop = njit(_blocked_mask_loop)
mlp_forward_loop = njit(_mlp_forward_loop)

lag_step_numpy = _lag_step_numpy
gae_numpy = _gae_numpy
settle_index_numpy = _settle_index_numpy
blocked_mask_numpy = _blocked_mask_numpy
mlp_forward_numpy = _mlp_forward_numpy

lag_step = select(lag_step_loop, lag_step_numpy)
gae = select(gae_loop, gae_numpy)
settle_index = select(settle_index_loop, settle_index_numpy)
blocked_mask = select(blocked_mask_loop, blocked_mask_numpy)
mlp_forward = select(mlp_forward_loop, mlp_forward_numpy)
