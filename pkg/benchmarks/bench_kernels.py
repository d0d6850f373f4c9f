"""Time each hot kernel on its numba and numpy paths.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both implementations are imported directly, so the AIRPID_NUMBA flag does
not matter here.  The first numba call (compilation or cache load) is done
before timing.
"""
import argparse
import timeit

import numpy as np

from airpid import kernels, neural
from airpid._jit import HAVE_NUMBA


def cases(rng):
    n = 4096
    p = neural.init_params(rng)
    mlp_args = (np.array([0.3, -0.2, 0.1]), p["w1"], p["b1"], p["w2"], p["b2"],
                p["wp"], p["bp"], p["wv"], p["bv"])
    pe = np.abs(rng.normal(0.5, 0.5, 2000))
    pe[1500:] = 0.05
    boxes_lo = rng.uniform(-6, 5, (12, 3))
    return {
        "lag_step": ((rng.normal(size=3), rng.normal(size=3), rng.normal(size=3), np.zeros(3), 0.04, 0.3), 20000),
        "gae": ((rng.normal(size=n), rng.normal(size=n), rng.normal(size=n),
                 (rng.random(n) < 0.01).astype(float), np.zeros(n), 0.99, 0.95), 500),
        "settle_index": ((pe, 0.1, 50), 2000),
        "blocked_mask": ((np.array([48, 48, 10]), np.array([-6.0, -6.0, 0.5]), 0.25,
                          np.array([-6.0, -6.0, 0.5]), np.array([6.0, 6.0, 3.0]),
                          boxes_lo, boxes_lo + 1.0), 20),
        "mlp_forward": (mlp_args, 20000),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path can run")
    print(f"{'kernel':<14}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, (call_args, number) in cases(np.random.default_rng(0)).items():
        loop = getattr(kernels, f"{name}_loop")
        vec = getattr(kernels, f"{name}_numpy")
        loop(*call_args)
        t_loop = min(timeit.repeat(lambda: loop(*call_args), number=number, repeat=args.repeat)) / number
        t_vec = min(timeit.repeat(lambda: vec(*call_args), number=number, repeat=args.repeat)) / number
        print(f"{name:<14}{t_loop * 1e6:>12.2f}{t_vec * 1e6:>12.2f}{t_vec / t_loop:>9.1f}x")


if __name__ == "__main__":
    main()
