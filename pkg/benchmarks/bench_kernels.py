"""Compiled vs numpy particle kernels.

    python benchmarks/bench_kernels.py [--particles 30] [--points 120] [--repeat 20]

Prints the best-of-``repeat`` time per call for each backend and the speed-up.
"""
import argparse
import timeit

import numpy as np

from gridid.kernels import _pykernels

try:
    from gridid.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

H = 20


def inputs(P, N, seed=0):
    r = np.random.default_rng(seed)
    X = r.normal(0, 0.5, (P, 5 * H + 9))
    tau = np.linspace(-1, 1, N)
    pin = np.where(tau > -0.99, -1.0, 0.0)
    targets = r.normal(0, 0.3, (N // 2, 2))
    consts = np.array([2.5, 0.3, -0.2, 0.5, 0.0, 0.1, 0.2])
    weights = np.exp(r.uniform(-1, 1, (P, 4)))
    return X, tau, pin, -0.1 * (pin < 0), targets, consts, weights


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=30)
    ap.add_argument("--points", type=int, default=120)
    ap.add_argument("--repeat", type=int, default=20)
    a = ap.parse_args(argv)
    X, tau, pin, p_phys, targets, consts, weights = inputs(a.particles, a.points)
    calls = {
        "sse_grad": lambda k: k.sse_grad(X, H, tau, pin, p_phys, targets, consts, weights),
        "predict": lambda k: k.predict(X, H, tau, pin),
    }
    print(f"P={a.particles} N={a.points} H={H}, best of {a.repeat}")
    for name, f in calls.items():
        row = {}
        for label, mod in (("numpy", _pykernels), ("cython", _ckernels)):
            if mod is None:
                continue
            n = 5
            row[label] = min(timeit.repeat(lambda: f(mod), number=n, repeat=a.repeat)) / n
        line = "  ".join(f"{k} {v * 1e3:8.3f} ms" for k, v in row.items())
        if len(row) == 2:
            line += f"  speed-up {row['numpy'] / row['cython']:.2f}x"
        print(f"{name:9s} {line}")


if __name__ == "__main__":
    main()
