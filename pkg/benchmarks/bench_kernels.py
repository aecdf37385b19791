"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from mtgg import kernels
from mtgg.policy import AffinePolicy, GameParams, _coeffs
from mtgg.simulation import make_regular_graph


def roots_case(m=10_000):
    params = GameParams(2.0, 1.0, 1.0, 1.0, 10, 4)
    c = _coeffs(params, AffinePolicy(1.0, -1.2, 0.0))
    y2 = np.random.default_rng(0).normal(0.0, np.sqrt(2.0), m)
    return lambda be: be.switching_roots(y2, *c.as_tuple(), 1e-10)


def payoff_case(trials=4096, n=10, k=4):
    g = make_regular_graph(n, k)
    rng = np.random.default_rng(1)
    actions = rng.integers(1, 3, (trials, n)).astype(np.int8)
    theta = rng.standard_normal((trials, 2))
    return lambda be: be.local_payoffs(actions, theta, g.indptr, g.indices, n)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = kernels.available_backends()
    if "cython" not in names:
        print("compiled backend not built; timing the fallback only")
    cases = {"switching_roots (10k y2)": roots_case(), "local_payoffs (4096 trials)": payoff_case()}
    for label, fn in cases.items():
        times = {}
        for name in names:
            be = kernels.get_backend(name)
            fn(be)  # warm-up
            times[name] = min(timeit.repeat(lambda: fn(be), number=1, repeat=args.repeat))
        line = "  ".join(f"{nm}={t * 1e3:8.2f} ms" for nm, t in times.items())
        if len(times) == 2:
            line += f"  speedup={times['python'] / times['cython']:.1f}x"
        print(f"{label:30s} {line}")


if __name__ == "__main__":
    main()
