"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on the same inputs under both backends; the script checks
that the outputs agree before printing timings.
"""
import argparse
import time

import numpy as np

from quasitree import kernels
from quasitree.complex import _csr
from quasitree.hyperbolic import random_geodesic_instance, schottky_instance


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def workloads():
    s = schottky_instance(word_radius=3)
    r = random_geodesic_instance(60, seed=0)
    d = s.modified_table
    rng = np.random.default_rng(0)
    n = 400
    A = np.triu(rng.random((n, n)) < 0.02, 1)
    indptr, indices = _csr(A | A.T)
    blocked = (rng.random(n) < 0.2).astype(np.uint8)
    pairs = [tuple(int(v) for v in rng.integers(n, size=2)) for _ in range(2000)]
    return {
        f"modified_table (n={s.n})": lambda k: k.modified_table(s.dpi_table, s.xi),
        f"modified_table (n={r.n})": lambda k: k.modified_table(r.dpi_table, 2.0),
        f"monotonicity_violations (n={s.n})":
            lambda k: k.monotonicity_violations(d, 4 * s.xi),
        f"bfs_all_pairs (n={n})": lambda k: k.bfs_all_pairs(indptr, indices, n),
        "reachable x2000": lambda k: [k.reachable(indptr, indices, blocked, a, b)
                                      for a, b in pairs],
    }


def same(a, b):
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b, equal_nan=True)
    return a == b


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels are not built; only the numpy fallback is available")
    mods = {name: kernels.load_backend(name) for name in backends}
    print(f"{'kernel':<36}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for label, fn in workloads().items():
        results = {b: best_of(lambda: fn(m), args.repeat) for b, m in mods.items()}
        outs = [out for _, out in results.values()]
        if not all(same(outs[0], o) for o in outs[1:]):
            raise SystemExit(f"backends disagree on {label}")
        cells = "".join(f"{results[b][0] * 1e3:>10.2f}ms" for b in backends)
        speedup = (results["python"][0] / results["cython"][0]) if "cython" in results else 1.0
        print(f"{label:<36}{cells}{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
