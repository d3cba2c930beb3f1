"""Time the compiled and pure-Python boundary reductions on the same complexes.

    python3 benchmarks/bench_reduction.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from pllay import reduction
from pllay.complexes import cubical_sublevel, rips
from pllay.data import PointCloud
from pllay.persistence import compute_persistence


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    for n in (20, 40, 80):
        yield f"cubical {n}x{n}", cubical_sublevel(rng.random((n, n)))
    for n in (20, 40):
        yield f"rips n={n}", rips(PointCloud(rng.random((n, 2))), 2)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if reduction.reduce_compiled is None:
        raise SystemExit("compiled kernel not built; run pip install -e . --no-build-isolation")
    rng = np.random.default_rng(0)
    print(f"{'complex':<16}{'cells':>8}{'compiled ms':>14}{'python ms':>12}{'speedup':>9}")
    for name, cx in cases(rng):
        a = compute_persistence(cx, False, reduction.reduce_compiled)
        b = compute_persistence(cx, False, reduction.reduce_python)
        assert np.array_equal(a.births, b.births) and np.array_equal(a.deaths, b.deaths)
        tc = best_of(lambda: compute_persistence(cx, False, reduction.reduce_compiled), args.repeat)
        tp = best_of(lambda: compute_persistence(cx, False, reduction.reduce_python), args.repeat)
        print(f"{name:<16}{len(cx):>8}{tc * 1e3:>14.2f}{tp * 1e3:>12.2f}{tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
