"""Time the seesaw restart loop on each available backend.

    python3 benchmarks/bench_seesaw.py [--restarts N] [--repeat R]
"""

import argparse
import time

import numpy as np

from loccsim import kernels
from loccsim.catalog import quad_upb, tiles5
from loccsim.upb import SeesawConfig, check_upb


def run(cset, cfg, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        v = check_upb(cset, cfg)
        best = min(best, time.perf_counter() - t0)
    steps = sum(len(t) for t in v.traces)
    return best, v.max_overlap, steps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--restarts", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    cfg = SeesawConfig(restarts=args.restarts, seed=1)
    start = kernels.backend()
    print(f"backends: {', '.join(kernels.available())} (default {start})")
    print(f"{'set':<12} {'backend':<9} {'best s':>9} {'max overlap':>20} {'half steps':>10}")
    try:
        for cset in (tiles5(), quad_upb()):
            times = {}
            for name in kernels.available():
                kernels.use_backend(name)
                t, ov, steps = run(cset, cfg, args.repeat)
                times[name] = t
                print(f"{cset.name:<12} {name:<9} {t:>9.4f} {ov:>20.16f} {steps:>10}")
            if len(times) == 2:
                print(f"{'':<12} speedup {times['python'] / times['compiled']:.1f}x")
    finally:
        kernels.use_backend(start)


if __name__ == "__main__":
    main()
