"""Trial kernel timing: numba (parallel) against the pure-numpy fallback.

    python benchmarks/bench_kernels.py --trials 1000000 --repeat 3
"""

import argparse
import time

import numpy as np

from tsqm.ensemble import simulate_raw
from tsqm.experiments import builtin


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("experiments", nargs="*", default=["three-box-iv", "spin-y", "entangled-pair"])
    args = ap.parse_args()

    print(f"{'experiment':<16}{'numba s':>10}{'numpy s':>10}{'speedup':>9}  identical")
    for name in args.experiments:
        spec = builtin(name).spec
        simulate_raw(spec, 16, args.seed, backend="numba")  # compile outside the timing
        t_nb, a = best_of(lambda: simulate_raw(spec, args.trials, args.seed, backend="numba", threads=args.threads),
                          args.repeat)
        t_np, b = best_of(lambda: simulate_raw(spec, args.trials, args.seed, backend="numpy"), args.repeat)
        same = (np.array_equal(a.outcomes, b.outcomes) and np.array_equal(a.clicks, b.clicks)
                and np.array_equal(a.post, b.post))
        print(f"{name:<16}{t_nb:>10.3f}{t_np:>10.3f}{t_np / t_nb:>9.1f}  {same}")


if __name__ == "__main__":
    main()
