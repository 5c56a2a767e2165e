"""Wall-clock comparison of the compiled and pure-Python chain kernels.

    python benchmarks/bench_kernels.py [--steps 200000] [--repeat 3]

Both kernels consume the same PCG64 stream, so the final populations must
agree exactly; the script checks that before reporting timings.
"""

import argparse
import time

import numpy as np

from branchsel import _backend
from branchsel.dynamics import diameter_bound, make_rng
from branchsel.population import delta_population


def time_kernel(name, N, p, steps, seed, repeat):
    kernel = _backend.get_kernel(name)
    best, out = np.inf, None
    for _ in range(repeat):
        pop = delta_population(N)
        rng = make_rng(seed)
        t0 = time.perf_counter()
        res = kernel.run_chain(np.asarray(pop.counts, dtype=np.int64), 0, N, p, steps, 0,
                               rng.bit_generator, diameter_bound(N))
        best = min(best, time.perf_counter() - t0)
        out = res
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--p", type=float, default=0.25)
    ap.add_argument("--Ns", default="1,16,1024,16384")
    args = ap.parse_args(argv)
    names = [n for n in ("cython", "python") if n in _backend.AVAILABLE]
    if len(names) < 2:
        print("compiled kernel not built; only the Python kernel is available")
    print(f"{'N':>7} {'backend':>8} {'seconds':>9} {'steps/s':>11} {'speedup':>8}")
    for N in map(int, args.Ns.split(",")):
        results = {n: time_kernel(n, N, args.p, args.steps, 1, args.repeat) for n in names}
        if len(names) == 2:
            a, b = results["cython"][1], results["python"][1]
            assert np.array_equal(a[0], b[0]) and a[1] == b[1], "kernels diverged"
        base = results["python"][0]
        for n in names:
            t = results[n][0]
            print(f"{N:>7} {n:>8} {t:>9.3f} {args.steps / t:>11.0f} {base / t:>7.1f}x")


if __name__ == "__main__":
    main()
