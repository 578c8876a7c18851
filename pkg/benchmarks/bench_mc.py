"""Compare the compiled and numpy exit kernels on the same workload.

Run ``python benchmarks/bench_mc.py``.  The compiled path is unavailable when
``SBMKIT_DISABLE_NUMBA=1`` is set; the script then times the numpy path only.
"""
import argparse
import time

import numpy as np

from sbmkit import RandomSource, make_spec, pure_power
from sbmkit._jit import USE_NUMBA
from sbmkit.simulate import Domain, _run, choose_dt, make_sampler


def timed(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def bench(label, spec, d, n, repeat):
    dt = choose_dt(spec, 1.0)
    smp = make_sampler(spec)
    dom = Domain.ball(np.zeros(d), 1.0)
    steps = 4 * int(20 / dt)

    def go(backend):
        return _run(smp, dt, np.zeros(d), dom, (1, 2, 4), steps, n, RandomSource(1), backend=backend)

    backends = ["numba", "numpy"] if USE_NUMBA else ["numpy"]
    if USE_NUMBA:
        go("numba")  # compile outside the timed region
    results = {b: timed(lambda b=b: go(b), repeat) for b in backends}
    line = f"{label:<28} n={n:<7}"
    for b, (sec, _) in results.items():
        line += f" {b} {sec:7.3f}s"
    if len(results) == 2:
        a, b = (results[k][1] for k in backends)
        same = np.array_equal(a[0], b[0])
        line += f"  speedup {results['numpy'][0] / results['numba'][0]:5.1f}x  exit steps equal: {same}"
    print(line)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=20000, help="paths per run")
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    bench("pure_power(1), d=1", pure_power(1.0), 1, args.n, args.repeat)
    bench("sum_of_powers(0.3,0.7), d=2", make_spec("sum_of_powers", alpha=0.3, beta=0.7), 2, args.n, args.repeat)
    bench("log_cosh(0.5), d=1", make_spec("log_cosh", alpha=0.5), 1, args.n, args.repeat)


if __name__ == "__main__":
    main()
