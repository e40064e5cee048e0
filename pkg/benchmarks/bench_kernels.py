"""Time the numba kernels against their numpy mirrors.

    python3 benchmarks/bench_kernels.py [--instances 2000] [--rows 200000] [--repeat 3]

The first numba call per signature compiles (or loads the on-disk cache);
a warm-up call is made before timing.
"""

import argparse
import json
import time

import numpy as np

from constrained_risk import kernels
from constrained_risk.loss import absolute, power, squared, threshold
from constrained_risk.simulate import random_instances


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def oracle_case(loss, convex, count):
    _, p0, p1, t0, t1, delta = random_instances(count, 0, loss)
    D = np.abs(t1 - t0)
    code, param = loss.kernel
    return lambda impl: (lambda: impl.oracle_batch(p0, p1, D, delta, code, param, convex))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=2000)
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--n", type=int, default=50)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args(argv)

    if kernels.numba_impl is None:
        parser.error("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    x = rng.normal(size=(args.rows // args.n, args.n))
    cases = {
        f"oracle sq ({args.instances})": oracle_case(squared(), True, args.instances),
        f"oracle abs ({args.instances})": oracle_case(absolute(), True, args.instances),
        f"oracle pow:1.5 ({args.instances // 10})": oracle_case(power(1.5), True,
                                                                args.instances // 10),
        f"oracle thresh ({args.instances // 10})": oracle_case(threshold(0.4), False,
                                                               args.instances // 10),
        f"hodges losses {x.shape}": lambda impl: (
            lambda: impl.estimator_losses(x, 0.1, 0.0, kernels.CODE_THRESHOLD, 0.1)),
        f"gauss log-LR {x.shape}": lambda impl: (
            lambda: impl.gauss_loglr(x, 0.1, 1.0, 0.0, 1.0)),
    }
    results = []
    for name, make in cases.items():
        t_nb = best_of(make(kernels.numba_impl), args.repeat)
        t_np = best_of(make(kernels.numpy_impl), args.repeat)
        results.append({"case": name, "numba_s": t_nb, "numpy_s": t_np,
                        "speedup": t_np / t_nb if t_nb > 0 else float("inf")})

    if args.json:
        print(json.dumps(results, indent=2, sort_keys=True))
        return
    width = max(len(r["case"]) for r in results)
    print(f"{'case':<{width}}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speedup':>8}")
    for r in results:
        print(f"{r['case']:<{width}}  {r['numba_s']:>10.4f}  {r['numpy_s']:>10.4f}  "
              f"{r['speedup']:>7.1f}x")


if __name__ == "__main__":
    main()
