"""Time the compiled and numpy kernel backends on one population step.

Usage: ``python3 benchmarks/bench_kernels.py [--pop 1000] [--m 600] [--repeat 20]``
"""
import argparse
import math
import timeit

import numpy as np

from qieo_l0 import kernels


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pop", type=int, default=1000)
    ap.add_argument("--m", type=int, default=600)
    ap.add_argument("--budget", type=int, default=60)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    angles = rng.uniform(0.01 * math.pi, 0.49 * math.pi, (args.pop, args.m))
    best = (rng.random(args.m) < args.budget / args.m).astype(np.uint8)
    backends = ["python"]
    try:
        kernels.backend_module("cython")
        backends.append("cython")
    except ImportError:
        print("compiled extension not built; timing the numpy backend only")

    bits = kernels.measure_population(angles, 1, 0, backend="python")
    ops = {
        "measure": lambda b: kernels.measure_population(angles, 1, 0, backend=b),
        "repair": lambda b: kernels.repair_population(bits, args.budget, 1, 0, backend=b),
        "rotate": lambda b: kernels.rotate_population(angles, bits, best, 0.02 * math.pi, 0.01 * math.pi, 0.49 * math.pi, backend=b),
    }
    print(f"population {args.pop} x {args.m} qubits, budget {args.budget}, best of {args.repeat} (ms)")
    print(f"{'kernel':<8} " + " ".join(f"{b:>9}" for b in backends) + ("    speedup" if len(backends) > 1 else ""))
    for name, fn in ops.items():
        ms = [min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) * 1e3 for b in backends]
        row = f"{name:<8} " + " ".join(f"{t:9.2f}" for t in ms)
        if len(ms) > 1:
            row += f"    {ms[0] / ms[1]:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
