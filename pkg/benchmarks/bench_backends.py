"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_backends.py [--repeat N]

Prints one row per kernel with the best-of-N wall time for each available
backend and the resulting speed-up.
"""
import argparse
import timeit

import numpy as np

from oagrasp._backend import available_backends


def random_rects(rng, n):
    return np.column_stack([rng.uniform(0, 320, n), rng.uniform(0, 320, n), rng.uniform(10, 80, n),
                            rng.uniform(5, 40, n), rng.uniform(-90, 90, n)])


def cases(rng):
    a, b = random_rects(rng, 200), random_rects(rng, 200)
    boxes = random_rects(rng, 600)
    order = rng.permutation(600)
    gts = random_rects(rng, 20_000)
    return {
        "jaccard_matrix 200x200": lambda k: k.jaccard_matrix(a, b),
        "nms 600 boxes @0.3": lambda k: k.nms(boxes, order, 0.3),
        "match_slots 20k rects": lambda k: k.match_slots(gts, 10, 32.0, 6, 320.0),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available_backends()
    names = sorted(backends)
    print(f"{'kernel':<26}" + "".join(f"{n + ' (s)':>14}" for n in names) + ("   speed-up" if len(names) > 1 else ""))
    for label, fn in cases(np.random.default_rng(0)).items():
        times = {n: min(timeit.repeat(lambda: fn(backends[n]), number=1, repeat=args.repeat)) for n in names}
        row = f"{label:<26}" + "".join(f"{times[n]:>14.5f}" for n in names)
        if "ext" in times and "python" in times:
            row += f"   {times['python'] / times['ext']:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
