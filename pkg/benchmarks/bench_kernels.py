"""Time the compiled and numpy kernel backends on benchmark-shaped inputs.

    python benchmarks/bench_kernels.py [--sizes 400 1600 3200] [--repeat 3]

For each size it times the sampled alignment kernel (on the r-preset point
cloud) and one root split search (on the matching many-dummy call counts),
checks both backends return identical results, and prints one row per case.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from perfdiscrim import benchgen, kernels
from perfdiscrim.dtree import presort
from perfdiscrim.spectral import AlignmentConfig, neighbor_schedule
from perfdiscrim.traces import project_points


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(u, v) for u, v in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[400, 1600, 3200])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    names = sorted(backends)
    header = f"{'kernel':<12}{'N':>7}{'m':>7}" + "".join(f"{n + ' (s)':>14}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}{'equal':>7}"
    print(header)

    dummy_for = {400: "r200", 800: "r400-1", 1200: "r600", 1600: "r800-1", 3200: "r1600", 6400: "r3200"}
    for n in args.sizes:
        ts = benchgen.generate(benchgen.preset(dummy_for.get(n, "r1600"), n_traces=n))
        ps = project_points(ts)
        delta, a = AlignmentConfig().resolve(ps)
        sched = neighbor_schedule(ps, a, seed=0)
        X = np.ascontiguousarray(ps.X)
        y = np.ascontiguousarray(ps.y)

        Z = np.asfortranarray(ts.aux)
        order = presort(Z)
        active = np.ones(n, dtype=np.uint8)
        labels = np.ascontiguousarray(ts.truth, dtype=np.intp)
        k = int(labels.max()) + 1

        cases = {
            "alignment": lambda mod: mod.alignment_approx(X, y, delta, 700.0, sched),
            "best_split": lambda mod: mod.best_split(Z, order, active, labels, k, 5),
        }
        for label, call in cases.items():
            results = {name: best_of(lambda: call(backends[name]), args.repeat) for name in names}
            row = f"{label:<12}{n:>7}{Z.shape[1]:>7}" + "".join(f"{results[x][0]:>14.4f}" for x in names)
            if len(names) == 2:
                (tc, rc), (tp, rp) = results["cython"], results["python"]
                row += f"{tp / tc:>9.1f}x{str(same(rc, rp)):>7}"
            print(row, flush=True)


if __name__ == "__main__":
    main()
