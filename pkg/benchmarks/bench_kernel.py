"""Time the drop-tail kernel backends on Scenario 2 arrivals.

    python3 benchmarks/bench_kernel.py [--repeat N] [--scale K]

``--scale`` concatenates K iterations' worth of arrivals (time-shifted) into
one input so the per-call overhead does not dominate.
"""

import argparse
import timeit
from pathlib import Path

import numpy as np

from burstgate import kernel
from burstgate.engine import build_arrivals, iteration_seed, service_times
from burstgate.scenario import load_scenario

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "scenario2_mixed.json"


def arrivals(scale):
    s = load_scenario(SCENARIO)
    span = int(s.duration_s * 1e9)
    t, size = [], []
    for i in range(scale):
        a = build_arrivals(s, iteration_seed(1, i))
        t.append(a.t_ns + i * span)
        size.append(a.size)
    size = np.concatenate(size)
    return s, np.concatenate(t), size, service_times(size, s.link.capacity_bps)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=int, default=10)
    args = ap.parse_args()

    s, t, size, svc = arrivals(args.scale)
    limit = s.buffer.limit
    backends = {"python": kernel.py_droptail}
    if kernel.BACKEND == "cython":
        backends["cython"] = kernel.droptail
    else:
        print("cython extension not built; timing the fallback only")

    ref = kernel.py_droptail(t, size, svc, False, limit)
    print(f"{len(t)} arrivals, buffer {limit} packets, {int((ref < 0).sum())} drops")
    best = {}
    for name, fn in backends.items():
        assert np.array_equal(fn(t, size, svc, False, limit), ref), name
        runs = timeit.repeat(lambda: fn(t, size, svc, False, limit), number=1, repeat=args.repeat)
        best[name] = min(runs)
        print(f"{name:>7}: {best[name] * 1e3:9.2f} ms  ({len(t) / best[name] / 1e6:7.2f} M arrivals/s)")
    if len(best) == 2:
        print(f"speedup: {best['python'] / best['cython']:.1f}x")


if __name__ == "__main__":
    main()
