"""Compare the compiled tracing kernel with its pure-Python twin.

    python3 benchmarks/bench_trace.py [--shots 2000] [--length 20]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from geoloop import _tracecore_py, trace
from geoloop.tetra import FACES, regular_from_angle, regular_from_edge
from geoloop.trace import interior_point, kernel_tables


def _workload(t, shots: int, length: float, seed: int):
    rng = np.random.default_rng(seed)
    charts, normals, ginv, nbr, nbr_edge = kernel_tables(t)
    k = int(t.kappa)
    jobs = []
    for _ in range(shots):
        fi = int(rng.integers(4))
        start = interior_point(t, FACES[fi], tuple(rng.uniform(0.2, 1.0, size=3)))
        psi = rng.uniform(0, 2 * math.pi)
        d = trace.direction_from_angle(t, start, psi)
        jobs.append((k, charts, normals, ginv, nbr, nbr_edge, fi, start.position.hom, d, length, 100000, 1e-7, 1e-7))
    return jobs


def _time(fn, jobs) -> tuple[float, int]:
    t0 = time.perf_counter()
    pieces = 0
    for j in jobs:
        pieces += len(fn(*j)[1])
    return time.perf_counter() - t0, pieces


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shots", type=int, default=2000)
    ap.add_argument("--length", type=float, default=20.0)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    try:
        from geoloop._tracecore import trace as compiled
    except ImportError:
        compiled = None
        print("compiled kernel not built; timing the Python kernel only")
    cases = {
        "sphere 0.6pi": regular_from_angle(1, 0.6 * math.pi),
        "flat": regular_from_edge(0, 1.0),
        "hyperbolic pi/4": regular_from_angle(-1, 0.25 * math.pi),
    }
    print(f"{'case':<18}{'kernel':<10}{'seconds':>10}{'pieces/s':>14}")
    for name, t in cases.items():
        jobs = _workload(t, args.shots, args.length, args.seed)
        py_s, n = _time(_tracecore_py.trace, jobs)
        print(f"{name:<18}{'python':<10}{py_s:>10.3f}{n / py_s:>14.0f}")
        if compiled is not None:
            c_s, n2 = _time(compiled, jobs)
            assert n2 == n, "kernels disagree on piece counts"
            print(f"{name:<18}{'compiled':<10}{c_s:>10.3f}{n2 / c_s:>14.0f}   x{py_s / c_s:.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
