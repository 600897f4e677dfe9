"""Time the compiled counting kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--scales 2,4] [--repeat 3]

Outputs are compared for equality before timings are reported.
"""
import argparse
import time

import numpy as np

from hartreelab import _kernels_py
from hartreelab.counting import ResonanceQuery, _candidates, _plan, _tables

try:
    from hartreelab import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_sweep(N, H, repeat):
    args = (N, *_tables(N, H), H)
    rows = {}
    for name, mod in (("python", _kernels_py), ("compiled", _kernels)):
        if mod is None:
            continue
        rows[name] = best_of(lambda: mod.sweep_counts(*args), repeat)
    if len(rows) == 2:
        a, b = rows["python"][1], rows["compiled"][1]
        same = all(np.array_equal(np.asarray(x), np.asarray(y))
                   for xs, ys in zip(a, b) for x, y in zip(xs, ys))
        if not same:
            raise SystemExit(f"sweep_counts outputs differ at N={N}")
    return {k: v[0] for k, v in rows.items()}


def bench_query(q, repeat):
    loops, derived, coeffs, ok = _plan(q)
    sets = [_candidates(r, q) for r in loops]
    roles = ("k", "k1", "k2", "k3")
    args = (*sets, *coeffs, *[roles.index(r) for r in loops], roles.index(derived), ok, q.N,
            q.Omega0)
    rows = {}
    for name, mod in (("python", _kernels_py), ("compiled", _kernels)):
        if mod is None:
            continue
        rows[name] = best_of(lambda: int(mod.count_product(*args)), repeat)
    if len(rows) == 2 and rows["python"][1] != rows["compiled"][1]:
        raise SystemExit(f"count_product outputs differ for {q}")
    return {k: v[0] for k, v in rows.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scales", default="2,4")
    ap.add_argument("--H", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    print(f"compiled extension available: {_kernels is not None}")
    print(f"{'kernel':<34}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}")

    def line(label, t):
        py, c = t.get("python"), t.get("compiled")
        sp = f"{py / c:>9.1f}x" if py and c else f"{'-':>10}"
        cs = f"{c:>14.4f}" if c is not None else f"{'-':>14}"
        print(f"{label:<34}{py:>12.4f}{cs}{sp}")

    for N in (int(x) for x in a.scales.split(",")):
        line(f"sweep_counts N={N} H={a.H}", bench_sweep(N, a.H, a.repeat))
    for args in ((4, 4, 4, 4, 4, 0), (4, 4, 2, 4, 8, 2)):
        q = ResonanceQuery(*args)
        line(f"count_product {args}", bench_query(q, a.repeat))


if __name__ == "__main__":
    main()
