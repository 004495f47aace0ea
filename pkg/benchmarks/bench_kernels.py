"""Compiled vs numpy kernels: raw uniforms, one inverse-CDF step, and a full simulation.

    python3 benchmarks/bench_kernels.py [--count 1000000] [--repeat 5]

Each backend is timed on identical inputs and the outputs are compared, so a
speedup is only reported for bit-identical results.
"""
import argparse
import time

import numpy as np

from credal_lln import kernels
from credal_lln.process import MeanBand, SignSwitch, binary_credal_spec, simulate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_kernels(mod, count, repeat):
    cdf = np.array([[0.5, 1.0], [0.3, 1.0]])
    pick = (np.arange(count) % 2).astype(np.int64)
    return {
        "uniforms": best_of(lambda: mod.uniforms(12345, 0, count, 7), repeat),
        "draw_step": best_of(lambda: mod.draw_step(12345, 0, count, 7, cdf, pick), repeat),
    }


def bench_simulation(mod, trials, n, repeat):
    spec = binary_credal_spec(n, [(0.5, 0.5), (0.3, 0.7)])
    saved = kernels.draw_step
    kernels.draw_step = mod.draw_step
    try:
        return best_of(lambda: simulate(spec, SignSwitch(), trials, 1, events=(MeanBand(0.1),)).hits,
                       repeat)
    finally:
        kernels.draw_step = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--n", type=int, default=200)
    args = ap.parse_args()

    mods = kernels.backends()
    if "compiled" not in mods:
        print("compiled extension not built; only the numpy fallback is available")
    rows = {}
    for name, mod in mods.items():
        res = bench_kernels(mod, args.count, args.repeat)
        res["simulate"] = bench_simulation(mod, args.trials, args.n, max(1, args.repeat // 2))
        rows[name] = res

    print(f"{'kernel':<12}" + "".join(f"{name:>14}" for name in rows) + f"{'speedup':>10}  identical")
    for kernel in ("uniforms", "draw_step", "simulate"):
        times = {name: rows[name][kernel][0] for name in rows}
        outs = [rows[name][kernel][1] for name in rows]
        same = all(np.array_equal(outs[0], o) for o in outs[1:])
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{kernel:<12}" + "".join(f"{times[name] * 1e3:>12.1f}ms" for name in rows)
              + f"{speed:>9.1f}x  {same}")
    print(f"(uniforms/draw_step: {args.count} draws; simulate: {args.trials} trials x n={args.n})")


if __name__ == "__main__":
    main()
