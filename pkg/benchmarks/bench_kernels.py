"""Compiled vs numpy kernels: forward DP layers and backward sampling.

    python benchmarks/bench_kernels.py [--K 256 512] [--repeat 3]

Prints one line per (kernel, size, backend) with the best wall time and the
speedup of the compiled backend. Also checks the two backends agree.
"""

import argparse
import time

import numpy as np

from ipdsaw import kernels
from ipdsaw.walk import GeometricLaw, build_table


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_forward(K, steps, repeat, law):
    start = build_table(law, 4, K).layers[4].copy()
    res, outs = {}, {}
    for name, mod in sorted(kernels.BACKENDS.items()):
        def run():
            prev, out = start.copy(), np.empty_like(start)
            for _ in range(steps):
                mod.forward_layer(prev, law.log_r, law.log_c, out)
                prev, out = out, prev
            outs[name] = prev
        res[name] = best_of(run, repeat)
    if len(outs) == 2:
        a, b = outs["python"], outs["compiled"]
        fin = np.isfinite(a)
        assert np.array_equal(fin, np.isfinite(b)) and np.allclose(a[fin], b[fin], rtol=1e-12, atol=0)
    return res


def bench_backward(L, count, repeat, law):
    table = build_table(law, L + 1, L - 1)
    N = L // 3
    rng = np.random.default_rng(0)
    draws = rng.random((count, N + 1))
    res = {}
    for name, mod in sorted(kernels.BACKENDS.items()):
        res[name] = best_of(lambda: [mod.backward_walk(table.layers, law.log_r, N + 1, L - N, u) for u in draws],
                            repeat) / count
    return res


def report(label, res):
    line = f"{label:28s}" + "".join(f"  {k}={v * 1e3:10.3f} ms" for k, v in sorted(res.items()))
    if "compiled" in res:
        line += f"  speedup={res['python'] / res['compiled']:6.1f}x"
    print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, nargs="+", default=[128, 256, 512])
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--L", type=int, nargs="+", default=[64, 256])
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--beta", type=float, default=1.0)
    args = ap.parse_args()
    law = GeometricLaw(args.beta)
    print(f"backends: {sorted(kernels.BACKENDS)} (active: {kernels.BACKEND})")
    for K in args.K:
        report(f"forward K={K} x{args.steps} layers", bench_forward(K, args.steps, args.repeat, law))
    for L in args.L:
        report(f"backward L={L} (per sample)", bench_backward(L, args.samples, args.repeat, law))


if __name__ == "__main__":
    main()
