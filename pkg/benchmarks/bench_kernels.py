#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times conv1d forward/backward, masked pooling, and the Adam update on a few
shapes.  The numba path pays a one-time JIT cost (excluded via warmup).

    python3 benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from pairmatch import _kernels_numpy as knp

try:
    from pairmatch import _kernels_numba as knb
except ImportError:
    knb = None


def timeit(fn, repeats):
    fn()  # warmup (and JIT compile for the numba path)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench(name, make_np, make_nb, repeats):
    t_np = timeit(make_np, repeats)
    if knb is None:
        print(f"{name:<28} numpy {t_np * 1e6:9.1f} us   numba: unavailable")
        return
    t_nb = timeit(make_nb, repeats)
    ratio = t_np / t_nb if t_nb > 0 else float("inf")
    print(
        f"{name:<28} numpy {t_np * 1e6:9.1f} us   numba {t_nb * 1e6:9.1f} us"
        f"   speedup x{ratio:5.2f}"
    )


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    for batch, seq, d_in, k, d_out in ((8, 32, 32, 3, 32), (32, 64, 64, 3, 64)):
        x = rng.normal(size=(batch, seq, d_in))
        w = rng.normal(size=(k, d_in, d_out))
        gy = rng.normal(size=(batch, seq, d_out))
        valid = rng.random((batch, seq)) > 0.2
        valid[:, 0] = True
        label = f"[B={batch} S={seq} D={d_in}]"

        bench(f"conv1d fwd {label}", lambda: knp.conv1d_same_forward(x, w),
              lambda: knb.conv1d_same_forward(x, w), args.repeats)
        bench(f"conv1d bwd {label}", lambda: knp.conv1d_same_backward(x, w, gy),
              lambda: knb.conv1d_same_backward(x, w, gy), args.repeats)
        bench(f"masked max {label}", lambda: knp.masked_max_forward(x, valid),
              lambda: knb.masked_max_forward(x, valid), args.repeats)
        bench(f"masked avg {label}", lambda: knp.masked_avg_forward(x, valid),
              lambda: knb.masked_avg_forward(x, valid), args.repeats)

    n = 50_000
    p = rng.normal(size=n)
    g = rng.normal(size=n)
    state = {"np": (p.copy(), np.zeros(n), np.zeros(n)), "nb": (p.copy(), np.zeros(n), np.zeros(n))}

    def adam_np():
        pp, m, v = state["np"]
        knp.adam_update(pp, g, m, v, 3, 1e-3, 0.9, 0.999, 1e-8)

    def adam_nb():
        pp, m, v = state["nb"]
        knb.adam_update(pp, g, m, v, 3, 1e-3, 0.9, 0.999, 1e-8)

    bench(f"adam update [n={n}]", adam_np, adam_nb, args.repeats)


if __name__ == "__main__":
    main()
