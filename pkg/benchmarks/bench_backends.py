"""Time the compiled convolution core against the pure-Python fallback.

    python3 benchmarks/bench_backends.py [--n 33] [--repeat 5]

Both backends are run on the same inputs; the script reports the best
wall-clock time per call and the max absolute difference between outputs.
"""
import argparse
import timeit

import numpy as np

from reveuler import _backend
from reveuler.convolution import heat_weights


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=33)
    ap.add_argument("--direct-n", type=int, default=17)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = _backend.available()
    if "compiled" not in backends:
        print("compiled core unavailable; only the fallback is timed")

    n = args.n
    h = 8.0 / (n - 1)
    a = rng.normal(size=(3, n, n, n))
    w = heat_weights(h, n, 0.05, 0)
    print(f"conv_axis   {n}^3 x3 components, {w.size} taps")
    outs = {}
    for b in backends:
        outs[b] = _backend.conv_axis(a, w, -1, backend=b)
        t = bench(lambda: _backend.conv_axis(a, w, -1, backend=b), args.repeat)
        print(f"  {b:9s} {t * 1e3:9.2f} ms")
    if len(outs) == 2:
        print(f"  max |diff| {np.max(np.abs(outs['python'] - outs['compiled'])):.3e}")

    m = args.direct_n
    f = rng.normal(size=(m, m, m))
    w1 = heat_weights(8.0 / (m - 1), m, 0.05, 0)
    w3 = w1[:, None, None] * w1[None, :, None] * w1[None, None, :]
    print(f"conv_direct3 {m}^3 with a {w3.shape[0]}^3 table")
    outs = {}
    for b in backends:
        outs[b] = _backend.conv_direct3(f, w3, backend=b)
        t = bench(lambda: _backend.conv_direct3(f, w3, backend=b), max(1, args.repeat // 2))
        print(f"  {b:9s} {t * 1e3:9.2f} ms")
    if len(outs) == 2:
        print(f"  max |diff| {np.max(np.abs(outs['python'] - outs['compiled'])):.3e}")


if __name__ == "__main__":
    main()
