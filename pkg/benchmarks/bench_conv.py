"""Compare the two convolution backends on the shapes this package runs hot.

The BLAS-backed im2col path dominates dense convolutions, while the compiled
direct loops win on depthwise kernels, which is exactly the split the
automatic dispatch uses. Run:

    python3 benchmarks/bench_conv.py [--repeat 5] [--warmup 2]
"""

import argparse
import time

import numpy as np

from npmcast.kernels import conv_numpy

try:
    from npmcast.kernels import conv_numba
except ImportError:
    conv_numba = None

CASES = [
    # name, x shape, w shape, stride, padding, dilation, groups
    ("dense 3x3 stem 64x64", (4, 4, 64, 64), (32, 4, 3, 3), 1, 1, 1, 1),
    ("dense 3x3 wide 32x32", (4, 64, 32, 32), (64, 64, 3, 3), 1, 1, 1, 1),
    ("dense 3x3 stride2", (4, 32, 64, 64), (64, 32, 3, 3), 2, 1, 1, 1),
    ("pointwise 1x1 512ch", (1, 512, 16, 16), (512, 512, 1, 1), 1, 0, 1, 1),
    ("depthwise 5x5 512ch", (6, 512, 16, 16), (512, 1, 5, 5), 1, 2, 1, 512),
    ("depthwise 7x7 dil3", (6, 512, 16, 16), (512, 1, 7, 7), 1, 9, 3, 512),
    ("temporal (3,1) 512ch", (1, 512, 6, 256), (512, 1, 3, 1), 1, (1, 0), 1, 512),
]


def _norm_pair(v):
    return v if isinstance(v, tuple) else (v, v)


def bench_one(fn, args, repeat, warmup):
    for _ in range(warmup):
        fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--warmup", type=int, default=2)
    args = ap.parse_args()

    backends = [("numpy", conv_numpy)]
    if conv_numba is not None:
        backends.append(("numba", conv_numba))
    else:
        print("numba backend unavailable; timing numpy only")

    rng = np.random.default_rng(0)
    header = f"{'case':24s} {'pass':12s}" + "".join(
        f"{name + ' (ms)':>14s}" for name, _ in backends)
    print(header)
    print("-" * len(header))
    for name, xs, ws, stride, padding, dilation, groups in CASES:
        x = rng.standard_normal(xs).astype(np.float32)
        w = rng.standard_normal(ws).astype(np.float32)
        sh, sw = _norm_pair(stride)
        ph, pw = _norm_pair(padding)
        dh, dw = _norm_pair(dilation)
        oh = (xs[2] + 2 * ph - dh * (ws[2] - 1) - 1) // sh + 1
        ow = (xs[3] + 2 * pw - dw * (ws[3] - 1) - 1) // sw + 1
        gout = rng.standard_normal((xs[0], ws[0], oh, ow)).astype(np.float32)
        geom = (sh, sw, ph, pw, dh, dw, groups)
        passes = [
            ("forward", "conv2d_forward", (x, w) + geom),
            ("grad_input", "conv2d_grad_input", (gout, w, xs) + geom),
            ("grad_weight", "conv2d_grad_weight", (gout, x, ws) + geom),
        ]
        for pass_name, fn_name, fn_args in passes:
            cells = []
            for _, mod in backends:
                ms = bench_one(getattr(mod, fn_name), fn_args,
                               args.repeat, args.warmup)
                cells.append(f"{ms:14.3f}")
            print(f"{name:24s} {pass_name:12s}" + "".join(cells))


if __name__ == "__main__":
    main()
