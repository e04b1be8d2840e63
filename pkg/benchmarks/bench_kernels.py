"""Compare the compiled and pure-numpy kernel backends.

Runs every hot kernel on realistic workloads (380x380 frames, 256x256 dedup
vectors) and prints per-kernel timings and speedups. The compiled backend is
warmed up first so JIT compilation is excluded from the numbers.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from dermaprep._kernels import numpy_impl

try:
    from dermaprep._kernels import numba_impl
except ImportError:
    numba_impl = None


def _line_offsets(length, angle_deg):
    ts = np.arange(length, dtype=np.float64) - (length - 1) / 2.0
    rad = np.deg2rad(angle_deg)
    dys = np.rint(ts * np.sin(rad)).astype(np.int64)
    dxs = np.rint(ts * np.cos(rad)).astype(np.int64)
    return np.ascontiguousarray(dys), np.ascontiguousarray(dxs)


def _disk_offsets(radius):
    span = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    keep = dy * dy + dx * dx <= radius * radius
    return np.ascontiguousarray(dy[keep].astype(np.int64)), np.ascontiguousarray(
        dx[keep].astype(np.int64)
    )


def _workloads(rng):
    img = rng.random((380, 380), dtype=np.float32)
    rgb = rng.random((380, 380, 3), dtype=np.float32)
    mask = rng.random((380, 380)) < 0.04
    ldy, ldx = _line_offsets(15, 45.0)
    ddy, ddx = _disk_offsets(5)
    gen = rng.random((50, 64 * 64 * 3))
    corpus = rng.random((500, 64 * 64 * 3))
    return [
        ("gray_dilate 380^2 line15", "gray_dilate", (img, ldy, ldx)),
        ("gray_erode 380^2 line15", "gray_erode", (img, ldy, ldx)),
        ("binary_dilate 380^2 disk5", "binary_dilate", (mask, ddy, ddx)),
        ("binary_erode 380^2 disk5", "binary_erode", (mask, ddy, ddx)),
        ("fill_holes 380^2", "fill_holes", (mask,)),
        ("drop_small 380^2 min30", "drop_small_components", (mask, 30)),
        ("median_fill 380^2 rgb", "median_fill", (rgb, mask, 100)),
        ("min_mse 50x500 @12288", "min_mse_scan", (gen, corpus)),
    ]


def _bench(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    work = _workloads(rng)

    if numba_impl is not None:
        for _, name, call_args in work:  # warm-up: compile outside timing
            getattr(numba_impl, name)(*call_args)

    print(f"{'kernel':<28}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for label, name, call_args in work:
        t_np = _bench(getattr(numpy_impl, name), call_args, args.repeat)
        if numba_impl is None:
            print(f"{label:<28}{t_np * 1e3:>10.2f}ms{'n/a':>12}{'n/a':>10}")
            continue
        t_nb = _bench(getattr(numba_impl, name), call_args, args.repeat)
        print(f"{label:<28}{t_np * 1e3:>10.2f}ms{t_nb * 1e3:>10.2f}ms{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
