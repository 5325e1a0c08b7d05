#!/usr/bin/env python3
"""Timing comparison of the numba-jitted hot kernels against the
pure-numpy fallback.

Run after an editable install:

    python3 benchmarks/bench_accel.py

Requires numba importable and USTATLAB_NO_NUMBA unset (both backends are
loaded side by side through their private names).
"""

import math
import time

import numpy as np

from ustatlab._accel import (
    KERNEL_PRODUCT,
    KERNEL_VARIANCE,
    NUMBA_ENABLED,
    _np_esp_prefix,
    _np_shared_pair_total,
    _np_prefix_sums,
    _np_product_q_raw,
    _np_q_raw,
    _np_ustat_sum,
)


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm-up / jit compile
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _conv(args):
    return tuple(np.ascontiguousarray(a, dtype=np.float64)
                 if isinstance(a, np.ndarray) else a for a in args)


def main():
    if not NUMBA_ENABLED:
        print("numba backend disabled (USTATLAB_NO_NUMBA set or numba "
              "missing); nothing to compare")
        return 1
    from ustatlab._accel import (
        _nb_esp_prefix,
        _nb_shared_pair_total,
        _nb_prefix_sums,
        _nb_product_q_raw,
        _nb_q_raw,
        _nb_ustat_sum,
    )

    rng = np.random.default_rng(0)
    x2k = rng.normal(0, 1, 2000)
    x300 = rng.normal(0, 1, 300)
    x60 = rng.normal(0, 1, 60)
    x100k = rng.normal(0, 1, 100_000)

    # the jit loops are the selected path for truncated kernels and the
    # ESP-style recurrences; untruncated pair statistics go through numpy
    # closed forms in both modes, so they are not interesting to race
    cases = [
        ("q_raw       trunc variance m=2 n=2000",
         (_nb_q_raw, _np_q_raw), (KERNEL_VARIANCE, 1.5, x2k, 2)),
        ("q_raw       trunc product  m=2 n=2000",
         (_nb_q_raw, _np_q_raw), (KERNEL_PRODUCT, 1.5, x2k, 2)),
        ("q_raw       trunc product  m=3 n=300",
         (_nb_q_raw, _np_q_raw), (KERNEL_PRODUCT, 1.5, x300, 3)),
        ("ustat_sum   trunc variance m=2 n=2000",
         (_nb_ustat_sum, _np_ustat_sum), (KERNEL_VARIANCE, 1.5, x2k, 2)),
        ("prefix_sums trunc product  m=2 n=2000",
         (_nb_prefix_sums, _np_prefix_sums), (KERNEL_PRODUCT, 1.5, x2k, 2)),
        ("shared_pair_total    trunc product  m=3 n=60",
         (_nb_shared_pair_total, _np_shared_pair_total), (KERNEL_PRODUCT, 1.5, x60)),
        ("shared_pair_total          product  m=3 n=60",
         (_nb_shared_pair_total, _np_shared_pair_total), (KERNEL_PRODUCT, math.inf, x60)),
        ("product_q_raw              m=3 n=100000",
         (_nb_product_q_raw, _np_product_q_raw), (x100k, 3)),
        ("esp_prefix                 m=3 n=100000",
         (_nb_esp_prefix, _np_esp_prefix), (x100k, 3)),
    ]

    print(f"{'case':44s} {'numba':>10s} {'numpy':>10s} {'speedup':>9s}")
    for label, (fast, slow), args in cases:
        t_nb, out_nb = timeit(fast, *_conv(args))
        t_np, out_np = timeit(slow, *args)
        gap = float(np.max(np.abs(np.atleast_1d(out_nb) - np.atleast_1d(out_np))))
        scale = max(1.0, float(np.max(np.abs(np.atleast_1d(out_np)))))
        assert gap / scale < 1e-9, f"backend mismatch in {label}: {gap}"
        print(f"{label:44s} {t_nb * 1e3:9.3f}ms {t_np * 1e3:9.3f}ms "
              f"{t_np / t_nb:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
