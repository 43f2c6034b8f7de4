"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python -m ctvforge.bench [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import backends


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    rows = []

    # conv3d on a training-sized problem
    x = rng.normal(size=(4, 8, 32, 32, 16)).astype(np.float32)
    w = rng.normal(size=(16, 8, 3, 3, 3)).astype(np.float32)
    b = np.zeros(16, dtype=np.float32)
    dy = rng.normal(size=(4, 16, 32, 32, 16)).astype(np.float32)
    rows.append(("conv3d fwd (4x8x32x32x16 -> 16ch)",
                 _time(lambda: backends.conv3d_forward_numpy(x, w, b), args.repeat),
                 _time(lambda: backends._ckernels.conv3d_forward(x, w, b), args.repeat)
                 if backends.HAVE_COMPILED else None))
    rows.append(("conv3d bwd",
                 _time(lambda: backends.conv3d_backward_numpy(x, w, dy), args.repeat),
                 _time(lambda: backends._ckernels.conv3d_backward(x, w, dy), args.repeat)
                 if backends.HAVE_COMPILED else None))

    # EDT envelope sweep on a phantom-sized volume pass
    g2 = np.where(rng.uniform(size=(64 * 48, 64)) < 0.01, 0.0, 1e30)
    rows.append(("edt sweep (3072 rows x 64)",
                 _time(lambda: backends.edt_sq_pass_numpy(g2, 1.0), args.repeat),
                 _time(lambda: backends._ckernels.edt_sq_pass(g2, 1.0), args.repeat)
                 if backends.HAVE_COMPILED else None))

    print(f"active backend: {backends.BACKEND} (compiled available: {backends.HAVE_COMPILED})")
    print(f"{'kernel':<40} {'numpy':>12} {'compiled':>12} {'speedup':>9}")
    for name, t_np, t_c in rows:
        if t_c is None:
            print(f"{name:<40} {t_np * 1e3:>10.2f}ms {'n/a':>12} {'n/a':>9}")
        else:
            print(f"{name:<40} {t_np * 1e3:>10.2f}ms {t_c * 1e3:>10.2f}ms {t_np / t_c:>8.2f}x")


if __name__ == "__main__":
    main()
