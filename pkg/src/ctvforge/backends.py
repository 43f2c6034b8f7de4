"""Kernel backends: compiled Cython core with a pure-numpy fallback.

Two hot kernels live here: dense 3D convolution (forward + backward) and
the one-dimensional squared-distance lower-envelope sweep that powers the
exact Euclidean distance transform.

Selection happens at import time. CTVFORGE_BACKEND controls it:

  auto      (default) compiled envelope sweep + BLAS-backed numpy conv;
            on these channel counts the tensordot conv beats the naive
            compiled loops, while the compiled sweep beats the O(n^2)
            vectorized fallback by a wide margin
  compiled  force the Cython kernels for everything
  numpy     force the pure-numpy fallback for everything

Run `python -m ctvforge.bench` to compare the two implementations.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from ctvforge import _ckernels

    HAVE_COMPILED = True
except ImportError:  # extension not built; fall back silently
    _ckernels = None
    HAVE_COMPILED = False

_BIG = 1e30  # stands in for +inf inside envelope sweeps


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def conv3d_forward_numpy(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-size zero-padded 3D convolution via shifted-slice tensordots.

    x: (B, Cin, X, Y, Z); w: (Cout, Cin, kx, ky, kz) odd kernel; b: (Cout,)
    """
    B, Cin, X, Y, Z = x.shape
    Cout, Cin2, kx, ky, kz = w.shape
    if Cin != Cin2:
        raise ValueError(f"channel mismatch: input {Cin}, kernel {Cin2}")
    px, py, pz = kx // 2, ky // 2, kz // 2
    if px or py or pz:
        xp = np.zeros((B, Cin, X + 2 * px, Y + 2 * py, Z + 2 * pz), dtype=x.dtype)
        xp[:, :, px:px + X, py:py + Y, pz:pz + Z] = x
    else:
        xp = x
    acc = np.zeros((B, X, Y, Z, Cout), dtype=x.dtype)
    for di in range(kx):
        for dj in range(ky):
            for dk in range(kz):
                xs = xp[:, :, di:di + X, dj:dj + Y, dk:dk + Z]
                acc += np.tensordot(xs, w[:, :, di, dj, dk], axes=([1], [1]))
    y = np.moveaxis(acc, -1, 1)
    y += b[None, :, None, None, None]
    return np.ascontiguousarray(y)


def conv3d_backward_numpy(x, w, dy):
    """Gradients of conv3d_forward w.r.t. input, weights, and bias."""
    B, Cin, X, Y, Z = x.shape
    Cout, _, kx, ky, kz = w.shape
    px, py, pz = kx // 2, ky // 2, kz // 2
    if px or py or pz:
        xp = np.zeros((B, Cin, X + 2 * px, Y + 2 * py, Z + 2 * pz), dtype=x.dtype)
        xp[:, :, px:px + X, py:py + Y, pz:pz + Z] = x
    else:
        xp = x
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for di in range(kx):
        for dj in range(ky):
            for dk in range(kz):
                xs = xp[:, :, di:di + X, dj:dj + Y, dk:dk + Z]
                dw[:, :, di, dj, dk] = np.tensordot(dy, xs, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
                g = np.tensordot(dy, w[:, :, di, dj, dk], axes=([1], [0]))
                dxp[:, :, di:di + X, dj:dj + Y, dk:dk + Z] += np.moveaxis(g, -1, 1)
    db = dy.sum(axis=(0, 2, 3, 4))
    if px or py or pz:
        dx = np.ascontiguousarray(dxp[:, :, px:px + X, py:py + Y, pz:pz + Z])
    else:
        dx = dxp
    return dx, dw, db


def edt_sq_pass_numpy(g2: np.ndarray, spacing: float) -> np.ndarray:
    """One squared-EDT pass along the last axis of a (rows, n) array.

    out[r, x] = min_i g2[r, i] + ((x - i) * spacing)^2, evaluated exactly
    as written (O(n^2) but fully vectorized).
    """
    rows, n = g2.shape
    idx = np.arange(n, dtype=np.float64)
    d2 = ((idx[:, None] - idx[None, :]) * spacing) ** 2  # (x, i)
    out = np.empty_like(g2)
    chunk = max(1, int(4e6 // (n * n)) or 1)
    for r0 in range(0, rows, chunk):
        block = g2[r0:r0 + chunk]  # (c, n)
        out[r0:r0 + chunk] = (block[:, None, :] + d2[None, :, :]).min(axis=2)
    return out


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

def _select():
    mode = os.environ.get("CTVFORGE_BACKEND", "auto").lower()
    if mode not in ("auto", "compiled", "numpy"):
        raise ValueError(f"CTVFORGE_BACKEND must be auto|compiled|numpy, got {mode!r}")
    if mode in ("auto", "compiled") and not HAVE_COMPILED:
        mode = "numpy"
    if mode == "numpy":
        return mode, conv3d_forward_numpy, conv3d_backward_numpy, edt_sq_pass_numpy
    if mode == "compiled":
        return (
            mode,
            _ckernels.conv3d_forward,
            _ckernels.conv3d_backward,
            _ckernels.edt_sq_pass,
        )
    # auto: compiled sweep, BLAS conv
    return mode, conv3d_forward_numpy, conv3d_backward_numpy, _ckernels.edt_sq_pass


BACKEND, conv3d_forward, conv3d_backward, edt_sq_pass = _select()
