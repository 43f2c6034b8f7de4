"""Minimal reverse-mode autodiff over dense numpy arrays.

Only the operations the delineation network needs: 3D convolution, ReLU,
2x2x2 max-pooling, separable trilinear upsampling, elementwise add,
sigmoid, and the Dice loss. Gradients accumulate in a fixed topological
order so seeded runs are bitwise reproducible.
"""

from __future__ import annotations

import numpy as np

from ..backends import conv3d_backward, conv3d_forward

NAN_GUARD = True


class Tensor:
    """Node in the autodiff graph. data is (B, C, X, Y, Z) or scalar."""

    __slots__ = ("data", "grad", "parents", "_backward", "requires_grad")

    def __init__(self, data, parents=(), backward=None, requires_grad=False):
        self.data = np.asarray(data)
        if NAN_GUARD and not np.all(np.isfinite(self.data)):
            raise FloatingPointError("non-finite values produced by an op")
        self.grad = None
        self.parents = tuple(parents)
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        """Reverse sweep from this node; populates .grad on the graph."""
        if grad is None:
            if self.data.shape != ():
                raise ValueError("backward() without grad requires a scalar loss")
            grad = np.array(1.0, dtype=self.data.dtype)
        order = []
        seen = set()

        def visit(node):
            if id(node) in seen:
                return
            seen.add(id(node))
            for p in node.parents:
                visit(p)
            order.append(node)

        visit(self)
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def conv3d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Same-size zero-padded 3D convolution (odd kernels only). b=None means
    no bias term (used when a normalization layer follows)."""
    if b is None:
        y = conv3d_forward(x.data, w.data,
                           np.zeros(w.data.shape[0], dtype=w.data.dtype))
        parents = (x, w)
    else:
        y = conv3d_forward(x.data, w.data, b.data)
        parents = (x, w, b)

    def bwd(g):
        dx, dw, db = conv3d_backward(x.data, w.data, g)
        if x.requires_grad:
            x._accumulate(dx)
        if w.requires_grad:
            w._accumulate(dw)
        if b is not None and b.requires_grad:
            b._accumulate(db)

    return Tensor(y, parents, bwd)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    y = np.where(mask, x.data, 0)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * mask)

    return Tensor(y, (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    y = np.empty_like(d)
    pos = d >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    y[~pos] = ex / (1.0 + ex)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * y * (1.0 - y))

    return Tensor(y, (x,), bwd)


def instance_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel normalization over the spatial dims with a
    learned affine (gamma, beta), both shaped (C,). Removing the per-channel
    mean at every layer eliminates the shared-bias runaway direction that a
    constant-field attractor in the loss would otherwise exploit."""
    axes = (2, 3, 4)
    mu = x.data.mean(axis=axes, keepdims=True)
    var = x.data.var(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    gb = gamma.data[None, :, None, None, None]
    y = gb * xhat + beta.data[None, :, None, None, None]

    def bwd(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).sum(axis=(0, 2, 3, 4)))
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=(0, 2, 3, 4)))
        if x.requires_grad:
            gx = g * gb
            dx = inv * (gx - gx.mean(axis=axes, keepdims=True)
                        - xhat * (gx * xhat).mean(axis=axes, keepdims=True))
            x._accumulate(dx)

    return Tensor(y, (x, gamma, beta), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    y = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return Tensor(y, (a, b), bwd)


def maxpool2(x: Tensor) -> Tensor:
    """2x2x2 max pooling; spatial dims must be even. Ties pick the first
    window element for deterministic gradients."""
    B, C, X, Y, Z = x.data.shape
    if X % 2 or Y % 2 or Z % 2:
        raise ValueError(f"maxpool2 needs even spatial dims, got {(X, Y, Z)}")
    r = x.data.reshape(B, C, X // 2, 2, Y // 2, 2, Z // 2, 2)
    r = np.moveaxis(r, (3, 5, 7), (5, 6, 7)).reshape(B, C, X // 2, Y // 2, Z // 2, 8)
    arg = r.argmax(axis=-1)
    y = np.take_along_axis(r, arg[..., None], axis=-1)[..., 0]

    def bwd(g):
        if not x.requires_grad:
            return
        gr = np.zeros((B, C, X // 2, Y // 2, Z // 2, 8), dtype=g.dtype)
        np.put_along_axis(gr, arg[..., None], g[..., None], axis=-1)
        gr = gr.reshape(B, C, X // 2, Y // 2, Z // 2, 2, 2, 2)
        gr = np.moveaxis(gr, (5, 6, 7), (3, 5, 7)).reshape(B, C, X, Y, Z)
        x._accumulate(gr)

    return Tensor(y, (x,), bwd)


def _upsample_matrix(n_in: int, factor: int, dtype) -> np.ndarray:
    """1D linear interpolation matrix (n_in*factor, n_in), half-voxel
    aligned (output voxel centers mapped into input voxel coordinates)."""
    n_out = n_in * factor
    M = np.zeros((n_out, n_in), dtype=dtype)
    src = (np.arange(n_out) + 0.5) / factor - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    lo = np.floor(src).astype(int)
    lo = np.minimum(lo, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    f = src - lo
    M[np.arange(n_out), lo] += 1.0 - f
    M[np.arange(n_out), hi] += f
    return M


def upsample_trilinear(x: Tensor, factor: int) -> Tensor:
    """Parameter-free trilinear upsampling by an integer factor per axis,
    implemented as three separable 1D interpolations."""
    if factor == 1:
        return x
    mats = [
        _upsample_matrix(x.data.shape[axis], factor, x.data.dtype)
        for axis in (2, 3, 4)
    ]

    def apply(data, transpose):
        out = data
        for axis, M in zip((2, 3, 4), mats):
            A = M.T if transpose else M  # contract along A's second dim
            out = np.moveaxis(np.tensordot(out, A, axes=([axis], [1])), -1, axis)
        return out

    y = apply(x.data, transpose=False)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(apply(g, transpose=True))

    return Tensor(y, (x,), bwd)


def dice_loss(prob: Tensor, target: np.ndarray, eps: float = 1e-5) -> Tensor:
    """Soft Dice loss, one term per batch element, averaged over the batch.

    loss_i = 1 - (2 * sum(p*g) + eps) / (sum(p) + sum(g) + eps)
    """
    p = prob.data
    g = np.asarray(target, dtype=p.dtype)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: prob {p.shape} vs target {g.shape}")
    B = p.shape[0]
    axes = tuple(range(1, p.ndim))
    inter = (p * g).sum(axis=axes)
    denom = p.sum(axis=axes) + g.sum(axis=axes) + eps
    losses = 1.0 - (2.0 * inter + eps) / denom
    loss = losses.mean()

    def bwd(gout):
        if not prob.requires_grad:
            return
        # d loss_i / d p = -(2*g*denom - (2*inter+eps)) / denom^2
        num = 2.0 * inter + eps
        grad = -(2.0 * g * denom.reshape((B,) + (1,) * (p.ndim - 1))
                 - num.reshape((B,) + (1,) * (p.ndim - 1)))
        grad /= (denom ** 2).reshape((B,) + (1,) * (p.ndim - 1))
        prob._accumulate(gout * grad / B)

    return Tensor(np.asarray(loss), (prob,), bwd)
