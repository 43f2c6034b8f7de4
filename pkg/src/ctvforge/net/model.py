"""Encoder-only 3D delineation network with progressive deep supervision.

Four convolutional blocks separated by 2x2x2 max-pools; each conv is
bias-free and followed by instance normalization with a learned affine,
then ReLU. Each block emits a one-channel side map through a 1x1x1
projection; side maps are trilinearly upsampled to input resolution and
fused by progressive addition (a_k = a_{k-1} + s_k), with no learned
fusion weights. The final probability map is sigmoid(a_4) at full input
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..pipeline import CHANNEL_LAYOUTS, ContextStack, layout_checksum
from . import autograd as ag

DEFAULT_BLOCK_CHANNELS = (8, 16, 32, 64)
DEFAULT_BLOCK_CONVS = (2, 2, 3, 3)

# Foreground prior used to initialize the fused logit: the untrained network
# predicts this probability everywhere instead of 0.5.
FG_PRIOR = 0.15
PRIOR_LOGIT = float(np.log(FG_PRIOR / (1.0 - FG_PRIOR)))
UNTRAINED_PROB = FG_PRIOR


@dataclass(frozen=True)
class PhnnDescriptor:
    layout: str
    block_channels: tuple[int, ...] = DEFAULT_BLOCK_CHANNELS
    block_convs: tuple[int, ...] = DEFAULT_BLOCK_CONVS

    def __post_init__(self):
        if self.layout not in CHANNEL_LAYOUTS:
            raise ValueError(f"unknown channel layout {self.layout!r}")
        if len(self.block_channels) != len(self.block_convs):
            raise ValueError("block_channels and block_convs lengths differ")

    @property
    def in_channels(self) -> int:
        return len(CHANNEL_LAYOUTS[self.layout])

    @property
    def n_blocks(self) -> int:
        return len(self.block_channels)

    @property
    def pool_factor(self) -> int:
        return 2 ** (self.n_blocks - 1)

    @property
    def checksum(self) -> str:
        return layout_checksum(self.layout)

    def param_names(self) -> list[str]:
        """Canonical parameter ordering used by checkpoints and Adam."""
        names = []
        for bi in range(self.n_blocks):
            for ci in range(self.block_convs[bi]):
                names.append(f"b{bi}_conv{ci}_w")
                names.append(f"b{bi}_conv{ci}_gamma")
                names.append(f"b{bi}_conv{ci}_beta")
            names.append(f"side{bi}_w")
            names.append(f"side{bi}_b")
        return names


def init_params(desc: PhnnDescriptor, seed: int, dtype=np.float32) -> dict[str, np.ndarray]:
    """He-style scaled uniform conv weights; instance-norm affine at identity
    (gamma 1, beta 0); side projections zero with a prior logit on the first
    side bias, so the untrained network outputs the constant foreground prior
    everywhere. Starting at the prior rather than 0.5 keeps the soft-Dice
    all-ones attractor from capturing training before the input-driven
    signal forms."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF17]))
    params: dict[str, np.ndarray] = {}
    cin = desc.in_channels
    for bi, (cout, n_convs) in enumerate(zip(desc.block_channels, desc.block_convs)):
        for ci in range(n_convs):
            fan_in = cin * 27
            bound = np.sqrt(6.0 / fan_in)
            params[f"b{bi}_conv{ci}_w"] = rng.uniform(
                -bound, bound, size=(cout, cin, 3, 3, 3)).astype(dtype)
            params[f"b{bi}_conv{ci}_gamma"] = np.ones(cout, dtype=dtype)
            params[f"b{bi}_conv{ci}_beta"] = np.zeros(cout, dtype=dtype)
            cin = cout
        params[f"side{bi}_w"] = np.zeros((1, cout, 1, 1, 1), dtype=dtype)
        params[f"side{bi}_b"] = np.zeros(1, dtype=dtype)
    params["side0_b"] = np.full(1, PRIOR_LOGIT, dtype=dtype)
    return params


def phnn_forward(x: ag.Tensor, desc: PhnnDescriptor,
                 params: dict[str, ag.Tensor]) -> tuple[ag.Tensor, list[ag.Tensor]]:
    """Forward pass. x: (B, C, X, Y, Z) with spatial dims divisible by the
    pool factor. Returns (probability tensor, upsampled side maps)."""
    B, C, X, Y, Z = x.shape
    if C != desc.in_channels:
        raise ValueError(f"descriptor expects {desc.in_channels} channels, got {C}")
    pf = desc.pool_factor
    if X % pf or Y % pf or Z % pf:
        raise ValueError(f"input dims {(X, Y, Z)} not divisible by {pf}")

    sides = []
    h = x
    fused = None
    for bi in range(desc.n_blocks):
        if bi > 0:
            h = ag.maxpool2(h)
        for ci in range(desc.block_convs[bi]):
            h = ag.conv3d(h, params[f"b{bi}_conv{ci}_w"])
            h = ag.instance_norm(h, params[f"b{bi}_conv{ci}_gamma"],
                                 params[f"b{bi}_conv{ci}_beta"])
            h = ag.relu(h)
        s = ag.conv3d(h, params[f"side{bi}_w"], params[f"side{bi}_b"])
        s = ag.upsample_trilinear(s, 2 ** bi)
        sides.append(s)
        fused = s if fused is None else ag.add(fused, s)
    prob = ag.sigmoid(fused)
    return prob, sides


def params_as_tensors(params: dict[str, np.ndarray]) -> dict[str, ag.Tensor]:
    return {k: ag.parameter(v) for k, v in params.items()}


def forward_stack(stack: ContextStack, desc: PhnnDescriptor,
                  params: dict[str, np.ndarray]) -> np.ndarray:
    """Inference entry point: checks the layout checksum, runs the forward
    pass, returns the (X, Y, Z) probability array."""
    if stack.checksum != desc.checksum:
        raise ValueError(
            f"channel-layout checksum mismatch: stack {stack.checksum} "
            f"vs model {desc.checksum}")
    x = ag.Tensor(stack.channels[None].astype(np.float32))
    prob, _ = phnn_forward(x, desc, params_as_tensors(params))
    return prob.data[0, 0]
