"""Finite-difference verification of the backward pass.

Runs in double precision with central differences. Points whose ReLU
pre-activations sit within a margin of zero are rejected and redrawn so
the kink nondifferentiability cannot pollute the comparison.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .model import PhnnDescriptor, init_params, phnn_forward


def _loss_at(x_data, target, desc, params_np):
    params = {k: ag.parameter(v) for k, v in params_np.items()}
    x = ag.Tensor(x_data)
    prob, _ = phnn_forward(x, desc, params)
    loss = ag.dice_loss(prob, target)
    return loss, params


def _min_preact_margin(x_data, desc, params_np) -> float:
    """Smallest |pre-activation| feeding a ReLU at this point."""
    params = {k: ag.parameter(v) for k, v in params_np.items()}
    h = ag.Tensor(x_data)
    margin = np.inf
    for bi in range(desc.n_blocks):
        if bi > 0:
            h = ag.maxpool2(h)
        for ci in range(desc.block_convs[bi]):
            h = ag.conv3d(h, params[f"b{bi}_conv{ci}_w"])
            h = ag.instance_norm(h, params[f"b{bi}_conv{ci}_gamma"],
                                 params[f"b{bi}_conv{ci}_beta"])
            margin = min(margin, float(np.abs(h.data).min()))
            h = ag.relu(h)
    return margin


def grad_check(desc: PhnnDescriptor, spatial=(8, 8, 8), n_samples: int = 200,
               h: float = 1e-4, seed: int = 0, margin: float = 1e-3) -> float:
    """Max relative error between backward() and central differences over
    n_samples randomly chosen parameter entries."""
    attempt = 0
    while True:
        rng = np.random.default_rng(np.random.SeedSequence([seed + attempt, 0x6C]))
        params_np = init_params(desc, seed=seed + attempt, dtype=np.float64)
        # non-zero side projections so every block contributes to the loss;
        # norm affines off identity so their gradients are exercised too
        for k, v in params_np.items():
            if k.startswith("side") or k.endswith("_beta"):
                params_np[k] = rng.normal(0.0, 0.3, size=v.shape)
            elif k.endswith("_gamma"):
                params_np[k] = rng.normal(1.0, 0.3, size=v.shape)
        x_data = rng.normal(0.0, 1.0, size=(1, desc.in_channels, *spatial))
        target = (rng.uniform(size=(1, 1, *spatial)) < 0.5).astype(np.float64)
        if _min_preact_margin(x_data, desc, params_np) > margin:
            break
        attempt += 1
        if attempt > 50:
            raise RuntimeError("could not find a point clear of ReLU kinks")

    loss, params = _loss_at(x_data, target, desc, params_np)
    loss.backward()
    analytic = {k: params[k].grad for k in params_np}

    names = list(params_np)
    sizes = np.array([params_np[n].size for n in names], dtype=float)
    max_rel = 0.0
    for _ in range(n_samples):
        ni = int(rng.choice(len(names), p=sizes / sizes.sum()))
        name = names[ni]
        flat_idx = int(rng.integers(params_np[name].size))
        idx = np.unravel_index(flat_idx, params_np[name].shape)

        def eval_loss(delta):
            perturbed = {k: v.copy() for k, v in params_np.items()}
            perturbed[name][idx] += delta
            l, _ = _loss_at(x_data, target, desc, perturbed)
            return float(l.data)

        fd = (eval_loss(h) - eval_loss(-h)) / (2.0 * h)
        an = float(analytic[name][idx]) if analytic[name] is not None else 0.0
        denom = max(abs(fd) + abs(an), 1e-8)
        max_rel = max(max_rel, abs(fd - an) / denom)
    return max_rel
