"""Training loop and cross-validated evaluation driver.

Per epoch one (gtvln, oar) SDT source combination is drawn; per training
sample the augmentation chain is: jitter the tumor/node components (if the
jittered source was drawn), recompute their distance field, rotate the
assembled stack in-plane, then crop the VOI. RNG streams are keyed by
(epoch, case index, sample index) so results do not depend on evaluation
order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import pipeline
from .net import (
    AdamState,
    PhnnDescriptor,
    adam_step,
    dice_loss,
    init_params,
    params_as_tensors,
    phnn_forward,
)
from .net.autograd import Tensor
from .pipeline import AugmentPolicy, ContextStack, _rotate_xy_array
from .voxgrid import MaskVolume, VolumeGrid


@dataclass(frozen=True)
class TrainConfig:
    layout: str = "ct_all_sdt"
    epochs: int = 30
    lr: float = 1e-3
    beta1: float = 0.99
    beta2: float = 0.999
    weight_decay: float = 0.005
    batch_size: int = 4
    n_pos: int = 60
    n_neg: int = 20
    voi_size: tuple[int, int, int] = (32, 32, 16)
    jitter_halfwidth_mm: float = 2.0
    rotation_deg: float = 10.0
    ct_clamp: float = 1000.0
    sdt_clamp_mm: float = 40.0
    lr_decay_epoch: int = 0  # 0 = constant lr; else lr x0.1 from this epoch on
    lr_decay_factor: float = 0.1
    lr_warmup_epochs: int = 0  # linear lr ramp over the first N epochs
    block_channels: tuple[int, ...] = (8, 16, 32, 64)
    block_convs: tuple[int, ...] = (2, 2, 3, 3)
    seed: int = 0

    def descriptor(self) -> "PhnnDescriptor":
        return PhnnDescriptor(self.layout, block_channels=self.block_channels,
                              block_convs=self.block_convs)


def _epoch_seed(seed: int, epoch: int) -> int:
    return (seed * 1000003 + epoch) & 0x7FFFFFFF


def _sample_seed(seed: int, epoch: int, case_index: int, sample_index: int) -> int:
    ss = np.random.SeedSequence([seed, epoch, case_index, sample_index])
    return int(ss.generate_state(1, np.uint32)[0])


def _rotate_slab(arr: np.ndarray, spacing, angle: float, mode: str) -> np.ndarray:
    """Rotate a (..., nx, ny, nz) block in-plane; z slices are independent
    of the rotation so callers crop z before calling this."""
    if arr.ndim == 3:
        return _rotate_xy_array(arr, spacing, angle, mode)
    out = np.stack([_rotate_xy_array(ch, spacing, angle, mode) for ch in arr])
    return out


def _prepare_sample(case, tcfg: TrainConfig, layout: str, combo, seed: int,
                    voi, cache) -> tuple[np.ndarray, np.ndarray]:
    """One augmented (stack crop, label crop) pair for a VOI."""
    gtvln_src, oar_src = combo
    policy = AugmentPolicy(
        jitter_halfwidth_mm=tcfg.jitter_halfwidth_mm,
        rotation_deg=tcfg.rotation_deg,
        gtvln_sources=(gtvln_src,),
        oar_sources=(oar_src,),
    )
    stack = pipeline.assemble_stack(case, layout, policy, seed=seed, cache=cache,
                                    ct_clamp=tcfg.ct_clamp, sdt_clamp_mm=tcfg.sdt_clamp_mm)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA06]))
    angle = float(rng.uniform(-tcfg.rotation_deg, tcfg.rotation_deg))

    (ox, oy, oz), (sx, sy, sz) = voi.origin, voi.size
    slab = stack.channels[:, :, :, oz:oz + sz]
    label_slab = case.ctv_truth.bool()[:, :, oz:oz + sz]
    if angle != 0.0:
        slab = _rotate_slab(slab, stack.spacing, angle, "trilinear").astype(np.float32)
        label_slab = _rotate_slab(label_slab, stack.spacing, angle, "nearest")
    x = slab[:, ox:ox + sx, oy:oy + sy, :]
    y = label_slab[ox:ox + sx, oy:oy + sy, :]
    return np.ascontiguousarray(x), np.ascontiguousarray(y.astype(np.float32))


def train_model(cases, tcfg: TrainConfig):
    """Train one network on a list of phantom cases.

    Returns (descriptor, params, log) where log is a list of
    (epoch, mean_loss, lr) rows.
    """
    desc = tcfg.descriptor()
    params = init_params(desc, tcfg.seed)
    state = AdamState(lr=tcfg.lr, beta1=tcfg.beta1, beta2=tcfg.beta2,
                      weight_decay=tcfg.weight_decay)
    policy_full = AugmentPolicy(jitter_halfwidth_mm=tcfg.jitter_halfwidth_mm,
                                rotation_deg=tcfg.rotation_deg)
    cache: dict = {}
    log = []
    for epoch in range(1, tcfg.epochs + 1):
        if tcfg.lr_warmup_epochs and epoch <= tcfg.lr_warmup_epochs:
            state.lr = tcfg.lr * epoch / (tcfg.lr_warmup_epochs + 1)
        elif tcfg.lr_decay_epoch and epoch >= tcfg.lr_decay_epoch:
            state.lr = tcfg.lr * tcfg.lr_decay_factor
        else:
            state.lr = tcfg.lr
        eseed = _epoch_seed(tcfg.seed, epoch)
        combo = pipeline.choose_sdt_source(policy_full, eseed)
        batch_x, batch_y = [], []
        losses = []
        for case_index, case in enumerate(cases):
            vois = pipeline.sample_vois(
                case.ctv_truth, tcfg.n_pos, tcfg.n_neg, tcfg.voi_size,
                seed=_sample_seed(tcfg.seed, epoch, case_index, 0xC0FE))
            for si, voi in enumerate(vois):
                sseed = _sample_seed(tcfg.seed, epoch, case_index, si)
                x, y = _prepare_sample(case, tcfg, tcfg.layout, combo, sseed, voi, cache)
                batch_x.append(x)
                batch_y.append(y)
                if len(batch_x) == tcfg.batch_size:
                    params, loss = _train_step(desc, params, state, batch_x, batch_y)
                    losses.append(loss)
                    batch_x, batch_y = [], []
        if batch_x:
            params, loss = _train_step(desc, params, state, batch_x, batch_y)
            losses.append(loss)
        log.append((epoch, float(np.mean(losses)), state.lr))
    return desc, params, log


def _train_step(desc, params, state, batch_x, batch_y):
    x = Tensor(np.stack(batch_x))
    y = np.stack(batch_y)[:, None]
    tensors = params_as_tensors(params)
    prob, _ = phnn_forward(x, desc, tensors)
    loss = dice_loss(prob, y)
    loss.backward()
    grads = {k: tensors[k].grad if tensors[k].grad is not None else np.zeros_like(v)
             for k, v in params.items()}
    params = adam_step(params, grads, state)
    return params, float(loss.data)


def fold_of(case_index: int, n_folds: int = 3) -> int:
    return case_index % n_folds


def cross_validate(cases, tcfg: TrainConfig, n_folds: int = 3):
    """Patient-level 3-fold split by case index; returns one trained model
    per fold as (fold, descriptor, params)."""
    models = []
    for f in range(n_folds):
        train_cases = [c for i, c in enumerate(cases) if fold_of(i, n_folds) != f]
        desc, params, _ = train_model(train_cases, tcfg)
        models.append((f, desc, params))
    return models


def infer_case(case, desc, params, tcfg: TrainConfig, oar_source: str = "manual"):
    """Whole-volume probability for one case at evaluation time."""
    from .evalx import sliding_window_infer

    policy = AugmentPolicy(gtvln_sources=("CLEAN",),
                           oar_sources=("AUTO",) if oar_source == "auto" else ("MANUAL",))
    stack = pipeline.assemble_stack(case, tcfg.layout, policy, seed=0,
                                    ct_clamp=tcfg.ct_clamp, sdt_clamp_mm=tcfg.sdt_clamp_mm)
    stride = tuple(max(1, s // 2) for s in tcfg.voi_size)
    return sliding_window_infer(stack, desc, params, window=tcfg.voi_size, stride=stride)


def evaluate_models(models, cases, tcfg: TrainConfig, oar_source: str = "manual",
                    threshold: float = 0.5, n_folds: int = 3):
    """Evaluate each fold's model on its held-out cases."""
    from .evalx import CaseRow, MetricsReport, asd, binarize, dice_score, hausdorff, hd95

    report = MetricsReport()
    by_fold = {f: (desc, params) for f, desc, params in models}
    for i, case in enumerate(cases):
        f = fold_of(i, n_folds)
        desc, params = by_fold[f]
        prob = infer_case(case, desc, params, tcfg, oar_source)
        pred = binarize(prob, threshold)
        truth = case.ctv_truth
        if pred.count() == 0 or truth.count() == 0:
            report.rows.append(CaseRow(case.case_id, f, None, None, None, None, "FAILED"))
            continue
        report.rows.append(CaseRow(
            case.case_id, f,
            dice_score(pred, truth),
            hausdorff(pred, truth),
            hd95(pred, truth),
            asd(pred, truth),
        ))
    return report
