"""Sliding-window inference and segmentation metrics (Dice, HD, ASD).

Surface distances are exact: boundaries come from the 6-connectivity
boundary operator and distances from the exact anisotropic EDT, so the
metrics agree bitwise with an all-pairs brute force.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .net import PhnnDescriptor, forward_stack
from .pipeline import ContextStack
from .sdt import EmptyObjectError, boundary_voxels, edt_sq
from .voxgrid import MaskVolume, VolumeGrid


def _axis_origins(dim: int, window: int, stride: int) -> list[int]:
    if dim <= window:
        return [0]
    origins = list(range(0, dim - window + 1, stride))
    if origins[-1] != dim - window:
        origins.append(dim - window)  # final window flush to the edge
    return origins


def _window_weight(window: tuple[int, int, int], sigma_frac: float = 0.125) -> np.ndarray:
    """Separable Gaussian window weight: voxels near a window's edge have
    less receptive-field context, so their predictions count for less when
    overlapping windows are averaged."""
    axes = [np.exp(-0.5 * ((np.arange(w) - (w - 1) / 2) / (sigma_frac * w)) ** 2)
            for w in window]
    return axes[0][:, None, None] * axes[1][None, :, None] * axes[2][None, None, :]


def sliding_window_infer(stack: ContextStack, desc: PhnnDescriptor,
                         params: dict[str, np.ndarray],
                         window: tuple[int, int, int] = (96, 96, 64),
                         stride: tuple[int, int, int] = (64, 64, 32)) -> VolumeGrid:
    """Whole-volume probability map: per-voxel centre-weighted mean over
    covering windows.

    Windows are placed at stride offsets with the final window clamped
    flush to each edge; a volume smaller than the window gets a single
    edge-clamped (replicate-padded) window.
    """
    dims = stack.dims
    C = stack.channels.shape[0]
    small = any(d < w for d, w in zip(dims, window))
    if small:
        pads = [(0, max(0, w - d)) for d, w in zip(dims, window)]
        padded = np.pad(stack.channels, [(0, 0)] + pads, mode="edge")
        sub = ContextStack(padded, stack.layout, stack.spacing)
        prob = forward_stack(sub, desc, params)
        return VolumeGrid(prob[: dims[0], : dims[1], : dims[2]], stack.spacing)

    weight = _window_weight(window)
    prob_sum = np.zeros(dims, dtype=np.float64)
    weight_sum = np.zeros(dims, dtype=np.float64)
    for ox in _axis_origins(dims[0], window[0], stride[0]):
        for oy in _axis_origins(dims[1], window[1], stride[1]):
            for oz in _axis_origins(dims[2], window[2], stride[2]):
                crop = stack.channels[:, ox:ox + window[0], oy:oy + window[1], oz:oz + window[2]]
                sub = ContextStack(crop, stack.layout, stack.spacing)
                p = forward_stack(sub, desc, params)
                sl = (slice(ox, ox + window[0]), slice(oy, oy + window[1]),
                      slice(oz, oz + window[2]))
                prob_sum[sl] += weight * p
                weight_sum[sl] += weight
    assert weight_sum.min() > 0
    return VolumeGrid(prob_sum / weight_sum, stack.spacing)


def binarize(prob: VolumeGrid, threshold: float = 0.5) -> MaskVolume:
    return MaskVolume((prob.data >= threshold).astype(np.uint8), prob.spacing)


def dice_score(a: MaskVolume, b: MaskVolume) -> float:
    if a.dims != b.dims:
        raise ValueError(f"dims differ: {a.dims} vs {b.dims}")
    na, nb = a.count(), b.count()
    if na == 0 and nb == 0:
        return 1.0
    inter = int((a.bool() & b.bool()).sum())
    return 2.0 * inter / (na + nb)


def _surface_distances(a: MaskVolume, b: MaskVolume):
    """Distances (mm) from each boundary voxel of a to the boundary of b,
    and vice versa."""
    ga = boundary_voxels(a)
    gb = boundary_voxels(b)
    dist_to_b = np.sqrt(edt_sq(gb))
    dist_to_a = np.sqrt(edt_sq(ga))
    da = dist_to_b[ga.bool()]
    db = dist_to_a[gb.bool()]
    return da, db


def hausdorff(a: MaskVolume, b: MaskVolume) -> float:
    """Exact symmetric Hausdorff distance (100th percentile), mm."""
    if a.count() == 0 or b.count() == 0:
        raise EmptyObjectError("undefined HD")
    da, db = _surface_distances(a, b)
    return float(max(da.max(), db.max()))


def hd95(a: MaskVolume, b: MaskVolume) -> float:
    if a.count() == 0 or b.count() == 0:
        raise EmptyObjectError("undefined HD")
    da, db = _surface_distances(a, b)
    return float(max(np.percentile(da, 95), np.percentile(db, 95)))


def asd(a: MaskVolume, b: MaskVolume) -> float:
    """Symmetric average surface distance, mm."""
    if a.count() == 0 or b.count() == 0:
        raise EmptyObjectError("undefined ASD")
    da, db = _surface_distances(a, b)
    return float((da.sum() + db.sum()) / (len(da) + len(db)))


@dataclass
class CaseRow:
    case_id: str
    fold: int
    dice: float | None
    hd_mm: float | None
    hd95_mm: float | None
    asd_mm: float | None
    status: str = "OK"  # OK | FAILED (empty prediction)


@dataclass
class MetricsReport:
    rows: list[CaseRow] = field(default_factory=list)

    def ok_rows(self) -> list[CaseRow]:
        return [r for r in self.rows if r.status == "OK"]

    def n_failed(self) -> int:
        return len(self.rows) - len(self.ok_rows())

    def mean_std(self, metric: str) -> tuple[float, float]:
        vals = np.array([getattr(r, metric) for r in self.ok_rows()], dtype=np.float64)
        if len(vals) == 0:
            return float("nan"), float("nan")
        return float(vals.mean()), float(vals.std())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case_id", "fold", "dice", "hd_mm", "hd95_mm", "asd_mm", "status"])
            for r in self.rows:
                w.writerow([
                    r.case_id, r.fold,
                    _fmt(r.dice), _fmt(r.hd_mm), _fmt(r.hd95_mm), _fmt(r.asd_mm),
                    r.status,
                ])
            for stat_name, stat_idx in (("mean", 0), ("std", 1)):
                w.writerow([
                    stat_name, "",
                    _fmt(self.mean_std("dice")[stat_idx]),
                    _fmt(self.mean_std("hd_mm")[stat_idx]),
                    _fmt(self.mean_std("hd95_mm")[stat_idx]),
                    _fmt(self.mean_std("asd_mm")[stat_idx]),
                    f"failed={self.n_failed()}",
                ])


def _fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


DICE_THRESHOLDS = tuple(np.round(np.arange(0.50, 1.0001, 0.05), 2))
ASD_THRESHOLDS = (0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0)


def cumulative_histogram(rows: list[CaseRow], metric: str,
                         thresholds=None) -> list[tuple[float, float]]:
    """Fraction of cases with dice >= t (metric='dice') or asd <= t
    (metric='asd') for each threshold t."""
    ok = [r for r in rows if r.status == "OK"]
    if not ok:
        raise ValueError("no rows to histogram")
    if metric == "dice":
        thresholds = DICE_THRESHOLDS if thresholds is None else thresholds
        vals = np.array([r.dice for r in ok])
        return [(float(t), float((vals >= t).mean())) for t in thresholds]
    if metric == "asd":
        thresholds = ASD_THRESHOLDS if thresholds is None else thresholds
        vals = np.array([r.asd_mm for r in ok])
        return [(float(t), float((vals <= t).mean())) for t in thresholds]
    raise ValueError(f"unknown metric {metric!r}")


def write_histogram_csv(path, table: list[tuple[float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fraction"])
        for t, f in table:
            w.writerow([f"{t:.6f}", f"{f:.6f}"])
