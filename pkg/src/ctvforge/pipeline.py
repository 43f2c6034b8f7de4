"""Context-channel assembly, normalization, augmentation, and VOI sampling.

Channel order within a stack is a frozen contract; each stack carries a
layout checksum so a model trained on one channel order refuses input
assembled in another.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import phantom as phantom_mod
from .sdt import EmptyObjectError, combined_gtv_ln_sdt, signed_distance
from .voxgrid import MaskVolume, Spacing, VolumeGrid

CHANNEL_LAYOUTS = {
    "ct": ("CT",),
    "ct_mask": ("CT", "GTVLN_MASK"),
    "ct_gtvln_sdt": ("CT", "GTVLN_SDT"),
    "ct_all_sdt": ("CT", "GTVLN_SDT", "LUNG_SDT", "HEART_SDT", "CANAL_SDT"),
}

CT_CLAMP = 1000.0     # HU clamp before scaling to [-1, 1]
SDT_CLAMP_MM = 40.0  # proximity clamp; exceeds the largest CTV margin (30 mm)

GTVLN_SOURCES = ("CLEAN", "JITTERED")
OAR_SOURCES = ("MANUAL", "AUTO")


def layout_checksum(layout: str) -> str:
    channels = CHANNEL_LAYOUTS[layout]
    return hashlib.sha1("|".join(channels).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ContextStack:
    """Ordered multi-channel volume (C, nx, ny, nz), all channels in [-1, 1]."""

    channels: np.ndarray
    layout: str
    spacing: Spacing
    checksum: str = ""

    def __post_init__(self):
        arr = np.ascontiguousarray(self.channels, dtype=np.float32)
        expected = len(CHANNEL_LAYOUTS[self.layout])
        if arr.ndim != 4 or arr.shape[0] != expected:
            raise ValueError(
                f"layout {self.layout!r} needs {expected} channels, got shape {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "channels", arr)
        if not self.checksum:
            object.__setattr__(self, "checksum", layout_checksum(self.layout))

    @property
    def dims(self):
        return self.channels.shape[1:]


@dataclass(frozen=True)
class AugmentPolicy:
    jitter_halfwidth_mm: float = 2.0
    rotation_deg: float = 10.0
    gtvln_sources: tuple[str, ...] = GTVLN_SOURCES
    oar_sources: tuple[str, ...] = OAR_SOURCES

    def __post_init__(self):
        for s in self.gtvln_sources:
            if s not in GTVLN_SOURCES:
                raise ValueError(f"bad gtvln source {s!r}")
        for s in self.oar_sources:
            if s not in OAR_SOURCES:
                raise ValueError(f"bad OAR source {s!r}")


EVAL_POLICY = AugmentPolicy(gtvln_sources=("CLEAN",), oar_sources=("MANUAL",))


@dataclass(frozen=True)
class VoiSpec:
    origin: tuple[int, int, int]
    size: tuple[int, int, int]
    label: str  # POSITIVE | NEGATIVE


def normalize_ct(ct: VolumeGrid, clamp: float = CT_CLAMP) -> VolumeGrid:
    data = np.clip(ct.data, -clamp, clamp) / clamp
    return VolumeGrid(data, ct.spacing)


def normalize_sdt(sdt: VolumeGrid, clamp: float = SDT_CLAMP_MM) -> VolumeGrid:
    """Clamped proximity encoding: 0 far outside, 0.5 on the surface,
    1 at or beyond `clamp` mm inside. Voxels far from the structure carry
    no signal, so they map to zero rather than a large constant offset."""
    data = (1.0 - np.clip(sdt.data, -clamp, clamp) / clamp) / 2.0
    return VolumeGrid(data, sdt.spacing)


def choose_sdt_source(policy: AugmentPolicy, epoch_seed: int) -> tuple[str, str]:
    """Uniform draw over the allowed (gtvln, oar) source combinations."""
    combos = [(g, o) for g in policy.gtvln_sources for o in policy.oar_sources]
    rng = np.random.default_rng(np.random.SeedSequence([epoch_seed, 0x5D7]))
    return combos[int(rng.integers(len(combos)))]


def jitter_components(mask: MaskVolume, halfwidth_mm: float, seed: int) -> MaskVolume:
    """Translate each 6-connected component independently by a random
    per-axis shift in [-halfwidth, +halfwidth] mm, rounded to whole voxels.
    Voxels pushed outside the volume are dropped."""
    m = mask.bool()
    if not m.any():
        raise EmptyObjectError("empty mask")
    structure = ndimage.generate_binary_structure(3, 1)
    labels, n_comp = ndimage.label(m, structure=structure)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x11]))
    sp = mask.spacing.as_array()
    out = np.zeros_like(m)
    for comp in range(1, n_comp + 1):
        shift_mm = rng.uniform(-halfwidth_mm, halfwidth_mm, size=3)
        shift = np.rint(shift_mm / sp).astype(int)
        comp_mask = labels == comp
        out |= _shift_mask(comp_mask, shift)
    return MaskVolume(out, mask.spacing)


def _shift_mask(m: np.ndarray, shift) -> np.ndarray:
    out = np.zeros_like(m)
    src, dst = [], []
    for axis, s in enumerate(shift):
        n = m.shape[axis]
        s = int(s)
        if abs(s) >= n:
            return out
        if s >= 0:
            src.append(slice(0, n - s))
            dst.append(slice(s, n))
        else:
            src.append(slice(-s, n))
            dst.append(slice(0, n + s))
    out[tuple(dst)] = m[tuple(src)]
    return out


def _cos_sin_deg(angle_deg: float) -> tuple[float, float]:
    # exact values at quadrant angles so permutation tests hold bitwise
    a = angle_deg % 360.0
    table = {0.0: (1.0, 0.0), 90.0: (0.0, 1.0), 180.0: (-1.0, 0.0), 270.0: (0.0, -1.0)}
    if a in table:
        return table[a]
    rad = np.radians(angle_deg)
    return float(np.cos(rad)), float(np.sin(rad))


def _rotate_xy_array(data: np.ndarray, spacing: Spacing, angle_deg: float,
                     mode: str) -> np.ndarray:
    """In-plane rotation about the slice center; clamp-to-edge sampling."""
    nx, ny = data.shape[0], data.shape[1]
    c, s = _cos_sin_deg(angle_deg)
    cx = (nx - 1) * spacing.dx / 2.0
    cy = (ny - 1) * spacing.dy / 2.0
    px = np.arange(nx)[:, None] * spacing.dx - cx
    py = np.arange(ny)[None, :] * spacing.dy - cy
    src_x = (c * px - s * py + cx) / spacing.dx
    src_y = (s * px + c * py + cy) / spacing.dy
    if mode == "nearest":
        ix = np.clip(np.rint(src_x).astype(np.intp), 0, nx - 1)
        iy = np.clip(np.rint(src_y).astype(np.intp), 0, ny - 1)
        return data[ix, iy, ...]
    sx = np.clip(src_x, 0.0, nx - 1.0)
    sy = np.clip(src_y, 0.0, ny - 1.0)
    x0 = np.minimum(np.floor(sx).astype(np.intp), nx - 1)
    y0 = np.minimum(np.floor(sy).astype(np.intp), ny - 1)
    x1 = np.minimum(x0 + 1, nx - 1)
    y1 = np.minimum(y0 + 1, ny - 1)
    fx = (sx - x0)[..., None] if data.ndim == 3 else (sx - x0)
    fy = (sy - y0)[..., None] if data.ndim == 3 else (sy - y0)
    d = data.astype(np.float64)
    out = (
        d[x0, y0, ...] * (1 - fx) * (1 - fy)
        + d[x1, y0, ...] * fx * (1 - fy)
        + d[x0, y1, ...] * (1 - fx) * fy
        + d[x1, y1, ...] * fx * fy
    )
    return out


def rotate_xy(obj, angle_deg: float, mode: str | None = None, *, _unguarded: bool = False):
    """Rotate a volume, mask, or stack in the x-y plane (|angle| <= 10 deg)."""
    if not _unguarded and abs(angle_deg) > 10.0:
        raise ValueError(f"rotation angle {angle_deg} exceeds +/-10 degrees")
    if isinstance(obj, MaskVolume):
        out = _rotate_xy_array(obj.bool(), obj.spacing, angle_deg, "nearest")
        return MaskVolume(out.astype(np.uint8), obj.spacing)
    if isinstance(obj, VolumeGrid):
        out = _rotate_xy_array(obj.data, obj.spacing, angle_deg, mode or "trilinear")
        return VolumeGrid(out.astype(np.float32), obj.spacing)
    if isinstance(obj, ContextStack):
        rotated = np.stack([
            _rotate_xy_array(ch, obj.spacing, angle_deg, "trilinear")
            for ch in obj.channels
        ])
        return ContextStack(rotated.astype(np.float32), obj.layout, obj.spacing)
    raise TypeError(f"cannot rotate {type(obj).__name__}")


def sample_vois(ctv_truth: MaskVolume, n_pos: int = 60, n_neg: int = 20,
                voi_size: tuple[int, int, int] = (32, 32, 16),
                seed: int = 0) -> list[VoiSpec]:
    """Positive VOIs centered on uniformly drawn CTV voxels, negative VOIs
    with uniform centers anywhere; origins clamped fully inside bounds."""
    dims = ctv_truth.dims
    for d, v in zip(dims, voi_size):
        if v > d:
            raise ValueError(f"voi_size {voi_size} exceeds volume dims {dims}")
    ctv_idx = np.argwhere(ctv_truth.bool())
    if len(ctv_idx) == 0:
        raise EmptyObjectError("empty CTV")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x701]))
    vois = []
    for i in range(n_pos + n_neg):
        if i < n_pos:
            center = ctv_idx[int(rng.integers(len(ctv_idx)))]
            label = "POSITIVE"
        else:
            center = np.array([int(rng.integers(d)) for d in dims])
            label = "NEGATIVE"
        origin = [
            int(np.clip(center[a] - voi_size[a] // 2, 0, dims[a] - voi_size[a]))
            for a in range(3)
        ]
        vois.append(VoiSpec(tuple(origin), tuple(voi_size), label))
    return vois


def _auto_oar(case, organ: str) -> MaskVolume:
    return phantom_mod.simulate_auto_oar(case.oar(organ), organ, case.seed)


_SDT_CHANNEL_ORGAN = {"LUNG_SDT": "lung", "HEART_SDT": "heart", "CANAL_SDT": "spinal_canal"}


def assemble_stack(case, layout: str, policy: AugmentPolicy = EVAL_POLICY,
                   seed: int = 0, cache: dict | None = None,
                   ct_clamp: float = CT_CLAMP,
                   sdt_clamp_mm: float = SDT_CLAMP_MM) -> ContextStack:
    """Build the network input stack for one case.

    The (gtvln, oar) source combination is drawn from the policy with
    `seed` as the epoch seed; with the evaluation policy the result is
    seed-independent. `cache` (optional dict) memoizes normalized SDT
    channels that do not depend on the jitter draw.
    """
    if layout not in CHANNEL_LAYOUTS:
        raise ValueError(f"unknown channel layout {layout!r}")
    gtvln_src, oar_src = choose_sdt_source(policy, seed)
    channels = []
    for name in CHANNEL_LAYOUTS[layout]:
        if name == "CT":
            channels.append(normalize_ct(case.ct, ct_clamp).data)
        elif name == "GTVLN_MASK":
            merged = case.gtv.bool() | case.lns.bool()
            channels.append(merged.astype(np.float32))
        elif name == "GTVLN_SDT":
            channels.append(
                _gtvln_sdt_channel(case, gtvln_src, policy.jitter_halfwidth_mm,
                                   seed, cache, sdt_clamp_mm))
        elif name in _SDT_CHANNEL_ORGAN:
            channels.append(_oar_sdt_channel(case, name, oar_src, cache, sdt_clamp_mm))
        else:  # pragma: no cover - layouts are a closed set
            raise ValueError(f"missing mask for channel {name}")
    return ContextStack(np.stack(channels), layout, case.ct.spacing)


def _gtvln_sdt_channel(case, source: str, halfwidth_mm: float, seed: int, cache,
                       clamp: float = SDT_CLAMP_MM) -> np.ndarray:
    if source == "CLEAN":
        key = (case.case_id, "GTVLN_SDT", "CLEAN", clamp)
        if cache is not None and key in cache:
            return cache[key]
        val = normalize_sdt(combined_gtv_ln_sdt(case.gtv, case.lns), clamp).data
        if cache is not None:
            cache[key] = val
        return val
    # jittered: depends on the per-sample seed, never cached
    merged = MaskVolume(case.gtv.bool() | case.lns.bool(), case.gtv.spacing)
    jittered = jitter_components(merged, halfwidth_mm, seed)
    if jittered.count() == 0:
        jittered = merged
    return normalize_sdt(signed_distance(jittered), clamp).data


def _oar_sdt_channel(case, channel: str, source: str, cache,
                     clamp: float = SDT_CLAMP_MM) -> np.ndarray:
    organ = _SDT_CHANNEL_ORGAN[channel]
    key = (case.case_id, channel, source, clamp)
    if cache is not None and key in cache:
        return cache[key]
    mask = case.oar(organ) if source == "MANUAL" else _auto_oar(case, organ)
    if mask.count() == 0:
        raise ValueError(f"missing mask for channel {channel}")
    val = normalize_sdt(signed_distance(mask), clamp).data
    if cache is not None:
        cache[key] = val
    return val
