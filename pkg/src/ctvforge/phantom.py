"""Synthetic thoracic phantom cohort with rule-based ground-truth CTV.

Each case is a deterministic function of (config seed, case index): a
CT-like volume, GTV + lymph-node masks, three organ-at-risk masks, and a
CTV produced by a fixed geometric rule (margin expansion around GTV+LNs,
clipped where it would cut deep into an organ at risk). The rule is a
function of exactly the distance fields the delineation network sees, so
input ablations have a measurable effect on reachable accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .sdt import EmptyObjectError, signed_distance, union_masks
from .voxgrid import MaskVolume, Spacing, VolumeGrid

# Frozen CT intensity model (HU-like): structure means + Gaussian noise.
# The field of view is mediastinal soft tissue, so soft-tissue boundaries
# carry no contrast: the heart, spinal canal and lymph nodes are isodense
# with background, and only the tumor (faint) and lung (air) are visible.
# Node positions and soft-tissue organ boundaries are therefore only
# recoverable from the structure masks/SDT channels, not from intensity.
INTENSITY = {
    "background": 20.0,
    "lung": -800.0,
    "heart": 20.0,
    "spinal_canal": 20.0,
    "gtv": 60.0,
    "ln": 20.0,
}

OAR_NAMES = ("lung", "heart", "spinal_canal")

# simulate_auto_oar tuning: (probability a slice is perturbed, max offset
# in voxels). Frozen after calibrating cohort Dice against the target
# bands (lung ~0.96, heart ~0.95, spinal canal ~0.78).
_AUTO_OAR_TUNING = {
    "lung": (0.45, 1),
    "heart": (0.6, 1),
    "spinal_canal": (0.6, 1),
}


@dataclass(frozen=True)
class PhantomConfig:
    dims: tuple[int, int, int] = (64, 64, 48)
    spacing: Spacing = field(default_factory=lambda: Spacing(1.0, 1.0, 2.5))
    margin_xy: float = 12.0
    margin_z: float = 30.0
    oar_penetration: float = 2.0
    ln_count_range: tuple[int, int] = (1, 3)
    noise_sigma: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.margin_xy <= 0 or self.margin_z <= 0:
            raise ValueError("margins must be positive")
        if self.oar_penetration < 0:
            raise ValueError("oar_penetration must be >= 0")
        lo, hi = self.ln_count_range
        if lo < 0 or hi < lo:
            raise ValueError(f"bad ln_count_range {self.ln_count_range}")


@dataclass(frozen=True)
class PhantomCase:
    case_id: str
    seed: int
    ct: VolumeGrid
    gtv: MaskVolume
    lns: MaskVolume
    lung: MaskVolume
    heart: MaskVolume
    spinal_canal: MaskVolume
    ctv_truth: MaskVolume

    def oar(self, name: str) -> MaskVolume:
        if name not in OAR_NAMES:
            raise KeyError(f"unknown OAR {name!r}")
        return getattr(self, name)


def _mm_grids(dims, spacing: Spacing):
    nx, ny, nz = dims
    xs = np.arange(nx) * spacing.dx
    ys = np.arange(ny) * spacing.dy
    zs = np.arange(nz) * spacing.dz
    return xs[:, None, None], ys[None, :, None], zs[None, None, :]


def _ellipsoid(dims, spacing, center_mm, radii_mm) -> np.ndarray:
    xs, ys, zs = _mm_grids(dims, spacing)
    cx, cy, cz = center_mm
    rx, ry, rz = radii_mm
    return (((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 + ((zs - cz) / rz) ** 2) <= 1.0


def _tube_z(dims, spacing, center_xy_mm, radius_mm, z_range_mm) -> np.ndarray:
    xs, ys, zs = _mm_grids(dims, spacing)
    cx, cy = center_xy_mm
    inside_xy = ((xs - cx) ** 2 + (ys - cy) ** 2) <= radius_mm ** 2
    inside_z = (zs >= z_range_mm[0]) & (zs <= z_range_mm[1])
    return inside_xy & inside_z


def _case_rng(cfg: PhantomConfig, case_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, case_index]))


def generate_case(cfg: PhantomConfig, case_index: int) -> PhantomCase:
    """Build one phantom case; deterministic in (cfg.seed, case_index)."""
    nx, ny, nz = cfg.dims
    if nx < 48 or ny < 48 or nz < 32:
        raise ValueError(f"dims {cfg.dims} too small to place structures (need >= 48x48x32)")
    sp = cfg.spacing
    ext_x, ext_y, ext_z = nx * sp.dx, ny * sp.dy, nz * sp.dz
    rng = _case_rng(cfg, case_index)

    # esophagus-like GTV: vertical tube + attached tumor bulge
    tube_cx = ext_x * 0.5 + rng.uniform(-4.0, 4.0)
    tube_cy = ext_y * 0.58 + rng.uniform(-3.0, 3.0)
    z0 = rng.uniform(0.10, 0.25) * ext_z
    z1 = rng.uniform(0.75, 0.90) * ext_z
    tube_r = rng.uniform(2.0, 3.0)
    gtv = _tube_z(cfg.dims, sp, (tube_cx, tube_cy), tube_r, (z0, z1))
    bulge_cz = rng.uniform(z0 + 0.25 * (z1 - z0), z0 + 0.75 * (z1 - z0))
    bulge_r = (rng.uniform(5.0, 8.0), rng.uniform(5.0, 8.0), rng.uniform(8.0, 14.0))
    gtv |= _ellipsoid(cfg.dims, sp, (tube_cx, tube_cy, bulge_cz), bulge_r)

    # lymph nodes: small blobs offset from the tube
    n_ln = int(rng.integers(cfg.ln_count_range[0], cfg.ln_count_range[1] + 1))
    lns = np.zeros(cfg.dims, dtype=bool)
    for _ in range(n_ln):
        ang = rng.uniform(0, 2 * np.pi)
        dist = rng.uniform(7.0, 14.0)
        cx = tube_cx + dist * np.cos(ang)
        cy = tube_cy + 0.6 * dist * np.sin(ang)
        cz = rng.uniform(z0, z1)
        r = rng.uniform(2.5, 4.5)
        lns |= _ellipsoid(cfg.dims, sp, (cx, cy, cz), (r, r, 1.4 * r))

    # organs at risk
    canal = _tube_z(
        cfg.dims, sp,
        (ext_x * 0.5 + rng.uniform(-2.0, 2.0), ext_y * 0.80 + rng.uniform(-2.0, 2.0)),
        rng.uniform(2.0, 3.0), (0.0, ext_z),
    )
    heart = _ellipsoid(
        cfg.dims, sp,
        (ext_x * 0.46 + rng.uniform(-3.0, 3.0), ext_y * 0.36 + rng.uniform(-2.0, 2.0),
         ext_z * 0.40 + rng.uniform(-6.0, 6.0)),
        (rng.uniform(14.0, 18.0), rng.uniform(10.0, 13.0), rng.uniform(20.0, 28.0)),
    )
    lung = np.zeros(cfg.dims, dtype=bool)
    for side in (-1.0, 1.0):
        lung |= _ellipsoid(
            cfg.dims, sp,
            (ext_x * (0.5 + side * 0.30) + rng.uniform(-2.0, 2.0),
             ext_y * 0.50 + rng.uniform(-2.0, 2.0),
             ext_z * 0.5 + rng.uniform(-4.0, 4.0)),
            (rng.uniform(9.0, 12.0), rng.uniform(16.0, 22.0), rng.uniform(0.42, 0.50) * ext_z),
        )

    # overlap priority: gtv > lns > canal > heart > lung
    lns &= ~gtv
    canal &= ~(gtv | lns)
    heart &= ~(gtv | lns | canal)
    lung &= ~(gtv | lns | canal | heart)

    ct = np.full(cfg.dims, INTENSITY["background"], dtype=np.float64)
    ct[lung] = INTENSITY["lung"]
    ct[heart] = INTENSITY["heart"]
    ct[canal] = INTENSITY["spinal_canal"]
    ct[gtv] = INTENSITY["gtv"]
    ct[lns] = INTENSITY["ln"]
    ct += rng.normal(0.0, cfg.noise_sigma, size=cfg.dims)

    gtv_m = MaskVolume(gtv, sp)
    lns_m = MaskVolume(lns, sp)
    lung_m = MaskVolume(lung, sp)
    heart_m = MaskVolume(heart, sp)
    canal_m = MaskVolume(canal, sp)
    ctv = ctv_rule(gtv_m, lns_m, lung_m, heart_m, canal_m, cfg)

    case_seed = int(rng.integers(0, 2 ** 62))
    return PhantomCase(
        case_id=f"case_{case_index:03d}",
        seed=case_seed,
        ct=VolumeGrid(ct, sp),
        gtv=gtv_m, lns=lns_m, lung=lung_m, heart=heart_m, spinal_canal=canal_m,
        ctv_truth=ctv,
    )


def ctv_rule(gtv: MaskVolume, lns: MaskVolume, lung: MaskVolume, heart: MaskVolume,
             spinal_canal: MaskVolume, cfg: PhantomConfig) -> MaskVolume:
    """Ground-truth CTV: anisotropic margin around GTV+LNs, minus deep-OAR
    territory, always containing GTV+LNs."""
    merged = union_masks(gtv, lns)
    if merged.count() == 0:
        raise EmptyObjectError("empty object")
    sp = merged.spacing
    # rescale spacing so the margin surface maps to scaled distance 1.0
    scaled = MaskVolume(
        merged.data,
        Spacing(sp.dx / cfg.margin_xy, sp.dy / cfg.margin_xy, sp.dz / cfg.margin_z),
    )
    within_margin = signed_distance(scaled).data <= 1.0

    deep_oar = np.zeros(merged.dims, dtype=bool)
    for oar in (lung, heart, spinal_canal):
        if oar.count() == 0:
            continue
        deep_oar |= signed_distance(oar).data < -cfg.oar_penetration

    ctv = (within_margin & ~deep_oar) | merged.bool()
    return MaskVolume(ctv, sp)


def simulate_auto_oar(manual: MaskVolume, organ: str, seed: int,
                      p_perturb: float | None = None) -> MaskVolume:
    """Stand-in for an automatic organ segmenter: seeded per-slice boundary
    dilation/erosion, calibrated so the Dice against the manual mask lands
    in the organ's target band (thin structures degrade most).

    p_perturb overrides the per-slice perturbation probability; 0 disables
    the perturbation entirely and returns the manual mask unchanged.
    """
    if organ not in _AUTO_OAR_TUNING:
        raise KeyError(f"unknown OAR {organ!r}")
    if manual.count() == 0:
        raise EmptyObjectError("empty mask")
    default_p, max_off = _AUTO_OAR_TUNING[organ]
    if p_perturb is None:
        p_perturb = default_p
    rng = np.random.default_rng(np.random.SeedSequence([seed, _organ_code(organ)]))
    out = manual.bool().copy()
    disk = ndimage.generate_binary_structure(2, 1)
    nz = manual.dims[2]
    for k in range(nz):
        sl = out[:, :, k]
        if not sl.any():
            rng.uniform()  # keep the stream aligned across empty slices
            continue
        u = rng.uniform()
        if u >= p_perturb:
            continue
        off = int(rng.integers(1, max_off + 1)) * (1 if rng.uniform() < 0.5 else -1)
        if off > 0:
            sl = ndimage.binary_dilation(sl, disk, iterations=off)
        else:
            eroded = ndimage.binary_erosion(sl, disk, iterations=-off)
            if eroded.any():
                sl = eroded
        out[:, :, k] = sl
    if not out.any():
        return manual
    return MaskVolume(out, manual.spacing)


def _organ_code(organ: str) -> int:
    return OAR_NAMES.index(organ)
