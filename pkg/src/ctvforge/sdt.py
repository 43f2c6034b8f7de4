"""Boundary extraction and exact anisotropic signed distance transforms.

Distances are Euclidean, measured between voxel centers in millimeters.
All comparisons happen on squared distances; the square root is taken
only when producing output volumes, so there are no float ties to break.
"""

from __future__ import annotations

import numpy as np

from .backends import edt_sq_pass
from .voxgrid import MaskVolume, Spacing, VolumeGrid

_BIG = 1e30


class EmptyObjectError(ValueError):
    """Raised when an operation needs a non-empty mask."""


def boundary_voxels(mask: MaskVolume) -> MaskVolume:
    """Object voxels with at least one 6-neighbor that is background.

    Voxels on the volume edge count their missing neighbors as background.
    """
    m = mask.bool()
    if not m.any():
        raise EmptyObjectError("empty object")
    padded = np.pad(m, 1, constant_values=False)
    interior = np.ones_like(m)
    for axis in range(3):
        for shift in (-1, 1):
            interior &= np.roll(padded, shift, axis=axis)[1:-1, 1:-1, 1:-1]
    boundary = m & ~interior
    return MaskVolume(boundary.astype(np.uint8), mask.spacing)


def edt_sq(features: MaskVolume) -> np.ndarray:
    """Exact squared Euclidean distance (mm^2) to the nearest feature voxel."""
    f = features.bool()
    if not f.any():
        raise EmptyObjectError("empty feature set")
    g2 = np.where(f, 0.0, _BIG)
    sp = features.spacing.as_array()
    for axis in range(3):
        moved = np.moveaxis(g2, axis, -1)
        shape = moved.shape
        rows = moved.reshape(-1, shape[-1])
        rows = edt_sq_pass(np.ascontiguousarray(rows), float(sp[axis]))
        g2 = np.moveaxis(rows.reshape(shape), -1, axis)
    return g2


def edt_exact(features: MaskVolume) -> VolumeGrid:
    """Exact Euclidean distance transform in mm."""
    return VolumeGrid(np.sqrt(edt_sq(features)), features.spacing)


def signed_distance(mask: MaskVolume) -> VolumeGrid:
    """Signed distance to the mask boundary: <= 0 inside, >= 0 outside.

    Boundary voxels are inside the mask and get exactly 0.0 (not -0.0).
    """
    gamma = boundary_voxels(mask)
    dist = np.sqrt(edt_sq(gamma))
    signed = np.where(mask.bool(), -dist, dist) + 0.0
    return VolumeGrid(signed, mask.spacing)


def union_masks(a: MaskVolume, b: MaskVolume) -> MaskVolume:
    if a.dims != b.dims:
        raise ValueError(f"mask dims differ: {a.dims} vs {b.dims}")
    return MaskVolume(a.bool() | b.bool(), a.spacing)


def combined_gtv_ln_sdt(gtv: MaskVolume, lns: MaskVolume) -> VolumeGrid:
    """Signed distance of the combined tumor + nodes mask (shared channel)."""
    merged = union_masks(gtv, lns)
    if merged.count() == 0:
        raise EmptyObjectError("empty object")
    return signed_distance(merged)
