"""3D volume/mask containers, world<->index geometry, resampling, svox I/O.

Arrays are stored with shape (nx, ny, nz); the serialized payload is
x-fastest, matching the svox format. The world origin sits at the center
of voxel (0, 0, 0), so world position = index * spacing componentwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

SVOX_MAGIC = b"SVOX0001"
_DTYPE_FLOAT32 = 0
_DTYPE_MASK_U8 = 1


class SvoxError(ValueError):
    """Malformed svox file."""


@dataclass(frozen=True)
class Spacing:
    """Voxel spacing in millimeters along (x, y, z)."""

    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        for v in (self.dx, self.dy, self.dz):
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"spacing components must be positive finite, got {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz], dtype=np.float64)


@dataclass(frozen=True)
class VolumeGrid:
    """Dense 3D scalar field on an anisotropic voxel grid.

    Immutable after construction: the underlying array is marked
    read-only so instances are safe to share across threads.
    """

    data: np.ndarray
    spacing: Spacing

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"expected 3D volume, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("volume contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class MaskVolume:
    """Binary 3D field sharing the VolumeGrid geometry. Values in {0, 1}."""

    data: np.ndarray
    spacing: Spacing

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.uint8)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"expected 3D mask, got shape {arr.shape}")
        if arr.max(initial=0) > 1:
            raise ValueError("mask values must be in {0, 1}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def bool(self) -> np.ndarray:
        return self.data.astype(bool)

    def count(self) -> int:
        return int(self.data.sum())


def world_to_index(p_mm, grid: VolumeGrid | MaskVolume) -> np.ndarray:
    """Continuous voxel index of a world point (mm). Out-of-range is legal."""
    p = np.asarray(p_mm, dtype=np.float64)
    return p / grid.spacing.as_array()


def _output_dims(dims, src: Spacing, target: Spacing) -> tuple[int, int, int]:
    # round-half-up, clamped to >= 1
    raw = np.array(dims) * src.as_array() / target.as_array()
    out = np.floor(raw + 0.5).astype(int)
    return tuple(int(max(1, d)) for d in out)


def resample(vol, target: Spacing, mode: str):
    """Resample a volume or mask to a new spacing in world coordinates.

    mode='trilinear' for scalar volumes, mode='nearest' required for masks.
    Out-of-bounds samples clamp to edge values.
    """
    if mode not in ("trilinear", "nearest"):
        raise ValueError(f"unknown resample mode {mode!r}")
    is_mask = isinstance(vol, MaskVolume)
    if is_mask and mode != "nearest":
        raise ValueError("masks must be resampled with mode='nearest'")

    src = vol.spacing
    out_dims = _output_dims(vol.dims, src, target)
    # continuous source index per output voxel center, per axis
    coords = [
        np.arange(n, dtype=np.float64) * t / s
        for n, t, s in zip(out_dims, (target.dx, target.dy, target.dz), (src.dx, src.dy, src.dz))
    ]

    if mode == "nearest":
        idx = [
            np.clip(np.floor(c + 0.5).astype(np.intp), 0, d - 1)
            for c, d in zip(coords, vol.dims)
        ]
        out = vol.data[np.ix_(*idx)]
        if is_mask:
            return MaskVolume(out, target)
        return VolumeGrid(out, target)

    data = vol.data.astype(np.float64)
    lo, hi, frac = [], [], []
    for c, d in zip(coords, vol.dims):
        c = np.clip(c, 0.0, d - 1.0)
        f = np.floor(c).astype(np.intp)
        f = np.minimum(f, d - 1)
        lo.append(f)
        hi.append(np.minimum(f + 1, d - 1))
        frac.append(c - f)

    out = np.zeros(out_dims, dtype=np.float64)
    wx = [1.0 - frac[0], frac[0]]
    wy = [1.0 - frac[1], frac[1]]
    wz = [1.0 - frac[2], frac[2]]
    ix = [lo[0], hi[0]]
    iy = [lo[1], hi[1]]
    iz = [lo[2], hi[2]]
    for a in range(2):
        for b in range(2):
            for c in range(2):
                w = (
                    wx[a][:, None, None]
                    * wy[b][None, :, None]
                    * wz[c][None, None, :]
                )
                out += w * data[np.ix_(ix[a], iy[b], iz[c])]
    return VolumeGrid(out.astype(np.float32), target)


def write_svox(vol, path) -> None:
    """Serialize to the svox format (little-endian, x-fastest payload)."""
    if isinstance(vol, MaskVolume):
        code = _DTYPE_MASK_U8
        payload = vol.data.ravel(order="F").tobytes()
    elif isinstance(vol, VolumeGrid):
        code = _DTYPE_FLOAT32
        payload = vol.data.astype("<f4").ravel(order="F").tobytes()
    else:
        raise TypeError(f"cannot serialize {type(vol).__name__}")
    nx, ny, nz = vol.dims
    sp = vol.spacing
    header = SVOX_MAGIC + struct.pack("<B3I3f", code, nx, ny, nz, sp.dx, sp.dy, sp.dz)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_svox(path):
    """Read an svox file back into a VolumeGrid or MaskVolume."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:8] != SVOX_MAGIC:
        raise SvoxError("bad magic")
    if len(raw) < 8 + struct.calcsize("<B3I3f"):
        raise SvoxError("truncated header")
    code, nx, ny, nz, dx, dy, dz = struct.unpack_from("<B3I3f", raw, 8)
    if code not in (_DTYPE_FLOAT32, _DTYPE_MASK_U8):
        raise SvoxError(f"bad dtype code {code}")
    if min(nx, ny, nz) < 1:
        raise SvoxError("bad dims")
    n = nx * ny * nz
    body = raw[8 + struct.calcsize("<B3I3f"):]
    itemsize = 4 if code == _DTYPE_FLOAT32 else 1
    if len(body) < n * itemsize:
        raise SvoxError("short payload")
    if len(body) > n * itemsize:
        raise SvoxError("trailing bytes")
    spacing = Spacing(float(dx), float(dy), float(dz))
    if code == _DTYPE_FLOAT32:
        flat = np.frombuffer(body, dtype="<f4", count=n)
        data = flat.reshape((nx, ny, nz), order="F")
        return VolumeGrid(data, spacing)
    flat = np.frombuffer(body, dtype=np.uint8, count=n)
    return MaskVolume(flat.reshape((nx, ny, nz), order="F"), spacing)
