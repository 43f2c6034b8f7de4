"""Shared fixtures and brute-force oracles used across the test suite.

The oracles here are deliberately naive O(n^2) implementations; the
production code must agree with them exactly (squared distances are exact
float64 values for the spacings used in tests, so == comparisons hold).
"""

from __future__ import annotations

import numpy as np
import pytest

from ctvforge.phantom import PhantomConfig, generate_case
from ctvforge.voxgrid import MaskVolume, Spacing


# ---------------------------------------------------------------------------
# brute-force oracles


def brute_edt_sq(features: np.ndarray, spacing) -> np.ndarray:
    """All-pairs squared Euclidean distance to the nearest feature voxel."""
    f = np.asarray(features, dtype=bool)
    sp = np.asarray(spacing, dtype=np.float64)
    fid = np.argwhere(f).astype(np.float64)  # (F, 3)
    assert len(fid) > 0
    dims = f.shape
    vox = np.indices(dims).reshape(3, -1).T.astype(np.float64)  # (N, 3)
    out = np.empty(len(vox), dtype=np.float64)
    chunk = 4096
    for s in range(0, len(vox), chunk):
        v = vox[s:s + chunk]
        # accumulate per-axis in the same x,y,z order as the production sweep
        d = ((v[:, None, 0] - fid[None, :, 0]) * sp[0]) ** 2
        d = d + ((v[:, None, 1] - fid[None, :, 1]) * sp[1]) ** 2
        d = d + ((v[:, None, 2] - fid[None, :, 2]) * sp[2]) ** 2
        out[s:s + chunk] = d.min(axis=1)
    return out.reshape(dims)


def brute_boundary(mask: np.ndarray) -> np.ndarray:
    """Object voxels with a 6-neighbor that is background or outside."""
    m = np.asarray(mask, dtype=bool)
    out = np.zeros_like(m)
    nx, ny, nz = m.shape
    for x, y, z in np.argwhere(m):
        on_edge = False
        for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0),
                           (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            u, v, w = x + dx, y + dy, z + dz
            if not (0 <= u < nx and 0 <= v < ny and 0 <= w < nz) or not m[u, v, w]:
                on_edge = True
                break
        out[x, y, z] = on_edge
    return out


def brute_signed_distance(mask: np.ndarray, spacing) -> np.ndarray:
    gamma = brute_boundary(mask)
    d = np.sqrt(brute_edt_sq(gamma, spacing))
    return np.where(np.asarray(mask, dtype=bool), -d, d) + 0.0


def brute_surface_metrics(a: np.ndarray, b: np.ndarray, spacing):
    """(hd, hd95, asd) computed from scratch; mirrors float op order of evalx."""
    ga = np.argwhere(brute_boundary(a)).astype(np.float64)
    gb = np.argwhere(brute_boundary(b)).astype(np.float64)
    sp = np.asarray(spacing, dtype=np.float64)

    def dists(src, dst):
        d = ((src[:, None, 0] - dst[None, :, 0]) * sp[0]) ** 2
        d = d + ((src[:, None, 1] - dst[None, :, 1]) * sp[1]) ** 2
        d = d + ((src[:, None, 2] - dst[None, :, 2]) * sp[2]) ** 2
        return np.sqrt(d.min(axis=1))

    da = dists(ga, gb)
    db = dists(gb, ga)
    hd = float(max(da.max(), db.max()))
    hd95 = float(max(np.percentile(da, 95), np.percentile(db, 95)))
    asd_v = float((da.sum() + db.sum()) / (len(da) + len(db)))
    return hd, hd95, asd_v


def brute_dice(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    na, nb = int(a.sum()), int(b.sum())
    if na == 0 and nb == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / (na + nb)


def random_mask(rng: np.random.Generator, max_dims=(32, 32, 16),
                spacing=(1.0, 1.0, 2.5), p=None) -> MaskVolume:
    dims = tuple(int(rng.integers(3, m + 1)) for m in max_dims)
    if p is None:
        p = float(rng.uniform(0.02, 0.3))
    m = rng.random(dims) < p
    if not m.any():
        m[tuple(int(rng.integers(d)) for d in dims)] = True
    return MaskVolume(m.astype(np.uint8), Spacing(*spacing))


# ---------------------------------------------------------------------------
# fixtures


@pytest.fixture(scope="session")
def default_phantom_config():
    return PhantomConfig()


@pytest.fixture(scope="session")
def phantom_case(default_phantom_config):
    """One deterministic phantom case shared by the whole session."""
    return generate_case(default_phantom_config, 0)


@pytest.fixture(scope="session")
def phantom_case_with_lns(default_phantom_config):
    """A deterministic case guaranteed to contain lymph nodes."""
    for idx in range(1, 20):
        case = generate_case(default_phantom_config, idx)
        if case.lns.count() > 0:
            return case
    raise RuntimeError("no case with lymph nodes in the first 20 indices")
