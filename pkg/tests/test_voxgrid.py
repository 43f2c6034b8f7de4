import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctvforge.voxgrid import (
    MaskVolume,
    Spacing,
    SvoxError,
    VolumeGrid,
    read_svox,
    resample,
    world_to_index,
    write_svox,
)


def test_spacing_validation():
    Spacing(1.0, 1.0, 2.5)
    with pytest.raises(ValueError):
        Spacing(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        Spacing(1.0, -2.0, 1.0)
    with pytest.raises(ValueError):
        Spacing(1.0, 1.0, float("nan"))


def test_volume_grid_immutable_and_validated():
    v = VolumeGrid(np.zeros((2, 3, 4)), Spacing(1, 1, 1))
    assert v.dims == (2, 3, 4)
    with pytest.raises(ValueError):
        v.data[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        VolumeGrid(np.zeros((2, 3)), Spacing(1, 1, 1))
    with pytest.raises(ValueError):
        VolumeGrid(np.full((2, 2, 2), np.nan), Spacing(1, 1, 1))


def test_mask_volume_values():
    MaskVolume(np.ones((2, 2, 2), np.uint8), Spacing(1, 1, 1))
    with pytest.raises(ValueError):
        MaskVolume(np.full((2, 2, 2), 2, np.uint8), Spacing(1, 1, 1))


def test_world_to_index_examples():
    g = VolumeGrid(np.zeros((4, 4, 4)), Spacing(1.0, 1.0, 2.5))
    # world origin at center of voxel (0,0,0): p = index * spacing
    np.testing.assert_allclose(world_to_index((0, 0, 0), g), [0, 0, 0])
    np.testing.assert_allclose(world_to_index((3, 2, 5), g), [3, 2, 2])
    np.testing.assert_allclose(world_to_index((0.5, 0.5, 1.25), g), [0.5, 0.5, 0.5])


def test_resample_identity():
    rng = np.random.default_rng(0)
    v = VolumeGrid(rng.random((5, 6, 7)), Spacing(1, 1, 2.5))
    out = resample(v, Spacing(1, 1, 2.5), "trilinear")
    assert out.dims == v.dims
    np.testing.assert_allclose(out.data, v.data, atol=1e-6)


def test_resample_output_dims_round_half_up():
    v = VolumeGrid(np.zeros((10, 10, 10)), Spacing(1, 1, 1))
    # 10 * 1 / 4 = 2.5 -> rounds half up to 3
    out = resample(v, Spacing(4, 4, 4), "nearest")
    assert out.dims == (3, 3, 3)


def test_resample_downsample_by_two_trilinear_oracle():
    # spacing 1 -> 2: output index i samples source coordinate 2i exactly,
    # so trilinear reduces to a gather of even-index source voxels.
    rng = np.random.default_rng(1)
    v = VolumeGrid(rng.random((8, 8, 8)), Spacing(1, 1, 1))
    out = resample(v, Spacing(2, 2, 2), "trilinear")
    assert out.dims == (4, 4, 4)
    np.testing.assert_allclose(out.data, v.data[::2, ::2, ::2], atol=1e-6)


def test_resample_linear_ramp_is_exact():
    # a linear field is reproduced exactly by trilinear interpolation
    xs = np.arange(9, dtype=np.float64)
    field = xs[:, None, None] + 0 * xs[None, :, None] + 0 * xs[None, None, :]
    field = np.broadcast_to(field, (9, 9, 9))
    v = VolumeGrid(field, Spacing(1, 1, 1))
    out = resample(v, Spacing(1.5, 1.5, 1.5), "trilinear")
    expect = np.arange(out.dims[0]) * 1.5
    np.testing.assert_allclose(out.data[:, 0, 0], expect, atol=1e-5)


def test_resample_mask_requires_nearest():
    m = MaskVolume(np.ones((4, 4, 4), np.uint8), Spacing(1, 1, 1))
    with pytest.raises(ValueError):
        resample(m, Spacing(2, 2, 2), "trilinear")
    out = resample(m, Spacing(2, 2, 2), "nearest")
    assert isinstance(out, MaskVolume)
    assert out.dims == (2, 2, 2)


def test_resample_unknown_mode():
    v = VolumeGrid(np.zeros((4, 4, 4)), Spacing(1, 1, 1))
    with pytest.raises(ValueError):
        resample(v, Spacing(1, 1, 1), "cubic")


def test_svox_roundtrip_volume(tmp_path):
    rng = np.random.default_rng(2)
    v = VolumeGrid(rng.random((3, 4, 5)).astype(np.float32), Spacing(1.0, 1.0, 2.5))
    p = tmp_path / "v.svox"
    write_svox(v, p)
    back = read_svox(p)
    assert isinstance(back, VolumeGrid)
    assert back.dims == v.dims
    assert np.array_equal(back.data, v.data)
    # byte-identical re-serialization
    p2 = tmp_path / "v2.svox"
    write_svox(back, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_svox_roundtrip_mask(tmp_path):
    rng = np.random.default_rng(3)
    m = MaskVolume((rng.random((4, 3, 2)) < 0.5).astype(np.uint8), Spacing(2, 1, 1))
    p = tmp_path / "m.svox"
    write_svox(m, p)
    back = read_svox(p)
    assert isinstance(back, MaskVolume)
    assert np.array_equal(back.data, m.data)


def test_svox_payload_is_x_fastest(tmp_path):
    # voxel (1,0,0) must directly follow voxel (0,0,0) in the payload
    data = np.zeros((2, 2, 2), np.uint8)
    data[1, 0, 0] = 1
    m = MaskVolume(data, Spacing(1, 1, 1))
    p = tmp_path / "x.svox"
    write_svox(m, p)
    raw = p.read_bytes()
    header_len = 8 + struct.calcsize("<B3I3f")
    assert raw[header_len:header_len + 2] == bytes([0, 1])


@pytest.mark.parametrize("corrupt,msg", [
    (lambda b: b"XXXX" + b[4:], "bad magic"),
    (lambda b: b[:12], "truncated header"),
    (lambda b: b[:-1], "short payload"),
    (lambda b: b + b"\x00", "trailing bytes"),
])
def test_svox_malformed(tmp_path, corrupt, msg):
    m = MaskVolume(np.ones((2, 2, 2), np.uint8), Spacing(1, 1, 1))
    p = tmp_path / "ok.svox"
    write_svox(m, p)
    bad = tmp_path / "bad.svox"
    bad.write_bytes(corrupt(p.read_bytes()))
    with pytest.raises(SvoxError, match=msg):
        read_svox(bad)


def test_svox_bad_dtype_code(tmp_path):
    m = MaskVolume(np.ones((2, 2, 2), np.uint8), Spacing(1, 1, 1))
    p = tmp_path / "ok.svox"
    write_svox(m, p)
    raw = bytearray(p.read_bytes())
    raw[8] = 7  # dtype code byte
    bad = tmp_path / "bad.svox"
    bad.write_bytes(bytes(raw))
    with pytest.raises(SvoxError, match="bad dtype code"):
        read_svox(bad)


@settings(max_examples=40, deadline=None)
@given(
    dims=st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6)),
    seed=st.integers(0, 2 ** 31 - 1),
    sp=st.sampled_from([(1.0, 1.0, 1.0), (1.0, 1.0, 2.5), (0.5, 2.0, 3.0)]),
)
def test_svox_roundtrip_property(tmp_path_factory, dims, seed, sp):
    rng = np.random.default_rng(seed)
    tmp = tmp_path_factory.mktemp("svox")
    v = VolumeGrid(rng.standard_normal(dims).astype(np.float32), Spacing(*sp))
    p = tmp / "r.svox"
    write_svox(v, p)
    back = read_svox(p)
    assert np.array_equal(back.data, v.data)
    assert back.spacing == Spacing(*[np.float32(x) for x in sp])
