import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ssfkymo.exceptions import DomainError, FormatError, SizeError
from ssfkymo.volume import (
    Volume,
    VoxelCoord,
    load_volume,
    normalize_intensity,
    radius_to_pixels,
    read_meta,
    save_volume,
    write_array,
)


def test_u16_bit_depth_extremes(tmp_path):
    path = tmp_path / "a.vol"
    write_array(path, np.array([0, 65535], dtype=np.uint16).reshape(2, 1, 1, 1, 1), "u16")
    v = load_volume(path)
    assert v.data[0, 0, 0, 0, 0] == 0.0
    assert v.data[1, 0, 0, 0, 0] == 1.0


def test_u8_payload_size_arithmetic(tmp_path):
    path = tmp_path / "b.vol"
    write_array(path, np.arange(16, dtype=np.uint8).reshape(4, 4, 1, 1, 1), "u8")
    assert os.path.getsize(path) == 16
    v = load_volume(path)
    assert v.data.size == 16
    assert v.dims == (4, 4, 1, 1, 1)


def test_roundtrip_random_f32(tmp_path, rng):
    data = rng.random((8, 8, 1, 2, 3)).astype(np.float32)
    v = Volume(data, spacing=(0.5, 0.5, 2.0), channel_names=("H2B", "ERK"))
    save_volume(v, tmp_path / "v.vol")
    w = load_volume(tmp_path / "v.vol")
    np.testing.assert_array_equal(w.data, v.data)
    assert w.channel_names == ("H2B", "ERK")
    assert tuple(w.spacing) == (0.5, 0.5, 2.0)


def test_payload_is_x_fastest(tmp_path):
    data = np.zeros((2, 3, 1, 1, 1), dtype=np.uint8)
    data[1, 0, 0, 0, 0] = 7
    write_array(tmp_path / "x.vol", data, "u8")
    raw = (tmp_path / "x.vol").read_bytes()
    assert raw[1] == 7


def test_save_to_unwritable_dir(tmp_path):
    v = Volume(np.zeros((2, 2, 1, 1, 1)))
    with pytest.raises(OSError):
        save_volume(v, tmp_path / "missing" / "sub" / "v.vol")


def test_empty_extent_rejected():
    with pytest.raises(SizeError):
        Volume(np.zeros((0, 2, 1, 1, 1)))


def test_size_mismatch(tmp_path):
    path = tmp_path / "c.vol"
    write_array(path, np.zeros((4, 4, 1, 1, 1), dtype=np.uint8), "u8")
    with open(path, "ab") as fh:
        fh.write(b"\x00")
    with pytest.raises(SizeError):
        load_volume(path)


@pytest.mark.parametrize(
    "meta",
    [
        "{not json",
        json.dumps({"dims": [1, 1, 1, 1, 1]}),
        json.dumps({"dims": [1, 1, 1, 1], "element_type": "u8", "spacing_um": [1, 1, 1], "channel_names": ["a"]}),
        json.dumps({"dims": [1, 1, 1, 1, 1], "element_type": "i64", "spacing_um": [1, 1, 1], "channel_names": ["a"]}),
    ],
)
def test_malformed_metadata(tmp_path, meta):
    path = tmp_path / "d.vol"
    path.write_bytes(b"\x00")
    (tmp_path / "d.vol.json").write_text(meta)
    with pytest.raises(FormatError):
        read_meta(path)


def test_missing_sidecar(tmp_path):
    path = tmp_path / "e.vol"
    path.write_bytes(b"\x00")
    with pytest.raises(FormatError):
        load_volume(path)


@pytest.mark.parametrize("r_um, spacing, expected", [(5, 1.0, 5.0), (5, 0.5, 10.0), (4, 2.0, 2.0)])
def test_radius_to_pixels(r_um, spacing, expected):
    assert radius_to_pixels(r_um, spacing) == pytest.approx(expected)


def test_radius_to_pixels_anisotropic():
    np.testing.assert_allclose(radius_to_pixels(5.0, (0.5, 0.5, 2.5)), [10.0, 10.0, 2.0])


def test_radius_domain():
    with pytest.raises(DomainError):
        radius_to_pixels(0.0, 1.0)
    with pytest.raises(DomainError):
        radius_to_pixels(1.0, -1.0)


def test_out_of_range_intensity():
    with pytest.raises(DomainError):
        Volume(np.full((2, 2, 1, 1, 1), 1.5))


def test_voxel_bounds():
    with pytest.raises(IndexError):
        VoxelCoord(-1, 0)
    with pytest.raises(IndexError):
        VoxelCoord(4, 0).check_within((4, 4, 1, 1, 1))


def test_frame_shapes(rng):
    v2 = Volume(rng.random((6, 5, 1, 2, 3)), channel_names=("a", "b"))
    assert v2.frame("b", 2).shape == (6, 5)
    v3 = Volume(rng.random((6, 5, 4, 1, 2)))
    assert v3.is_3d and v3.frame(0, 1).shape == (6, 5, 4)
    with pytest.raises(KeyError):
        v2.frame("nope", 0)


@given(arrays(np.uint16, st.integers(1, 20)))
def test_normalize_u16_in_unit_interval(a):
    out = normalize_intensity(a)
    assert out.min() >= 0.0 and out.max() <= 1.0


@settings(max_examples=50)
@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-5, 5)))
def test_normalize_is_idempotent(a):
    once = normalize_intensity(a)
    np.testing.assert_array_equal(normalize_intensity(once), once)
