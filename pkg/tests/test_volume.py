import numpy as np
import pytest

from brachyplan.errors import InputError, ParseError, UnsupportedFormatError
from brachyplan.nrrdio import read_volume, write_volume
from brachyplan.volume import RoiBox, ScalarVolume, crop_roi, threshold_points


def small_volume(dtype=np.uint8, dims=(2, 2, 2)):
    data = np.arange(np.prod(dims), dtype=dtype).reshape(dims)
    return ScalarVolume(data, np.array([1.0, 2.0, 3.0]), np.array([10.0, 20.0, 30.0]))


def test_roundtrip_bitwise_uint8():
    vol = small_volume()
    back = read_volume(write_volume(vol))
    assert back.voxels.dtype == np.uint8
    assert np.array_equal(back.voxels, vol.voxels)
    assert np.allclose(back.spacing, vol.spacing)
    assert np.allclose(back.origin, vol.origin)
    # a second write is byte-identical (canonical header)
    assert write_volume(back) == write_volume(vol)


@pytest.mark.parametrize("dtype", [np.uint8, np.int16, np.uint16, np.float32])
def test_roundtrip_all_supported_types(dtype):
    vol = small_volume(dtype=dtype, dims=(3, 4, 5))
    back = read_volume(write_volume(vol))
    assert back.voxels.dtype == dtype
    assert np.array_equal(back.voxels, vol.voxels)


def test_payload_size_mismatch_rejected():
    header = (
        "NRRD0004\ndimension: 3\ntype: uint8\nsizes: 4 4 4\nencoding: raw\n"
        "space directions: (1,0,0) (0,1,0) (0,0,1)\nspace origin: (0,0,0)\n\n"
    ).encode()
    with pytest.raises(ParseError):
        read_volume(header + b"\x00" * 63)


def test_unsupported_fields_named():
    base = "NRRD0004\ndimension: 3\ntype: uint8\nsizes: 2 2 2\nspace origin: (0,0,0)\n"
    with pytest.raises(UnsupportedFormatError) as e:
        read_volume((base + "encoding: gzip\n\n").encode() + b"\x00" * 8)
    assert "encoding" in str(e.value)
    with pytest.raises(UnsupportedFormatError) as e:
        read_volume((base.replace("type: uint8", "type: double") + "encoding: raw\n\n").encode() + b"\x00" * 64)
    assert "type" in str(e.value)
    with pytest.raises(UnsupportedFormatError) as e:
        read_volume((base.replace("dimension: 3", "dimension: 4") + "encoding: raw\n\n").encode() + b"\x00" * 8)
    assert "dimension" in str(e.value)


def test_index_to_world_origin():
    vol = small_volume()
    assert np.allclose(vol.index_to_world(np.zeros(3)), [10.0, 20.0, 30.0])


def test_index_to_world_uses_spacing():
    vol = small_volume()
    assert np.allclose(vol.index_to_world(np.array([1.0, 1.0, 1.0])), [11.0, 22.0, 33.0])


def test_x_fastest_payload_layout():
    vol = small_volume(dims=(2, 2, 1))
    data = write_volume(vol)
    payload = data.split(b"\n\n", 1)[1]
    # voxels[(0,0,0)], voxels[(1,0,0)], voxels[(0,1,0)], voxels[(1,1,0)]
    assert list(payload) == [vol.voxels[0, 0, 0], vol.voxels[1, 0, 0],
                             vol.voxels[0, 1, 0], vol.voxels[1, 1, 0]]


def test_crop_full_volume_is_identity():
    vol = small_volume(dims=(4, 5, 6))
    out = crop_roi(vol, RoiBox((0, 0, 0), (3, 4, 5)))
    assert np.array_equal(out.voxels, vol.voxels)
    assert np.allclose(out.origin, vol.origin)


def test_crop_single_voxel_world_position_preserved():
    vol = small_volume(dims=(4, 5, 6))
    box = RoiBox((2, 3, 1), (2, 3, 1))
    out = crop_roi(vol, box)
    assert out.dims == (1, 1, 1)
    assert np.allclose(out.index_to_world(np.zeros(3)),
                       vol.index_to_world(np.array([2.0, 3.0, 1.0])))


def test_crop_outside_rejected():
    vol = small_volume(dims=(4, 5, 6))
    with pytest.raises(InputError):
        crop_roi(vol, RoiBox((0, 0, 0), (4, 4, 5)))


def test_crop_threshold_commutes(rng):
    for _ in range(20):
        dims = tuple(rng.integers(3, 8, size=3))
        data = rng.integers(0, 100, size=dims).astype(np.int16)
        vol = ScalarVolume(data, rng.uniform(0.5, 2.0, size=3), rng.uniform(-10, 10, size=3))
        lo = [int(rng.integers(0, d - 1)) for d in dims]
        hi = [int(rng.integers(l, d - 1)) for l, d in zip(lo, dims)]
        box = RoiBox(tuple(lo), tuple(hi))
        t = float(rng.integers(20, 80))

        a = threshold_points(crop_roi(vol, box), t)
        all_pts = threshold_points(vol, t)
        idx = vol.world_to_index(all_pts) if len(all_pts) else np.zeros((0, 3))
        keep = box.contains_indices(np.rint(idx).astype(int)) if len(all_pts) else []
        b = all_pts[keep] if len(all_pts) else all_pts
        assert {tuple(np.round(p, 9)) for p in a} == {tuple(np.round(p, 9)) for p in b}


def test_threshold_above_max_is_empty():
    vol = small_volume()
    assert len(threshold_points(vol, 1000.0)) == 0


def test_threshold_slab_by_construction():
    # value = x index; a threshold between the two largest values selects
    # exactly the last yz-slab of voxel centers
    n = 5
    data = np.zeros((n, n, n))
    for i in range(n):
        data[i] = i
    vol = ScalarVolume(data)
    pts = threshold_points(vol, n - 1.5)
    assert len(pts) == n * n
    assert np.all(pts[:, 0] == n - 1)


def test_threshold_cardinality_monotone(rng):
    data = rng.integers(0, 100, size=(6, 6, 6)).astype(np.int16)
    vol = ScalarVolume(data)
    counts = [len(threshold_points(vol, t)) for t in range(0, 101, 10)]
    assert all(b <= a for a, b in zip(counts, counts[1:]))


def test_threshold_index_order_x_fastest():
    data = np.ones((2, 2, 2))
    vol = ScalarVolume(data)
    pts = threshold_points(vol, 0.5)
    # x varies fastest, then y, then z
    expect = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0],
                       [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]], dtype=float)
    assert np.array_equal(pts, expect)


def test_direction_matrix_must_be_orthonormal():
    with pytest.raises(InputError):
        ScalarVolume(np.zeros((2, 2, 2)), directions=np.array([[1, 0.5, 0], [0, 1, 0], [0, 0, 1]]))


def test_nrrd_roundtrip_with_rotated_directions():
    # permuted/flipped axis directions survive the header round-trip
    directions = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).T
    data = np.arange(24, dtype=np.int16).reshape(2, 3, 4)
    vol = ScalarVolume(data, np.array([1.0, 2.0, 3.0]), np.array([5.0, -4.0, 2.5]), directions)
    back = read_volume(write_volume(vol))
    assert np.array_equal(back.voxels, vol.voxels)
    assert np.allclose(back.directions, vol.directions, atol=1e-12)
    assert np.allclose(back.spacing, vol.spacing)
    p = vol.index_to_world(np.array([1.0, 2.0, 3.0]))
    q = back.index_to_world(np.array([1.0, 2.0, 3.0]))
    assert np.allclose(p, q, atol=1e-9)
