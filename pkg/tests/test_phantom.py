import numpy as np
import pytest

from brachyplan.errors import InputError
from brachyplan.geometry import RigidTransform, UnitQuaternion, rotation_between
from brachyplan.phantom import (
    PhantomSpec,
    generate_phantom,
    ground_truth_selection,
    icosphere,
    load_phantom_spec,
)
from brachyplan.applicator import hole_grid
from brachyplan.jsonutil import canonical_bytes
from brachyplan.nrrdio import write_volume
from brachyplan.registration import absolute_orientation

SMALL = dict(dims=(64, 64, 48), spacing=np.array([2.5, 2.5, 2.5]))


def test_sigma_zero_construction_exactness():
    spec = PhantomSpec(**SMALL)
    scene = generate_phantom(spec)
    vol = scene.volume
    cfg = spec.config
    # voxels on a hole axis within the plate read the hole intensity
    hole = hole_grid(cfg)[0]
    mid = spec.pose.apply(hole.entry + np.array([0.0, 0.0, -cfg.plate_thickness_mm / 2]))
    idx = np.rint(vol.world_to_index(mid)).astype(int)
    world = vol.index_to_world(idx.astype(float))
    if np.linalg.norm(world[:2] - mid[:2]) <= cfg.hole_radius_mm:
        assert vol.voxels[tuple(idx)] >= spec.hole_intensity
    # voxels far from all holes and the tumor read the background exactly
    far = np.array([vol.index_to_world(np.zeros(3))])
    assert vol.voxels[0, 0, 0] == spec.background


def test_phantom_determinism():
    spec = PhantomSpec(noise_sigma=15.0, seed=99, **SMALL)
    a = generate_phantom(spec)
    b = generate_phantom(spec)
    assert np.array_equal(a.volume.voxels, b.volume.voxels)
    assert write_volume(a.volume) == write_volume(b.volume)


def test_different_seeds_differ():
    a = generate_phantom(PhantomSpec(noise_sigma=15.0, seed=1, **SMALL))
    b = generate_phantom(PhantomSpec(noise_sigma=15.0, seed=2, **SMALL))
    assert not np.array_equal(a.volume.voxels, b.volume.voxels)


def test_landmark_truth_recovers_pose():
    pose = RigidTransform(
        UnitQuaternion.from_axis_angle([0.2, 0.9, -0.1], np.deg2rad(6.0)),
        np.array([4.0, -5.0, 3.0]),
    )
    scene = generate_phantom(PhantomSpec(pose=pose, **SMALL))
    got = absolute_orientation(scene.landmark_truth)
    assert rotation_between(got, pose) < 1e-6
    assert np.linalg.norm(got.translation - pose.translation) < 1e-6


def test_pose_outside_bounds_rejected():
    pose = RigidTransform(UnitQuaternion.identity(), np.array([500.0, 0.0, 0.0]))
    with pytest.raises(InputError):
        generate_phantom(PhantomSpec(pose=pose, **SMALL))


def test_tumor_label_marks_ball_voxels():
    spec = PhantomSpec(**SMALL)
    scene = generate_phantom(spec)
    lab = scene.tumor_label
    idx = np.argwhere(lab.voxels > 0).astype(float)
    world = lab.index_to_world(idx)
    d = np.linalg.norm(world - spec.tumor_center, axis=1)
    assert d.max() <= spec.tumor_radius + 1e-9
    assert len(idx) > 0


def test_icosphere_subdivision_counts():
    mesh = icosphere([0, 0, 0], 5.0, subdivisions=0)
    assert mesh.n_triangles == 20
    mesh3 = icosphere([0, 0, 0], 5.0, subdivisions=3)
    assert mesh3.n_triangles == 20 * 4**3
    assert mesh3.is_closed()
    r = np.linalg.norm(mesh3.vertices, axis=1)
    assert np.allclose(r, 5.0, atol=1e-12)


def test_ground_truth_selection_default_scene():
    scene = generate_phantom(PhantomSpec())
    hits = ground_truth_selection(scene, 60.0)
    assert hits == ["G9", "H8", "H9"]


def test_spec_json_roundtrip():
    spec = PhantomSpec(seed=5, noise_sigma=3.0)
    again = load_phantom_spec(canonical_bytes(spec.to_jsonable()))
    assert again.seed == 5
    assert again.noise_sigma == 3.0
    assert again.config == spec.config
    assert np.allclose(again.tumor_center, spec.tumor_center)
