import numpy as np

from brachyplan.geometry import RigidTransform, UnitQuaternion
from brachyplan.mesh import contour_length, mesh_plane_contours
from brachyplan.phantom import icosphere
from conftest import cube_mesh


def test_cube_axial_center_section_is_unit_square():
    polys = mesh_plane_contours(cube_mesh(), RigidTransform.identity(), "axial", 0.5)
    assert len(polys) == 1
    assert polys[0]["closed"]
    assert abs(contour_length(polys) - 4.0) < 1e-9


def test_plane_missing_mesh_gives_empty():
    polys = mesh_plane_contours(cube_mesh(), RigidTransform.identity(), "axial", 5.0)
    assert polys == []


def test_sphere_section_radius():
    # 512-triangle sphere: contour points within tessellation error of r=10
    mesh = icosphere([0.0, 0.0, 0.0], 10.0, subdivisions=2)  # 320 triangles
    polys = mesh_plane_contours(mesh, RigidTransform.identity(), "axial", 0.0)
    pts = np.concatenate([np.asarray(p["points"]) for p in polys])
    r = np.linalg.norm(pts, axis=1)
    assert np.abs(r - 10.0).max() < 0.5


def test_in_plane_motion_preserves_total_length():
    mesh = cube_mesh()
    base = contour_length(mesh_plane_contours(mesh, RigidTransform.identity(), "axial", 0.5))
    q = UnitQuaternion.from_axis_angle([0, 0, 1], 0.7)  # rotation about the plane normal
    moved = RigidTransform(q, np.array([3.0, -2.0, 0.0]))  # in-plane shift
    length = contour_length(mesh_plane_contours(mesh, moved, "axial", 0.5))
    assert abs(length - base) / base < 1e-6


def test_all_three_axes():
    for axis in ("axial", "sagittal", "coronal"):
        polys = mesh_plane_contours(cube_mesh(), RigidTransform.identity(), axis, 0.5)
        assert abs(contour_length(polys) - 4.0) < 1e-9


def test_projection_axes_are_documented_pairs():
    # sagittal plane x=0.5: cube section spans y,z in [0,1]
    polys = mesh_plane_contours(cube_mesh(), RigidTransform.identity(), "sagittal", 0.5)
    pts = np.concatenate([np.asarray(p["points"]) for p in polys])
    assert pts.min() >= -1e-12 and pts.max() <= 1 + 1e-12
