import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes oracles importable

from brachyplan.applicator import TemplateConfig
from brachyplan.geometry import RigidTransform, UnitQuaternion
from brachyplan.mesh import TriangleMesh

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def default_config():
    return TemplateConfig()


def cube_mesh(lo=0.0, hi=1.0) -> TriangleMesh:
    v = np.array([[x, y, z] for x in (lo, hi) for y in (lo, hi) for z in (lo, hi)], dtype=float)
    tris = [
        [0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5], [0, 4, 5], [0, 5, 1],
        [2, 3, 7], [2, 7, 6], [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3],
    ]
    return TriangleMesh(v, tris)


def random_pose(rng, max_angle=np.pi, max_shift=10.0) -> RigidTransform:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    q = UnitQuaternion.from_axis_angle(axis, rng.uniform(0, max_angle))
    return RigidTransform(q, rng.uniform(-max_shift, max_shift, size=3))


def random_soup(rng, n_tri, scale=1.0) -> TriangleMesh:
    pts = rng.normal(size=(n_tri * 3, 3)) * scale
    return TriangleMesh(pts, np.arange(n_tri * 3).reshape(-1, 3))


@pytest.fixture(scope="session")
def phantom_case(tmp_path_factory):
    """A noise-free phantom written to disk, shared by the service-level tests."""
    from brachyplan.geometry import RigidTransform
    from brachyplan.jsonutil import canonical_bytes
    from brachyplan.nrrdio import write_volume
    from brachyplan.phantom import PhantomSpec, generate_phantom
    from brachyplan.stlio import write_stl

    pose = RigidTransform(
        UnitQuaternion.from_axis_angle([0.2, -0.3, 1.0], np.deg2rad(3.0)),
        np.array([2.0, -1.5, 1.0]),
    )
    spec = PhantomSpec(pose=pose, seed=11)
    scene = generate_phantom(spec)
    root = tmp_path_factory.mktemp("phantom")
    (root / "volume.nrrd").write_bytes(write_volume(scene.volume))
    (root / "tumor_label.nrrd").write_bytes(write_volume(scene.tumor_label))
    (root / "tumor_mesh.stl").write_bytes(write_stl(scene.tumor_mesh))
    (root / "landmarks.json").write_bytes(canonical_bytes(scene.landmark_truth.to_jsonable()))
    (root / "template_config.json").write_bytes(canonical_bytes(spec.config.to_jsonable()))
    return {"dir": root, "scene": scene, "spec": spec, "threshold": 500.0, "depth": 70.0}
