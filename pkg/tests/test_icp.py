import numpy as np
import pytest

from brachyplan.applicator import TemplateConfig, superior_surface_points
from brachyplan.errors import DegenerateConfigurationError
from brachyplan.geometry import RigidTransform, UnitQuaternion, invert, rotation_between
from brachyplan.icp import IcpParams, icp, residual_mse
from brachyplan.nnindex import build_nn_index
from oracles import brute_force_mse


def test_already_aligned_terminates_immediately(rng):
    pts = rng.uniform(-10, 10, size=(50, 3))
    index = build_nn_index(pts)
    result = icp(pts, index)
    assert result.iterations == 1
    assert result.mse_trace == [0.0]
    assert result.termination == "epsilon-reached"
    assert result.transform.is_identity(1e-12)


def test_huge_epsilon_stops_after_one_iteration(rng):
    pts = rng.uniform(-10, 10, size=(40, 3))
    index = build_nn_index(pts)
    moved = pts + rng.normal(0, 1.0, size=pts.shape)
    result = icp(moved, index, params=IcpParams(epsilon=1e12))
    assert result.iterations == 1
    assert result.termination == "epsilon-reached"


def test_recovers_known_transform_on_plate_face(rng):
    # 500 points sampled over the template's superior face; the plate
    # boundary anchors the fit so a 5 degree / few-mm start converges
    config = TemplateConfig()
    n = 500
    pts = np.column_stack([
        rng.uniform(-config.plate_width_mm / 2, config.plate_width_mm / 2, n),
        rng.uniform(-config.plate_height_mm / 2, config.plate_height_mm / 2, n),
        np.zeros(n),
    ])
    truth = RigidTransform(
        UnitQuaternion.from_axis_angle([0, 0, 1], np.deg2rad(5.0)),
        np.array([4.0, -3.0, 2.0]),
    )
    moved = truth.apply(pts)
    index = build_nn_index(pts)
    result = icp(moved, index, params=IcpParams(epsilon=1e-14, max_iterations=300,
                                                min_relative_improvement=0.0))
    back = result.transform.apply(moved)
    rms = np.sqrt(np.mean(np.sum((back - pts) ** 2, axis=1)))
    assert rms < 1e-3
    assert rotation_between(result.transform, invert(truth)) < 1e-4


def test_recovers_in_basin_transform_on_hole_cloud():
    # the hole lattice aliases at one pitch, so perturbations must stay
    # inside roughly half a pitch for exact recovery on this cloud
    config = TemplateConfig()
    surface = superior_surface_points(config, points_per_hole=3)
    truth = RigidTransform(
        UnitQuaternion.from_axis_angle([0, 0, 1], np.deg2rad(1.5)),
        np.array([2.0, -1.0, 1.0]),
    )
    moved = truth.apply(surface)
    index = build_nn_index(surface)
    result = icp(moved, index, params=IcpParams(epsilon=1e-14, max_iterations=300,
                                                min_relative_improvement=0.0))
    back = result.transform.apply(moved)
    rms = np.sqrt(np.mean(np.sum((back - surface) ** 2, axis=1)))
    assert rms < 1e-3
    assert rotation_between(result.transform, invert(truth)) < 1e-4


def test_mse_trace_non_increasing(rng):
    config = TemplateConfig()
    surface = superior_surface_points(config, points_per_hole=2)
    index = build_nn_index(surface)
    for _ in range(10):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        g = RigidTransform(
            UnitQuaternion.from_axis_angle(axis, rng.uniform(0, np.deg2rad(8))),
            rng.uniform(-3, 3, size=3),
        )
        result = icp(g.apply(surface), index)
        trace = result.mse_trace
        assert all(trace[i + 1] <= trace[i] + 1e-12 for i in range(len(trace) - 1))


def test_fixed_point_when_init_is_exact(rng):
    pts = rng.uniform(-20, 20, size=(200, 3))
    index = build_nn_index(pts)
    g = RigidTransform(UnitQuaternion.from_axis_angle([1, 2, 3], 0.4), np.array([5.0, 1.0, -2.0]))
    moved = g.apply(pts[:120])  # subset of P, exactly alignable
    init = invert(g)
    result = icp(moved, index, init=init)
    assert rotation_between(result.transform, init) < 1e-9
    assert np.linalg.norm(result.transform.translation - init.translation) < 1e-9


def test_residual_mse_zero_for_identity(rng):
    pts = rng.uniform(-5, 5, size=(30, 3))
    index = build_nn_index(pts)
    assert residual_mse(RigidTransform.identity(), pts, index) == 0.0


def test_residual_mse_3_4_5():
    index = build_nn_index(np.zeros((1, 3)))
    moving = np.array([[3.0, 4.0, 0.0]])
    assert residual_mse(RigidTransform.identity(), moving, index) == pytest.approx(25.0, abs=1e-12)


def test_residual_mse_matches_brute_force(rng):
    fixed = rng.uniform(-30, 30, size=(400, 3))
    moving = rng.uniform(-30, 30, size=(150, 3))
    index = build_nn_index(fixed)
    from conftest import random_pose

    t = random_pose(rng)
    got = residual_mse(t, moving, index)
    want = brute_force_mse(t.apply(moving), fixed)
    assert got == pytest.approx(want, rel=1e-12)


def test_collapsed_matches_raise():
    index = build_nn_index(np.array([[0.0, 0.0, 0.0]]))
    moving = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
    with pytest.raises(DegenerateConfigurationError):
        icp(moving, index)
