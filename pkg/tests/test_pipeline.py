import numpy as np
import pytest

from brachyplan.applicator import superior_surface_points
from brachyplan.errors import StageError
from brachyplan.phantom import ground_truth_selection, selection_margin
from brachyplan.pipeline import run_pipeline
from brachyplan.planning import export_plan
from brachyplan.volume import RoiBox


def run_case(case, **overrides):
    kwargs = dict(
        volume_path=case["dir"] / "volume.nrrd",
        config=case["spec"].config,
        landmarks=case["scene"].landmark_truth,
        threshold=case["threshold"],
        tumor_mesh=case["scene"].tumor_mesh,
        depth=case["depth"],
    )
    kwargs.update(overrides)
    return run_pipeline(**kwargs)


def test_phantom_end_to_end(phantom_case):
    scene = phantom_case["scene"]
    plan, report = run_case(phantom_case)
    surf = superior_surface_points(phantom_case["spec"].config)
    err = plan.template_pose.apply(surf) - scene.true_pose.apply(surf)
    rms = np.sqrt(np.mean(np.sum(err**2, axis=1)))
    assert rms < 0.5

    truth = ground_truth_selection(scene, phantom_case["depth"])
    assert selection_margin(scene, phantom_case["depth"]) > 1.0
    assert plan.selected_ids() == truth

    stage_names = [s for s, _ in report.stages]
    assert stage_names == ["load-volume", "landmarks", "roi", "threshold", "icp", "tumor", "select"]
    assert report.fre_mm < 1e-9
    assert all(ms >= 0 for _, ms in report.stages)


def test_pipeline_deterministic(phantom_case):
    plan_a, _ = run_case(phantom_case)
    plan_b, _ = run_case(phantom_case)
    assert export_plan(plan_a) == export_plan(plan_b)


def test_two_landmarks_fail_in_landmark_stage(phantom_case):
    pairs = phantom_case["scene"].landmark_truth
    two = [{"source": list(map(float, s)), "target": list(map(float, t))}
           for s, t in zip(pairs.source[:2], pairs.target[:2])]
    with pytest.raises(StageError) as err:
        run_case(phantom_case, landmarks=two)
    assert err.value.stage == "landmarks"


def test_threshold_selecting_nothing_fails_in_threshold_stage(phantom_case):
    with pytest.raises(StageError) as err:
        run_case(phantom_case, threshold=1e9)
    assert err.value.stage == "threshold"


def test_missing_tumor_source_fails_in_tumor_stage(phantom_case):
    with pytest.raises(StageError) as err:
        run_case(phantom_case, tumor_mesh=None)
    assert err.value.stage == "tumor"


def test_label_route_matches_mesh_route_selection(phantom_case):
    plan_mesh, _ = run_case(phantom_case)
    plan_label, _ = run_case(
        phantom_case, tumor_mesh=None, tumor_label_path=phantom_case["dir"] / "tumor_label.nrrd"
    )
    # the label-map surface is a voxelized ball: same pose, selection may
    # differ only inside the voxelization band; with this margin it must not
    assert plan_label.selected_ids() == plan_mesh.selected_ids()
    assert export_plan(plan_label) != b""


def test_roi_restricts_threshold(phantom_case):
    vol_dims = (128, 128, 80)
    roi = RoiBox((0, 0, 0), (vol_dims[0] - 1, vol_dims[1] - 1, vol_dims[2] - 1))
    plan_roi, _ = run_case(phantom_case, roi=roi)
    plan_full, _ = run_case(phantom_case)
    assert export_plan(plan_roi) == export_plan(plan_full)
