"""End-to-end planning pipeline: file ingestion through needle selection.

Stage order: load volume, landmark registration, ROI crop, threshold to
points, ICP refinement, tumor model, needle selection. Any stage failure
raises StageError naming the stage; no partial plan is ever returned.
The emitted plan is a pure function of the inputs.
"""
from __future__ import annotations

import hashlib
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .applicator import TemplateConfig, hole_grid, superior_surface_points
from .collision import build_obb_tree
from .errors import InputError, StageError
from .geometry import RigidTransform, compose, invert
from .icp import IcpParams, IcpResult, icp
from .isosurface import marching_cubes
from .mesh import TriangleMesh
from .nnindex import build_nn_index
from .nrrdio import read_volume
from .planning import NeedleState, Plan, select_needles
from .registration import CorrespondencePairs, absolute_orientation, fiducial_registration_error
from .volume import RoiBox, crop_roi, threshold_points

DEFAULT_SURFACE_POINTS_PER_HOLE = 21


@dataclass
class PipelineReport:
    """Per-stage timings and headline quality metrics."""

    stages: list[tuple[str, float]] = field(default_factory=list)  # (name, ms), execution order
    fre_mm: float = float("nan")
    final_mse_mm2: float = float("nan")
    icp_iterations: int = 0
    icp_termination: str = ""
    mse_trace: list[float] = field(default_factory=list)
    threshold_point_count: int = 0
    selected_count: int = 0

    @property
    def total_ms(self) -> float:
        return sum(ms for _, ms in self.stages)

    def to_jsonable(self) -> dict:
        return {
            "stages": [{"stage": name, "ms": ms} for name, ms in self.stages],
            "fre_mm": self.fre_mm,
            "final_mse_mm2": self.final_mse_mm2,
            "icp_iterations": self.icp_iterations,
            "icp_termination": self.icp_termination,
            "threshold_point_count": self.threshold_point_count,
            "selected_count": self.selected_count,
            "total_ms": self.total_ms,
        }


@contextmanager
def _stage(report: PipelineReport, name: str):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, str(e)) from e
    report.stages.append((name, (time.perf_counter() - t0) * 1000.0))


def volume_content_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def refine_pose(
    initial_pose: RigidTransform,
    image_points: np.ndarray,
    config: TemplateConfig,
    params: IcpParams | None = None,
    points_per_hole: int = DEFAULT_SURFACE_POINTS_PER_HOLE,
) -> tuple[RigidTransform, IcpResult]:
    """ICP refinement of a template pose against image-side points.

    The image points move onto the model's superior-surface cloud, and the
    refined result is inverted back into a model-to-image pose (the frame
    rendering and selection need).
    """
    model_cloud = superior_surface_points(config, points_per_hole)
    fixed = build_nn_index(model_cloud)
    result = icp(image_points, fixed, init=invert(initial_pose), params=params)
    return invert(result.transform), result


def build_plan(
    pose: RigidTransform,
    config: TemplateConfig,
    selected_ids: list[str],
    depth: float,
    provenance: dict,
) -> Plan:
    selected = set(selected_ids)
    needles = tuple(
        NeedleState(
            hole_id=h.id,
            selected=h.id in selected,
            depth_mm=depth if h.id in selected else 0.0,
            radius_mm=config.needle_radius_mm,
        )
        for h in hole_grid(config)
    )
    return Plan(template_pose=pose, needles=needles, provenance=provenance)


def run_pipeline(
    volume_path: str | Path,
    config: TemplateConfig,
    landmarks,
    threshold: float,
    roi: RoiBox | None = None,
    tumor_mesh: TriangleMesh | None = None,
    tumor_label_path: str | Path | None = None,
    depth: float = 60.0,
    icp_params: IcpParams | None = None,
    points_per_hole: int = DEFAULT_SURFACE_POINTS_PER_HOLE,
) -> tuple[Plan, PipelineReport]:
    """Run the whole workflow from files to an exportable plan."""
    report = PipelineReport()

    with _stage(report, "load-volume"):
        raw = Path(volume_path).read_bytes()
        volume = read_volume(raw)
        volume_id = volume_content_id(raw)

    with _stage(report, "landmarks"):
        if not isinstance(landmarks, CorrespondencePairs):
            landmarks = CorrespondencePairs.from_jsonable(landmarks)
        initial_pose = absolute_orientation(landmarks)
        report.fre_mm = fiducial_registration_error(initial_pose, landmarks)

    with _stage(report, "roi"):
        working = crop_roi(volume, roi) if roi is not None else volume

    with _stage(report, "threshold"):
        image_points = threshold_points(working, threshold)
        report.threshold_point_count = len(image_points)
        if len(image_points) == 0:
            raise InputError(f"threshold {threshold} selects no voxels")

    with _stage(report, "icp"):
        pose, icp_result = refine_pose(initial_pose, image_points, config, icp_params, points_per_hole)
        report.final_mse_mm2 = icp_result.final_mse
        report.icp_iterations = icp_result.iterations
        report.icp_termination = icp_result.termination
        report.mse_trace = list(icp_result.mse_trace)

    with _stage(report, "tumor"):
        if (tumor_mesh is None) == (tumor_label_path is None):
            raise InputError("provide exactly one tumor source (mesh or label volume)")
        if tumor_mesh is None:
            label = read_volume(Path(tumor_label_path).read_bytes())
            tumor_mesh = marching_cubes(label, 0.5)
            if tumor_mesh.n_triangles == 0:
                raise InputError("tumor label volume produced an empty surface")
        tumor_tree = build_obb_tree(tumor_mesh)

    with _stage(report, "select"):
        selected = select_needles(config, pose, depth, tumor_tree)
        report.selected_count = len(selected)

    provenance = {
        "volume_id": volume_id,
        "config_hash": config.content_hash(),
        "landmarks": landmarks.to_jsonable(),
        "icp": icp_result.summary(),
    }
    plan = build_plan(pose, config, selected, depth, provenance)
    return plan, report
