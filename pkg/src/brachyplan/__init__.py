"""Template registration and virtual needle planning engine.

Pipeline stages: volume/model ingestion, three-landmark closed-form
registration, ICP refinement against thresholded voxels, isosurface
reconstruction, and OBB-tree collision selection of needles that reach
the tumor.
"""

from .geometry import RigidTransform, UnitQuaternion, compose, invert, quat_to_matrix, transform_points
from .mesh import TriangleMesh, mesh_plane_contours
from .registration import CorrespondencePairs, absolute_orientation, fiducial_registration_error
from .nnindex import NNIndex, build_nn_index
from .icp import IcpParams, IcpResult, icp, residual_mse
from .volume import RoiBox, ScalarVolume, crop_roi, threshold_points
from .isosurface import marching_cubes
from .stlio import read_stl, write_stl
from .nrrdio import read_volume, write_volume
from .collision import CollisionReport, Obb, ObbTree, build_obb_tree, collide
from .applicator import Hole, TemplateConfig, hole_grid, needle_geometry, obturator_mesh, superior_surface_points, template_mesh
from .planning import NeedleState, Plan, export_plan, import_plan, intersection_span, select_needles
from .phantom import PhantomScene, generate_phantom
from .pipeline import PipelineReport, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "RigidTransform", "UnitQuaternion", "compose", "invert", "quat_to_matrix", "transform_points",
    "TriangleMesh", "mesh_plane_contours",
    "CorrespondencePairs", "absolute_orientation", "fiducial_registration_error",
    "NNIndex", "build_nn_index",
    "IcpParams", "IcpResult", "icp", "residual_mse",
    "RoiBox", "ScalarVolume", "crop_roi", "threshold_points",
    "marching_cubes", "read_stl", "write_stl", "read_volume", "write_volume",
    "CollisionReport", "Obb", "ObbTree", "build_obb_tree", "collide",
    "Hole", "TemplateConfig", "hole_grid", "needle_geometry", "obturator_mesh",
    "superior_surface_points", "template_mesh",
    "NeedleState", "Plan", "export_plan", "import_plan", "intersection_span", "select_needles",
    "PhantomScene", "generate_phantom",
    "PipelineReport", "run_pipeline",
    "__version__",
]
