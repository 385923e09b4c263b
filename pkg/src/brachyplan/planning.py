"""Needle selection against the tumor and the exportable plan.

A plan is the final artifact of the workflow: the registered template
pose plus per-hole needle states (selected flag, insertion depth), with
provenance describing how the pose was obtained.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .applicator import Hole, TemplateConfig, _prism_mesh, hole_grid, needle_geometry
from .collision import ObbTree, build_obb_tree, collide
from .errors import InputError, SchemaError
from .geometry import RigidTransform, UnitQuaternion, compose
from .jsonutil import canonical_bytes

PLAN_SCHEMA_VERSION = 1
SPAN_RESOLUTION_MM = 0.1
MIN_COLLISION_RADIUS = 1e-3  # zero-radius trajectories collide as a 1 um tube

_PLAN_FIELDS = {"schema_version", "template_pose", "needles", "provenance"}
_NEEDLE_FIELDS = {"hole_id", "selected", "depth_mm", "radius_mm"}


@dataclass(frozen=True)
class NeedleState:
    hole_id: str
    selected: bool = False
    depth_mm: float = 0.0
    radius_mm: float = 1.65

    def __post_init__(self):
        if self.depth_mm < 0.0:
            raise InputError(f"needle depth must be >= 0, got {self.depth_mm}")
        if self.radius_mm < 0.0:
            raise InputError(f"needle radius must be >= 0, got {self.radius_mm}")


@dataclass(frozen=True)
class Plan:
    template_pose: RigidTransform
    needles: tuple[NeedleState, ...] = ()
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "needles", tuple(self.needles))
        ids = [n.hole_id for n in self.needles]
        if len(set(ids)) != len(ids):
            raise InputError("duplicate hole ids in plan needles")

    def validate_against(self, config: TemplateConfig) -> None:
        known = {h.id for h in hole_grid(config)}
        unknown = [n.hole_id for n in self.needles if n.hole_id not in known]
        if unknown:
            raise InputError(f"plan needles reference unknown holes: {unknown}")
        too_deep = [n.hole_id for n in self.needles if n.depth_mm > config.max_needle_length_mm]
        if too_deep:
            raise InputError(
                f"needle depth exceeds max length {config.max_needle_length_mm} mm: {too_deep}"
            )

    def selected_ids(self) -> list[str]:
        return [n.hole_id for n in self.needles if n.selected]


def _pose_jsonable(t: RigidTransform) -> dict:
    q = t.rotation
    return {
        "rotation_wxyz": [float(q.w), float(q.x), float(q.y), float(q.z)],
        "translation_mm": [float(x) for x in t.translation],
    }


def _pose_from_jsonable(data: dict) -> RigidTransform:
    try:
        q = data["rotation_wxyz"]
        t = data["translation_mm"]
    except (TypeError, KeyError) as e:
        raise SchemaError(f"pose must carry rotation_wxyz and translation_mm: {e}") from e
    quat = UnitQuaternion.from_array(np.asarray(q, dtype=np.float64))
    return RigidTransform(quat, np.asarray(t, dtype=np.float64))


def export_plan(plan: Plan) -> bytes:
    """Canonical JSON bytes: fixed field order, floats at 9 significant digits."""
    doc = {
        "schema_version": PLAN_SCHEMA_VERSION,
        "template_pose": _pose_jsonable(plan.template_pose),
        "needles": [
            {
                "hole_id": n.hole_id,
                "selected": n.selected,
                "depth_mm": float(n.depth_mm),
                "radius_mm": float(n.radius_mm),
            }
            for n in plan.needles
        ],
        "provenance": plan.provenance,
    }
    return canonical_bytes(doc)


def import_plan(data: bytes) -> Plan:
    """Parse and validate plan JSON; unknown or future fields are rejected."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaError(f"plan is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SchemaError("plan JSON must be an object")
    version = doc.get("schema_version")
    if version != PLAN_SCHEMA_VERSION:
        raise SchemaError(f"unsupported plan schema_version {version!r} (expected {PLAN_SCHEMA_VERSION})")
    unknown = set(doc) - _PLAN_FIELDS
    if unknown:
        raise SchemaError(f"unknown plan fields {sorted(unknown)}: refusing future schema")
    pose = _pose_from_jsonable(doc.get("template_pose", {}))
    needles = []
    for item in doc.get("needles", []):
        if not isinstance(item, dict):
            raise SchemaError("needle entries must be objects")
        bad = set(item) - _NEEDLE_FIELDS
        if bad:
            raise SchemaError(f"unknown needle fields {sorted(bad)}")
        try:
            needles.append(
                NeedleState(
                    hole_id=str(item["hole_id"]),
                    selected=bool(item["selected"]),
                    depth_mm=float(item["depth_mm"]),
                    radius_mm=float(item["radius_mm"]),
                )
            )
        except KeyError as e:
            raise SchemaError(f"needle entry missing field {e}") from e
    provenance = doc.get("provenance", {})
    if not isinstance(provenance, dict):
        raise SchemaError("provenance must be an object")
    return Plan(template_pose=pose, needles=tuple(needles), provenance=provenance)


def _needle_tree(depth: float, radius: float, sides: int) -> ObbTree:
    """Tree for a needle inserted at the model-frame origin; per-hole poses
    translate it to the hole entry, so one tree serves the whole grid."""
    origin_hole = Hole("template-origin", np.zeros(3))
    _, mesh = needle_geometry(origin_hole, depth, max(radius, MIN_COLLISION_RADIUS), sides)
    return build_obb_tree(mesh)


def _hole_pose(template_pose: RigidTransform, hole: Hole) -> RigidTransform:
    shift = RigidTransform(UnitQuaternion.identity(), hole.entry)
    return compose(template_pose, shift)


def select_needles(
    config: TemplateConfig,
    pose: RigidTransform,
    depth: float,
    tumor: ObbTree,
    tumor_pose: RigidTransform | None = None,
) -> list[str]:
    """Hole ids whose needle at the given depth contacts the tumor (label order)."""
    if not depth > 0.0:
        raise InputError(f"needle depth must be > 0, got {depth}")
    if tumor_pose is None:
        tumor_pose = RigidTransform.identity()
    needle = _needle_tree(depth, config.needle_radius_mm, config.bore_sides)
    hits = []
    for hole in hole_grid(config):
        report = collide(needle, _hole_pose(pose, hole), tumor, tumor_pose, "first-contact")
        if report.intersecting:
            hits.append(hole.id)
    return hits


def intersection_span(
    hole: Hole,
    pose: RigidTransform,
    depth_max: float,
    tumor: ObbTree,
    config: TemplateConfig | None = None,
    tumor_pose: RigidTransform | None = None,
) -> tuple[float, float] | None:
    """Depth interval over which the needle tip is in tumor contact.

    entry: smallest depth at which the growing needle first touches the
    tumor; exit: largest depth whose trailing needle segment
    [depth, depth_max] still touches. Both bisected to 0.1 mm. None when
    there is no contact at depth_max.
    """
    if not depth_max > 0.0:
        raise InputError(f"depth_max must be > 0, got {depth_max}")
    if config is None:
        config = TemplateConfig()
    if tumor_pose is None:
        tumor_pose = RigidTransform.identity()
    radius = max(config.needle_radius_mm, MIN_COLLISION_RADIUS)
    sides = config.bore_sides
    hole_pose = _hole_pose(pose, hole)

    def contact(z_from: float, z_to: float) -> bool:
        if z_to - z_from < 1e-6:
            return False
        mesh = _prism_mesh([0.0, 0.0, -z_from], [0.0, 0.0, -z_to], radius, sides)
        tree = build_obb_tree(mesh)
        return collide(tree, hole_pose, tumor, tumor_pose, "first-contact").intersecting

    if not contact(0.0, depth_max):
        return None

    lo, hi = 0.0, depth_max
    while hi - lo > SPAN_RESOLUTION_MM:
        mid = 0.5 * (lo + hi)
        if contact(0.0, mid):
            hi = mid
        else:
            lo = mid
    entry_depth = hi

    if contact(depth_max - SPAN_RESOLUTION_MM, depth_max):
        exit_depth = depth_max  # tumor extends past the deepest insertion
    else:
        lo, hi = entry_depth, depth_max
        while hi - lo > SPAN_RESOLUTION_MM:
            mid = 0.5 * (lo + hi)
            if contact(mid, depth_max):
                lo = mid
            else:
                hi = mid
        exit_depth = lo
    return entry_depth, exit_depth
