"""Interactive planning session: the stateful core behind the HTTP API.

A session walks the operator through the workflow stages (volume load,
landmark placement, initial registration, ROI/threshold, ICP refinement,
manual nudge, tumor model, needle selection and per-needle adjustment)
while enforcing stage ordering. Every successful command increments the
revision by exactly one and returns a delta describing what changed;
failed commands leave the session untouched.
"""
from __future__ import annotations

import secrets
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .applicator import TemplateConfig, hole_grid
from .collision import ObbTree, build_obb_tree
from .errors import ConflictError, InputError, StageError
from .geometry import RigidTransform, UnitQuaternion, compose
from .icp import IcpParams, IcpResult
from .isosurface import marching_cubes
from .mesh import TriangleMesh, mesh_plane_contours
from .nrrdio import read_volume
from .pipeline import refine_pose, volume_content_id
from .planning import NeedleState, Plan, export_plan, _pose_jsonable as _pose_json
from .registration import CorrespondencePairs, absolute_orientation, fiducial_registration_error
from .stlio import read_stl
from .volume import RoiBox, ScalarVolume, crop_roi, threshold_points

DEFAULT_DEPTH_MM = 60.0
PREVIEW_POINT_CAP = 2000

COMMANDS = (
    "load-volume", "set-landmark", "register-initial", "set-roi", "set-threshold",
    "run-icp", "nudge-pose", "set-tumor", "select-needles", "toggle-needle",
    "set-depth", "export-plan",
)


@dataclass
class Landmark:
    index: int
    feature_id: str
    image_point: np.ndarray


class Session:
    """Mutable planning state; one active case per session."""

    def __init__(self, config: TemplateConfig | None = None, session_id: str | None = None):
        config = config or TemplateConfig()
        self.id = session_id or secrets.token_hex(8)
        self.revision = 0
        self.config = config
        self.volume: ScalarVolume | None = None
        self.volume_id: str | None = None
        self.landmarks: dict[int, Landmark] = {}
        self.initial_pose: RigidTransform | None = None
        self.fre_mm: float | None = None
        self.roi: RoiBox | None = None
        self.threshold: float | None = None
        self.image_points: np.ndarray | None = None
        self.icp_result: IcpResult | None = None
        self.pose: RigidTransform | None = None
        self.tumor_mesh: TriangleMesh | None = None
        self.tumor_tree: ObbTree | None = None
        self.needle_states: dict[str, NeedleState] = {
            h.id: NeedleState(h.id, radius_mm=config.needle_radius_mm) for h in hole_grid(config)
        }
        self.last_depth = DEFAULT_DEPTH_MM

    # -- queries ----------------------------------------------------------

    def current_pose(self) -> RigidTransform:
        if self.pose is not None:
            return self.pose
        if self.initial_pose is not None:
            return self.initial_pose
        raise StageError("pose", "no registration computed yet")

    def state(self) -> dict:
        vol = self.volume
        return {
            "id": self.id,
            "revision": self.revision,
            "config": self.config.to_jsonable(),
            "volume": None if vol is None else {
                "id": self.volume_id,
                "dims": list(vol.dims),
                "spacing_mm": [float(s) for s in vol.spacing],
                "origin_mm": [float(o) for o in vol.origin],
                "directions": [[float(x) for x in row] for row in vol.directions],
                "value_range": list(vol.value_range()),
            },
            "landmarks": [
                {"index": lm.index, "feature_id": lm.feature_id,
                 "image_point": [float(x) for x in lm.image_point]}
                for lm in sorted(self.landmarks.values(), key=lambda l: l.index)
            ],
            "initial_registered": self.initial_pose is not None,
            "fre_mm": self.fre_mm,
            "roi": None if self.roi is None else {"lower": list(self.roi.lower), "upper": list(self.roi.upper)},
            "threshold": self.threshold,
            "threshold_point_count": 0 if self.image_points is None else int(len(self.image_points)),
            "icp": None if self.icp_result is None else self.icp_result.summary(),
            "pose": None if (self.initial_pose is None and self.pose is None) else _pose_json(self.current_pose()),
            "tumor_triangles": 0 if self.tumor_mesh is None else self.tumor_mesh.n_triangles,
            "needles": [
                {"hole_id": n.hole_id, "selected": n.selected, "depth_mm": n.depth_mm,
                 "radius_mm": n.radius_mm}
                for n in self._ordered_needles()
            ],
        }

    def _ordered_needles(self) -> list[NeedleState]:
        return [self.needle_states[h.id] for h in hole_grid(self.config)]

    def build_plan(self) -> Plan:
        pose = self.current_pose()
        provenance = {
            "volume_id": self.volume_id,
            "config_hash": self.config.content_hash(),
            "landmarks": self._pairs().to_jsonable() if len(self.landmarks) >= 3 else [],
            "icp": self.icp_result.summary() if self.icp_result else None,
        }
        return Plan(template_pose=pose, needles=tuple(self._ordered_needles()), provenance=provenance)

    def export_plan_bytes(self) -> bytes:
        return export_plan(self.build_plan())

    def contours(self, axis: str, index: int) -> dict:
        if self.volume is None:
            raise StageError("contours", "no volume loaded")
        offset = self._plane_offset(axis, index)
        pose = None
        try:
            pose = self.current_pose()
        except StageError:
            pass
        out: dict = {"axis": axis, "index": index, "offset_mm": offset}
        if pose is not None:
            from .applicator import obturator_mesh, template_mesh

            out["template"] = mesh_plane_contours(template_mesh(self.config), pose, axis, offset)
            out["obturator"] = mesh_plane_contours(obturator_mesh(self.config), pose, axis, offset)
            needles = {}
            for n in self._ordered_needles():
                if n.selected and n.depth_mm > 0.0:
                    from .applicator import needle_geometry

                    hole = next(h for h in hole_grid(self.config) if h.id == n.hole_id)
                    _, mesh = needle_geometry(hole, n.depth_mm, n.radius_mm, self.config.bore_sides)
                    polys = mesh_plane_contours(mesh, pose, axis, offset)
                    if polys:
                        needles[n.hole_id] = polys
            out["needles"] = needles
        if self.tumor_mesh is not None:
            out["tumor"] = mesh_plane_contours(self.tumor_mesh, RigidTransform.identity(), axis, offset)
        return out

    def _plane_offset(self, axis: str, index: int) -> float:
        axes = {"sagittal": 0, "coronal": 1, "axial": 2}
        if axis not in axes:
            raise InputError(f"axis must be one of {sorted(axes)}, got {axis!r}")
        k = axes[axis]
        if not (0 <= index < self.volume.dims[k]):
            raise InputError(f"slice index {index} outside volume dims {self.volume.dims}")
        idx = np.zeros(3)
        idx[k] = index
        return float(self.volume.index_to_world(idx)[k])

    # -- command dispatch --------------------------------------------------

    def apply(self, command: str, payload: dict | None = None, expected_revision: int | None = None) -> dict:
        if expected_revision is not None and expected_revision != self.revision:
            raise ConflictError(
                f"stale revision {expected_revision} (session at {self.revision})"
            )
        handler = getattr(self, "_cmd_" + command.replace("-", "_"), None)
        if command not in COMMANDS or handler is None:
            raise InputError(f"unknown command {command!r}")
        delta = handler(payload or {})
        self.revision += 1
        delta["revision"] = self.revision
        delta["type"] = command
        return delta

    # -- commands ----------------------------------------------------------

    def _cmd_load_volume(self, p: dict) -> dict:
        if self.landmarks:
            raise StageError("load-volume", "volume cannot be replaced after landmarks are set")
        path = p.get("path")
        if not path:
            raise InputError("load-volume payload needs a 'path'")
        raw = Path(path).read_bytes()
        self.volume = read_volume(raw)
        self.volume_id = volume_content_id(raw)
        self.roi = None
        self.threshold = None
        self.image_points = None
        return {"volume_id": self.volume_id, "dims": list(self.volume.dims),
                "value_range": list(self.volume.value_range())}

    def _cmd_set_landmark(self, p: dict) -> dict:
        if self.volume is None:
            raise StageError("set-landmark", "load a volume first")
        try:
            index = int(p["index"])
            point = np.asarray(p["image_point"], dtype=np.float64).reshape(3)
            feature_id = str(p["feature_id"])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"set-landmark payload needs index, image_point, feature_id: {e}") from e
        feature_ids = [fid for fid, _ in self.config.landmark_features()]
        if feature_id not in feature_ids:
            raise InputError(f"unknown model feature {feature_id!r} (expected one of {feature_ids})")
        if not (0 <= index < len(feature_ids)):
            raise InputError(f"landmark index {index} out of range 0..{len(feature_ids) - 1}")
        self.landmarks[index] = Landmark(index, feature_id, point)
        # placed landmarks invalidate any previous registration
        self.initial_pose = None
        self.pose = None
        self.icp_result = None
        self.fre_mm = None
        return {"landmark_count": len(self.landmarks)}

    def _pairs(self) -> CorrespondencePairs:
        feats = dict(self.config.landmark_features())
        items = sorted(self.landmarks.values(), key=lambda l: l.index)
        source = np.array([feats[lm.feature_id] for lm in items])
        target = np.array([lm.image_point for lm in items])
        return CorrespondencePairs(source, target)

    def _cmd_register_initial(self, p: dict) -> dict:
        if len(self.landmarks) < 3:
            raise StageError("register-initial", f"3 landmarks required, have {len(self.landmarks)}")
        pairs = self._pairs()
        self.initial_pose = absolute_orientation(pairs)
        self.fre_mm = fiducial_registration_error(self.initial_pose, pairs)
        self.pose = None
        self.icp_result = None
        return {"fre_mm": self.fre_mm, "pose": _pose_json(self.initial_pose)}

    def _cmd_set_roi(self, p: dict) -> dict:
        if self.volume is None:
            raise StageError("set-roi", "load a volume first")
        try:
            box = RoiBox(tuple(p["lower"]), tuple(p["upper"]))
        except (KeyError, TypeError) as e:
            raise InputError(f"set-roi payload needs lower/upper corners: {e}") from e
        box.validate_within(self.volume.dims)
        self.roi = box
        self.threshold = None
        self.image_points = None
        return {"roi": {"lower": list(box.lower), "upper": list(box.upper)}}

    def _cmd_set_threshold(self, p: dict) -> dict:
        if self.volume is None:
            raise StageError("set-threshold", "load a volume first")
        try:
            value = float(p["value"])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"set-threshold payload needs a numeric 'value': {e}") from e
        working = crop_roi(self.volume, self.roi) if self.roi is not None else self.volume
        pts = threshold_points(working, value)
        self.threshold = value
        self.image_points = pts
        stride = max(1, len(pts) // PREVIEW_POINT_CAP)
        preview = pts[::stride]
        return {
            "point_count": int(len(pts)),
            "preview_points": [[float(x) for x in row] for row in preview],
        }

    def _cmd_run_icp(self, p: dict) -> dict:
        if self.initial_pose is None:
            raise StageError("run-icp", "run register-initial first")
        if self.image_points is None or len(self.image_points) == 0:
            raise StageError("run-icp", "set a threshold that selects image points first")
        params = IcpParams(
            epsilon=float(p.get("epsilon", IcpParams().epsilon)),
            max_iterations=int(p.get("max_iterations", IcpParams().max_iterations)),
            min_relative_improvement=float(
                p.get("min_relative_improvement", IcpParams().min_relative_improvement)
            ),
        )
        start = self.pose if self.pose is not None else self.initial_pose
        pose, result = refine_pose(start, self.image_points, self.config, params)
        self.pose = pose
        self.icp_result = result
        return {"icp": result.summary(), "mse_trace": [float(m) for m in result.mse_trace],
                "pose": _pose_json(pose)}

    def _cmd_nudge_pose(self, p: dict) -> dict:
        base = self.current_pose()
        try:
            translation = np.asarray(p.get("translation_mm", [0.0, 0.0, 0.0]), dtype=np.float64).reshape(3)
            angle_deg = float(p.get("rotation_deg", 0.0))
            axis = np.asarray(p.get("rotation_axis", [0.0, 0.0, 1.0]), dtype=np.float64).reshape(3)
        except (TypeError, ValueError) as e:
            raise InputError(f"nudge-pose payload malformed: {e}") from e
        if angle_deg != 0.0:
            rot = UnitQuaternion.from_axis_angle(axis, np.deg2rad(angle_deg))
        else:
            rot = UnitQuaternion.identity()
        delta = RigidTransform(rot, translation)
        self.pose = compose(delta, base)
        return {"pose": _pose_json(self.pose)}

    def _cmd_set_tumor(self, p: dict) -> dict:
        mesh = None
        if "mesh_path" in p:
            mesh = read_stl(Path(p["mesh_path"]).read_bytes())
        elif "label_path" in p:
            label = read_volume(Path(p["label_path"]).read_bytes())
            mesh = marching_cubes(label, float(p.get("iso", 0.5)))
        elif "vertices" in p and "triangles" in p:
            mesh = TriangleMesh(np.asarray(p["vertices"], dtype=np.float64),
                                np.asarray(p["triangles"], dtype=np.int32))
        else:
            raise InputError("set-tumor payload needs mesh_path, label_path, or vertices+triangles")
        if mesh.n_triangles == 0:
            raise InputError("tumor mesh has no triangles")
        self.tumor_mesh = mesh
        self.tumor_tree = build_obb_tree(mesh)
        return {"tumor_triangles": mesh.n_triangles}

    def _cmd_select_needles(self, p: dict) -> dict:
        pose = self.current_pose()
        if self.tumor_tree is None:
            raise StageError("select-needles", "set a tumor model first")
        from .planning import select_needles

        depth = float(p.get("depth_mm", DEFAULT_DEPTH_MM))
        selected = select_needles(self.config, pose, depth, self.tumor_tree)
        self.last_depth = depth
        chosen = set(selected)
        for hid in list(self.needle_states):
            on = hid in chosen
            self.needle_states[hid] = NeedleState(
                hid, selected=on, depth_mm=depth if on else 0.0,
                radius_mm=self.config.needle_radius_mm,
            )
        return {"selected": selected, "depth_mm": depth}

    def _needle(self, p: dict) -> NeedleState:
        hid = p.get("hole_id")
        if hid not in self.needle_states:
            raise InputError(f"unknown hole id {hid!r}")
        return self.needle_states[hid]

    def _cmd_toggle_needle(self, p: dict) -> dict:
        self.current_pose()  # a pose must exist before manual needle edits
        state = self._needle(p)
        on = not state.selected
        depth = state.depth_mm if state.depth_mm > 0.0 else self.last_depth
        self.needle_states[state.hole_id] = NeedleState(
            state.hole_id, selected=on, depth_mm=depth if on else 0.0, radius_mm=state.radius_mm
        )
        return {"hole_id": state.hole_id, "selected": on,
                "depth_mm": self.needle_states[state.hole_id].depth_mm}

    def _cmd_set_depth(self, p: dict) -> dict:
        self.current_pose()
        state = self._needle(p)
        try:
            depth = float(p["depth_mm"])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"set-depth payload needs depth_mm: {e}") from e
        if not depth > 0.0:
            raise InputError(f"depth must be > 0, got {depth}")
        if depth > self.config.max_needle_length_mm:
            raise InputError(f"depth {depth} exceeds max needle length {self.config.max_needle_length_mm}")
        self.needle_states[state.hole_id] = NeedleState(
            state.hole_id, selected=state.selected, depth_mm=depth, radius_mm=state.radius_mm
        )
        return {"hole_id": state.hole_id, "depth_mm": depth, "selected": state.selected}

    def _cmd_export_plan(self, p: dict) -> dict:
        plan_bytes = self.export_plan_bytes()
        return {"plan_json": plan_bytes.decode("utf-8")}


def session_apply(session: Session, command: str, payload: dict | None = None,
                  expected_revision: int | None = None) -> tuple[Session, dict]:
    """Apply one command; returns (session, delta). Errors leave state untouched."""
    delta = session.apply(command, payload, expected_revision)
    return session, delta
