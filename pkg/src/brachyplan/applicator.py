"""Parametric template and obturator models plus virtual needle geometry.

Model frame: the template's superior surface lies in the z = 0 plane,
holes run along the -z insertion direction, and the plate body occupies
z in [-thickness, 0]. The hole lattice is centered on the plate; labels
are row letter + column number, ordered row-major (A1, A2, ..., B1, ...).
"""
from __future__ import annotations

import hashlib
import json
import string
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError
from .mesh import TriangleMesh
from .registration import collinearity_ratio

COLLINEAR_TOL = 1e-10


@dataclass(frozen=True)
class TemplateConfig:
    rows: int = 13
    cols: int = 13
    pitch_mm: float = 10.0
    hole_radius_mm: float = 1.65
    plate_width_mm: float = 130.0
    plate_height_mm: float = 130.0
    plate_thickness_mm: float = 20.0
    obturator_hole_radius_mm: float = 10.0
    obturator_radius_mm: float = 9.5
    obturator_length_mm: float = 120.0
    needle_radius_mm: float = 1.65
    max_needle_length_mm: float = 200.0
    bore_sides: int = 12
    # landmark feature ids; entries of these holes are the registration features
    landmark_ids: tuple[str, str, str] = ("A1", "A13", "M1")

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InputError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.rows > 26:
            raise InputError(f"row labels are single letters, so rows <= 26 (got {self.rows})")
        if not self.pitch_mm > 2.0 * self.hole_radius_mm:
            raise InputError(
                f"hole pitch {self.pitch_mm} must exceed twice the hole radius {self.hole_radius_mm}"
            )
        for name in ("plate_width_mm", "plate_height_mm", "plate_thickness_mm",
                     "obturator_radius_mm", "obturator_length_mm", "max_needle_length_mm"):
            if not getattr(self, name) > 0.0:
                raise InputError(f"{name} must be > 0")
        if self.hole_radius_mm < 0.0 or self.obturator_hole_radius_mm < 0.0 or self.needle_radius_mm < 0.0:
            raise InputError("radii must be >= 0")
        if self.bore_sides < 3:
            raise InputError(f"bore_sides must be >= 3, got {self.bore_sides}")
        if len(set(self.landmark_ids)) != 3:
            raise InputError(f"landmark_ids must be 3 distinct hole labels, got {self.landmark_ids}")

    def hole_label(self, row: int, col: int) -> str:
        return f"{string.ascii_uppercase[row]}{col + 1}"

    def landmark_features(self) -> list[tuple[str, np.ndarray]]:
        """The three labeled landmark points (hole entries, model frame)."""
        by_id = {h.id: h for h in hole_grid(self, apply_exclusion=False)}
        feats = []
        for hid in self.landmark_ids:
            if hid not in by_id:
                raise InputError(f"landmark id {hid!r} is not a hole of the {self.rows}x{self.cols} grid")
            feats.append((hid, by_id[hid].entry))
        pts = np.array([p for _, p in feats])
        if collinearity_ratio(pts) <= COLLINEAR_TOL:
            raise InputError(f"landmark features {self.landmark_ids} are collinear")
        return feats

    def to_jsonable(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "pitch_mm": self.pitch_mm,
            "hole_radius_mm": self.hole_radius_mm,
            "plate_width_mm": self.plate_width_mm,
            "plate_height_mm": self.plate_height_mm,
            "plate_thickness_mm": self.plate_thickness_mm,
            "obturator_hole_radius_mm": self.obturator_hole_radius_mm,
            "obturator_radius_mm": self.obturator_radius_mm,
            "obturator_length_mm": self.obturator_length_mm,
            "needle_radius_mm": self.needle_radius_mm,
            "max_needle_length_mm": self.max_needle_length_mm,
            "bore_sides": self.bore_sides,
            "landmark_ids": list(self.landmark_ids),
        }

    @classmethod
    def from_jsonable(cls, data: dict) -> "TemplateConfig":
        if not isinstance(data, dict):
            raise InputError("template config must be a JSON object")
        known = set(cls().to_jsonable())
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown template config fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "landmark_ids" in kwargs:
            kwargs["landmark_ids"] = tuple(kwargs["landmark_ids"])
        return cls(**kwargs)

    def content_hash(self) -> str:
        payload = json.dumps(self.to_jsonable(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Hole:
    """One template hole: entry point on the superior surface, insertion axis."""

    id: str
    entry: np.ndarray
    direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))

    def __post_init__(self):
        e = np.asarray(self.entry, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise InputError(f"hole direction must be unit length, got {d}")
        if e[2] != 0.0:
            raise InputError(f"hole entry must lie on the superior surface z=0, got z={e[2]}")
        object.__setattr__(self, "entry", e)
        object.__setattr__(self, "direction", d)
        e.setflags(write=False)
        d.setflags(write=False)


def hole_grid(config: TemplateConfig, apply_exclusion: bool = True) -> list[Hole]:
    """Holes on the regular lattice, row-major label order.

    When the config has a central obturator opening (radius > 0), holes
    whose entries fall within (opening radius + hole radius) of the plate
    center are occluded and omitted.
    """
    holes = []
    x0 = -(config.cols - 1) / 2.0 * config.pitch_mm
    y0 = -(config.rows - 1) / 2.0 * config.pitch_mm
    exclusion = config.obturator_hole_radius_mm + config.hole_radius_mm
    for r in range(config.rows):
        for c in range(config.cols):
            x = x0 + c * config.pitch_mm
            y = y0 + r * config.pitch_mm
            if apply_exclusion and config.obturator_hole_radius_mm > 0.0:
                if np.hypot(x, y) < exclusion:
                    continue
            holes.append(Hole(config.hole_label(r, c), np.array([x, y, 0.0])))
    return holes


def _segment_frame(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = b - a
    length = np.linalg.norm(d)
    if length <= 0.0:
        raise InputError("prism endpoints coincide")
    d = d / length
    pick = int(np.argmin(np.abs(d)))
    u = np.cross(d, np.eye(3)[pick])
    u /= np.linalg.norm(u)
    v = np.cross(d, u)
    return d, u, v


def _prism_mesh(a, b, radius: float, sides: int, inward: bool = False) -> TriangleMesh:
    """Closed n-gon prism from a to b with ring vertices at the given radius
    (inscribed polygon convention).

    Outward winding by default; inward=True flips every triangle, giving
    negative enclosed volume (used to carve bores out of the plate by
    signed-volume union).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d, u, v = _segment_frame(a, b)
    ang = 2.0 * np.pi * np.arange(sides) / sides
    offsets = radius * (np.cos(ang)[:, None] * u + np.sin(ang)[:, None] * v)
    verts = np.vstack([a + offsets, b + offsets])

    tris = []
    for k in range(sides):
        k2 = (k + 1) % sides
        tris.append([k, k2, sides + k])
        tris.append([k2, sides + k2, sides + k])
    for k in range(1, sides - 1):  # cap at a (normal -d)
        tris.append([0, k + 1, k])
    for k in range(1, sides - 1):  # cap at b (normal +d)
        tris.append([sides, sides + k, sides + k + 1])
    tris = np.asarray(tris, dtype=np.int32)
    if inward:
        tris = tris[:, ::-1]
    return TriangleMesh(verts, tris)


def _box_mesh(lo: np.ndarray, hi: np.ndarray) -> TriangleMesh:
    """Axis-aligned box, 12 triangles, outward winding."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    v = np.array(
        [[x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
         [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]]
    )
    tris = np.array(
        [[0, 2, 1], [0, 3, 2],   # z0 face (normal -z)
         [4, 5, 6], [4, 6, 7],   # z1 face (+z)
         [0, 1, 5], [0, 5, 4],   # y0 (-y)
         [2, 3, 7], [2, 7, 6],   # y1 (+y)
         [0, 4, 7], [0, 7, 3],   # x0 (-x)
         [1, 2, 6], [1, 6, 5]],  # x1 (+x)
        dtype=np.int32,
    )
    return TriangleMesh(v, tris)


def _merge_meshes(meshes: list[TriangleMesh]) -> TriangleMesh:
    offsets = np.cumsum([0] + [m.n_vertices for m in meshes[:-1]])
    verts = np.vstack([m.vertices for m in meshes])
    tris = np.vstack([m.triangles + off for m, off in zip(meshes, offsets)])
    return TriangleMesh(verts, tris)


def template_mesh(config: TemplateConfig) -> TriangleMesh:
    """Tessellated plate with through-holes.

    The plate box is unioned with inward-wound bore prisms (per hole plus
    the central opening), so the mesh is topologically closed and its
    signed volume equals plate volume minus bore volumes. Bore faces
    overlap the plate faces geometrically; section contours and collision
    queries are unaffected.
    """
    w, h, t = config.plate_width_mm, config.plate_height_mm, config.plate_thickness_mm
    parts = [_box_mesh(np.array([-w / 2, -h / 2, -t]), np.array([w / 2, h / 2, 0.0]))]
    if config.hole_radius_mm > 0.0:
        for hole in hole_grid(config):
            top = np.array([hole.entry[0], hole.entry[1], 0.0])
            parts.append(_prism_mesh(top, top + [0, 0, -t], config.hole_radius_mm,
                                     config.bore_sides, inward=True))
    if config.obturator_hole_radius_mm > 0.0:
        parts.append(_prism_mesh([0.0, 0.0, 0.0], [0.0, 0.0, -t],
                                 config.obturator_hole_radius_mm, config.bore_sides, inward=True))
    return _merge_meshes(parts)


def obturator_mesh(config: TemplateConfig) -> TriangleMesh:
    """Obturator cylinder through the central opening, z in [-length, 0]."""
    return _prism_mesh([0.0, 0.0, 0.0], [0.0, 0.0, -config.obturator_length_mm],
                       config.obturator_radius_mm, config.bore_sides)


def superior_surface_points(config: TemplateConfig, points_per_hole: int = 21,
                            rim_points: int = 0) -> np.ndarray:
    """Reference cloud for ICP, computed from the hole locations.

    Per hole: the entry point on the superior plane plus evenly spaced
    samples down the hole axis to the plate depth; rim_points > 0 adds a
    ring on the superior plane around each hole. Axis samples are the
    default because they match a filled bore column without radial or
    axial bias; rim rings sit above the voxelized column's topmost
    centers and drag the fit along the insertion axis.

    points_per_hole = 1 yields entries only. All points satisfy
    z in [-thickness, 0] in the model frame.
    """
    if points_per_hole < 1:
        raise InputError(f"points_per_hole must be >= 1, got {points_per_hole}")
    if rim_points < 0 or rim_points > points_per_hole - 1:
        raise InputError(f"rim_points must be in [0, points_per_hole - 1], got {rim_points}")
    t = config.plate_thickness_mm
    pts = []
    n_axis = points_per_hole - 1 - rim_points
    for hole in hole_grid(config):
        x, y = hole.entry[0], hole.entry[1]
        pts.append([x, y, 0.0])
        if rim_points:
            ang = 2.0 * np.pi * np.arange(rim_points) / rim_points
            for a in ang:
                pts.append([x + config.hole_radius_mm * np.cos(a),
                            y + config.hole_radius_mm * np.sin(a), 0.0])
        for k in range(1, n_axis + 1):
            pts.append([x, y, -t * k / n_axis])
    return np.asarray(pts, dtype=np.float64)


def needle_geometry(hole: Hole, depth: float, radius: float, sides: int = 12) -> tuple[np.ndarray, TriangleMesh]:
    """Straight needle down the hole axis.

    Returns (segment, mesh): segment is (2, 3) [entry, entry + depth * dir];
    the mesh is a closed prism with vertices at the given radius (inscribed
    polygon convention).
    """
    if not depth > 0.0:
        raise InputError(f"needle depth must be > 0, got {depth}")
    seg = np.stack([hole.entry, hole.entry + depth * hole.direction])
    mesh = _prism_mesh(seg[0], seg[1], radius, sides)
    return seg, mesh
