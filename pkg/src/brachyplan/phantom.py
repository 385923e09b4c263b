"""Synthetic phantom volumes with known ground truth.

Stands in for clinical intra-operative data: a dark background with
bright cylinders rasterized along every template hole under a known pose,
a mid-intensity tumor ball, optional Gaussian noise, and the three
designated corner-hole entries exported as exact landmark pairs. Every
generated artifact is a deterministic function of (spec, seed).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .applicator import TemplateConfig, hole_grid
from .errors import InputError, SchemaError
from .geometry import RigidTransform, UnitQuaternion
from .mesh import TriangleMesh
from .registration import CorrespondencePairs
from .volume import ScalarVolume

_DTYPES = {"uint8": np.uint8, "int16": np.int16, "uint16": np.uint16, "float32": np.float32}


@dataclass(frozen=True)
class PhantomSpec:
    config: TemplateConfig = field(default_factory=TemplateConfig)
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    tumor_center: np.ndarray = field(default_factory=lambda: np.array([16.0, 6.0, -48.0]))
    tumor_radius: float = 9.0
    dims: tuple[int, int, int] = (128, 128, 80)
    spacing: np.ndarray = field(default_factory=lambda: np.array([1.5, 1.5, 1.5]))
    origin: np.ndarray | None = None
    background: float = 100.0
    hole_intensity: float = 1000.0
    tumor_intensity: float = 400.0
    noise_sigma: float = 0.0
    seed: int = 0
    dtype: str = "int16"

    def __post_init__(self):
        if self.tumor_radius <= 0.0:
            raise InputError(f"tumor radius must be > 0, got {self.tumor_radius}")
        if self.noise_sigma < 0.0:
            raise InputError(f"noise sigma must be >= 0, got {self.noise_sigma}")
        if self.dtype not in _DTYPES:
            raise InputError(f"unsupported phantom dtype {self.dtype!r} (choose from {sorted(_DTYPES)})")
        object.__setattr__(self, "tumor_center", np.asarray(self.tumor_center, dtype=np.float64))
        object.__setattr__(self, "spacing", np.asarray(self.spacing, dtype=np.float64))
        if self.origin is None:
            # center the grid in x/y; put z = 0 a quarter extent below the top slice
            nx, ny, nz = self.dims
            ox = -(nx - 1) / 2.0 * self.spacing[0]
            oy = -(ny - 1) / 2.0 * self.spacing[1]
            oz = -(nz - 1) * self.spacing[2] + 0.25 * (nz - 1) * self.spacing[2]
            object.__setattr__(self, "origin", np.array([ox, oy, oz]))
        else:
            object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))

    def to_jsonable(self) -> dict:
        q = self.pose.rotation
        return {
            "template_config": self.config.to_jsonable(),
            "pose": {
                "rotation_wxyz": [float(q.w), float(q.x), float(q.y), float(q.z)],
                "translation_mm": [float(x) for x in self.pose.translation],
            },
            "tumor_center_mm": [float(x) for x in self.tumor_center],
            "tumor_radius_mm": float(self.tumor_radius),
            "dims": list(self.dims),
            "spacing_mm": [float(x) for x in self.spacing],
            "origin_mm": [float(x) for x in self.origin],
            "background": float(self.background),
            "hole_intensity": float(self.hole_intensity),
            "tumor_intensity": float(self.tumor_intensity),
            "noise_sigma": float(self.noise_sigma),
            "seed": int(self.seed),
            "dtype": self.dtype,
        }

    @classmethod
    def from_jsonable(cls, data: dict) -> "PhantomSpec":
        if not isinstance(data, dict):
            raise SchemaError("phantom spec must be a JSON object")
        kwargs = {}
        if data.get("template_config") is not None:
            kwargs["config"] = TemplateConfig.from_jsonable(data["template_config"])
        if "pose" in data:
            p = data["pose"]
            kwargs["pose"] = RigidTransform(
                UnitQuaternion.from_array(np.asarray(p["rotation_wxyz"], dtype=np.float64)),
                np.asarray(p["translation_mm"], dtype=np.float64),
            )
        mapping = {
            "tumor_center_mm": "tumor_center",
            "tumor_radius_mm": "tumor_radius",
            "spacing_mm": "spacing",
            "origin_mm": "origin",
        }
        passthrough = {"background", "hole_intensity", "tumor_intensity", "noise_sigma", "seed", "dtype"}
        for key, val in data.items():
            if key in ("template_config", "pose"):
                continue
            elif key == "dims":
                kwargs["dims"] = tuple(int(x) for x in val)
            elif key in mapping:
                kwargs[mapping[key]] = val
            elif key in passthrough:
                kwargs[key] = val
            else:
                raise SchemaError(f"unknown phantom spec field {key!r}")
        return cls(**kwargs)


@dataclass(frozen=True)
class PhantomScene:
    volume: ScalarVolume
    true_pose: RigidTransform
    tumor_mesh: TriangleMesh
    tumor_center: np.ndarray
    tumor_radius: float
    landmark_truth: CorrespondencePairs
    tumor_label: ScalarVolume
    spec: PhantomSpec


def generate_phantom(spec: PhantomSpec) -> PhantomScene:
    """Rasterize the phantom scene described by spec (bitwise deterministic)."""
    cfg = spec.config
    nx, ny, nz = spec.dims
    if min(nx, ny, nz) < 2:
        raise InputError(f"phantom dims must be >= 2 per axis, got {spec.dims}")
    base = ScalarVolume(np.zeros(spec.dims, dtype=np.float64), spec.spacing, spec.origin)

    lo, hi = base.world_bounds()
    w, h, t = cfg.plate_width_mm, cfg.plate_height_mm, cfg.plate_thickness_mm
    corners = np.array(
        [[sx * w / 2, sy * h / 2, z] for sx in (-1, 1) for sy in (-1, 1) for z in (-t, 0.0)]
    )
    posed = spec.pose.apply(corners)
    if np.any(posed < lo) or np.any(posed > hi):
        raise InputError("pose places the template outside the volume bounds")

    voxels = np.full(spec.dims, spec.background, dtype=np.float64)

    # tumor ball first; hole cylinders overwrite on overlap
    _fill_ball(voxels, base, spec.tumor_center, spec.tumor_radius, spec.tumor_intensity)
    for hole in hole_grid(cfg):
        a = spec.pose.apply(hole.entry)
        b = spec.pose.apply(hole.entry + t * hole.direction)
        _fill_cylinder(voxels, base, a, b, cfg.hole_radius_mm, spec.hole_intensity)

    if spec.noise_sigma > 0.0:
        rng = np.random.default_rng(spec.seed)
        voxels = voxels + rng.normal(0.0, spec.noise_sigma, size=spec.dims)

    dtype = _DTYPES[spec.dtype]
    if np.issubdtype(dtype, np.integer):
        info = np.iinfo(dtype)
        voxels = np.clip(np.rint(voxels), info.min, info.max)
    volume = ScalarVolume(voxels.astype(dtype), spec.spacing, spec.origin)

    label = np.zeros(spec.dims, dtype=np.uint8)
    _fill_ball(label, base, spec.tumor_center, spec.tumor_radius, 1)
    tumor_label = ScalarVolume(label, spec.spacing, spec.origin)

    feats = cfg.landmark_features()
    src = np.array([p for _, p in feats])
    landmark_truth = CorrespondencePairs(src, spec.pose.apply(src))

    tumor_mesh = icosphere(spec.tumor_center, spec.tumor_radius, subdivisions=3)
    return PhantomScene(
        volume=volume,
        true_pose=spec.pose,
        tumor_mesh=tumor_mesh,
        tumor_center=spec.tumor_center,
        tumor_radius=spec.tumor_radius,
        landmark_truth=landmark_truth,
        tumor_label=tumor_label,
        spec=spec,
    )


def _subgrid(vol: ScalarVolume, world_lo: np.ndarray, world_hi: np.ndarray):
    """Index ranges covering a world-space box, clamped to the volume."""
    corners = np.array(
        [[x, y, z] for x in (world_lo[0], world_hi[0])
         for y in (world_lo[1], world_hi[1]) for z in (world_lo[2], world_hi[2])]
    )
    idx = vol.world_to_index(corners)
    lo = np.maximum(np.floor(idx.min(axis=0)).astype(int), 0)
    hi = np.minimum(np.ceil(idx.max(axis=0)).astype(int), np.asarray(vol.dims) - 1)
    if np.any(lo > hi):
        return None
    return lo, hi


def _world_centers(vol: ScalarVolume, lo, hi):
    ii, jj, kk = np.meshgrid(
        np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), np.arange(lo[2], hi[2] + 1),
        indexing="ij",
    )
    idx = np.stack([ii, jj, kk], axis=-1).reshape(-1, 3).astype(np.float64)
    return vol.index_to_world(idx).reshape(ii.shape + (3,))


def _fill_ball(voxels: np.ndarray, vol: ScalarVolume, center, radius, value) -> None:
    pad = radius + float(vol.spacing.max())
    rng = _subgrid(vol, np.asarray(center) - pad, np.asarray(center) + pad)
    if rng is None:
        return
    lo, hi = rng
    centers = _world_centers(vol, lo, hi)
    inside = np.sum((centers - np.asarray(center)) ** 2, axis=-1) <= radius**2
    view = voxels[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1]
    view[inside] = value


def _fill_cylinder(voxels: np.ndarray, vol: ScalarVolume, a, b, radius, value) -> None:
    """Flat-ended cylinder from a to b (the lubricant column fills the bore
    exactly through the plate, with no end caps past the surfaces)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    pad = radius + float(vol.spacing.max())
    rng = _subgrid(vol, np.minimum(a, b) - pad, np.maximum(a, b) + pad)
    if rng is None:
        return
    lo, hi = rng
    centers = _world_centers(vol, lo, hi)
    pts = centers.reshape(-1, 3)
    ab = b - a
    length_sq = float(ab @ ab)
    t = (pts - a) @ ab / length_sq
    perp = pts - (a + t[:, None] * ab)
    inside = ((t >= 0.0) & (t <= 1.0) & (np.einsum("ij,ij->i", perp, perp) <= radius**2)).reshape(
        centers.shape[:-1]
    )
    view = voxels[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1]
    view[inside] = value


def _segment_distance_sq(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        diff = points - a
        return np.einsum("ij,ij->i", diff, diff)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    diff = points - (a + t[:, None] * ab)
    return np.einsum("ij,ij->i", diff, diff)


def segment_sphere_hit(a, b, center, radius: float) -> bool:
    """Closed-form capsule test: segment within radius of the sphere center."""
    d2 = _segment_distance_sq(np.asarray(center, dtype=np.float64).reshape(1, 3),
                              np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
    return bool(d2[0] <= radius**2)


def ground_truth_selection(scene: PhantomScene, depth: float) -> list[str]:
    """Analytic hit set: holes whose needle axis capsule reaches the tumor ball."""
    cfg = scene.spec.config
    threshold = scene.tumor_radius + cfg.needle_radius_mm
    hits = []
    for hole in hole_grid(cfg):
        a = scene.true_pose.apply(hole.entry)
        b = scene.true_pose.apply(hole.entry + depth * hole.direction)
        if segment_sphere_hit(a, b, scene.tumor_center, threshold):
            hits.append(hole.id)
    return hits


def selection_margin(scene: PhantomScene, depth: float, pose: RigidTransform | None = None) -> float:
    """Smallest |axis-to-center distance - hit threshold| over all holes (mm).

    A comfortable margin means tessellation and registration error cannot
    flip any hole's hit/miss decision.
    """
    cfg = scene.spec.config
    pose = scene.true_pose if pose is None else pose
    threshold = scene.tumor_radius + cfg.needle_radius_mm
    margins = []
    for hole in hole_grid(cfg):
        a = pose.apply(hole.entry)
        b = pose.apply(hole.entry + depth * hole.direction)
        d = np.sqrt(_segment_distance_sq(scene.tumor_center.reshape(1, 3), a, b)[0])
        margins.append(abs(d - threshold))
    return float(min(margins))


def icosphere(center, radius: float, subdivisions: int = 3) -> TriangleMesh:
    """Tessellated sphere: subdivided icosahedron projected to the radius."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [(-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
         (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
         (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1)],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(verts)
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(m)
            return cache[key]

        new_faces = []
        for i, j, k in faces:
            a, b, c = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            new_faces += [(i, a, c), (j, b, a), (k, c, b), (a, b, c)]
        faces = new_faces
    pts = np.asarray(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(pts, np.asarray(faces, dtype=np.int32))


def load_phantom_spec(data: bytes) -> PhantomSpec:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaError(f"phantom spec is not valid JSON: {e}") from e
    return PhantomSpec.from_jsonable(doc)


def perturbed_spec(base: PhantomSpec, rng: np.random.Generator,
                   max_angle_deg: float = 10.0, max_shift_mm: float = 10.0) -> PhantomSpec:
    """Random pose perturbation of a phantom spec (for registration studies)."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.deg2rad(rng.uniform(0.0, max_angle_deg))
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    shift = rng.uniform(0.0, max_shift_mm) * direction
    pose = RigidTransform(UnitQuaternion.from_axis_angle(axis, angle), shift)
    from .geometry import compose

    return replace(base, pose=compose(pose, base.pose), seed=int(rng.integers(0, 2**31)))
