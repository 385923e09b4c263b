"""Scalar volumes with spatial metadata, plus ROI cropping and thresholding.

Index-to-world mapping follows the voxel-center convention: index
(i, j, k) maps to origin + sum_a direction_a * spacing_a * index_a, with
the origin at the center of voxel (0, 0, 0). Voxels are stored x-fastest.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .geometry import as_vec3


@dataclass(frozen=True)
class ScalarVolume:
    """3D scalar grid. voxels has shape (nx, ny, nz) (x-fastest in memory order F)."""

    voxels: np.ndarray
    spacing: np.ndarray = field(default_factory=lambda: np.ones(3))
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    directions: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        v = np.asarray(self.voxels)
        if v.ndim != 3:
            raise InputError(f"voxels must be a 3D array, got {v.ndim} dimensions")
        spacing = as_vec3(self.spacing, "spacing")
        if np.any(spacing <= 0.0):
            raise InputError(f"spacing components must be > 0, got {spacing}")
        origin = as_vec3(self.origin, "origin")
        directions = np.asarray(self.directions, dtype=np.float64)
        if directions.shape != (3, 3):
            raise InputError(f"directions must be 3x3 (columns = axis directions), got {directions.shape}")
        if np.abs(directions.T @ directions - np.eye(3)).max() > 1e-6:
            raise InputError("direction matrix is not orthonormal within 1e-6")
        object.__setattr__(self, "voxels", v)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "directions", directions)
        for a in (spacing, origin, directions):
            a.setflags(write=False)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.voxels.shape)

    def index_to_world_matrix(self) -> np.ndarray:
        """Columns scaled by spacing: world = origin + M @ index."""
        return self.directions * self.spacing[None, :]

    def index_to_world(self, indices) -> np.ndarray:
        """Map (n, 3) or (3,) index coordinates (may be fractional) to world mm."""
        idx = np.asarray(indices, dtype=np.float64)
        single = idx.ndim == 1
        out = idx.reshape(-1, 3) @ self.index_to_world_matrix().T + self.origin
        return out[0] if single else out

    def world_to_index(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        inv = np.linalg.inv(self.index_to_world_matrix())
        out = (pts.reshape(-1, 3) - self.origin) @ inv.T
        return out[0] if single else out

    def value_range(self) -> tuple[float, float]:
        return float(self.voxels.min()), float(self.voxels.max())

    def world_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned world bounds of all voxel centers."""
        nx, ny, nz = self.dims
        corners = np.array(
            [[i, j, k] for i in (0, nx - 1) for j in (0, ny - 1) for k in (0, nz - 1)],
            dtype=np.float64,
        )
        world = self.index_to_world(corners)
        return world.min(axis=0), world.max(axis=0)


@dataclass(frozen=True)
class RoiBox:
    """Inclusive index-space box."""

    lower: tuple[int, int, int]
    upper: tuple[int, int, int]

    def __post_init__(self):
        lo = tuple(int(x) for x in self.lower)
        hi = tuple(int(x) for x in self.upper)
        if len(lo) != 3 or len(hi) != 3:
            raise InputError("ROI corners must have 3 components")
        if any(l > u for l, u in zip(lo, hi)):
            raise InputError(f"ROI lower corner {lo} exceeds upper corner {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def validate_within(self, dims) -> None:
        if any(l < 0 for l in self.lower) or any(u >= d for u, d in zip(self.upper, dims)):
            raise InputError(f"ROI {self.lower}..{self.upper} falls outside volume dims {tuple(dims)}")

    def contains_indices(self, idx: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((idx >= lo) & (idx <= hi), axis=1)


def crop_roi(vol: ScalarVolume, box: RoiBox) -> ScalarVolume:
    """Extract the ROI; world coordinates of retained voxels are unchanged."""
    box.validate_within(vol.dims)
    lo, hi = box.lower, box.upper
    sub = vol.voxels[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1].copy()
    new_origin = vol.index_to_world(np.asarray(lo, dtype=np.float64))
    return ScalarVolume(sub, vol.spacing, new_origin, vol.directions)


def threshold_points(vol: ScalarVolume, t: float) -> np.ndarray:
    """World coordinates of voxel centers with value >= t, in index order (x-fastest)."""
    mask = vol.voxels >= t
    idx = np.argwhere(mask)  # C order: x slowest -- reorder to x-fastest
    if len(idx) == 0:
        return np.zeros((0, 3), dtype=np.float64)
    order = np.lexsort((idx[:, 0], idx[:, 1], idx[:, 2]))
    return vol.index_to_world(idx[order].astype(np.float64))
