"""Rigid 3D transforms built on unit quaternions.

Conventions used everywhere in this package:

* world coordinates are RAS millimeters,
* points are float64 arrays of shape (3,), point clouds are (n, 3),
* a rigid transform maps p -> R @ p + t,
* quaternions are stored (w, x, y, z) with w >= 0 (q and -q are the same
  rotation, so the sign is canonicalized at construction).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, InvalidRotationError

UNIT_TOL = 1e-9


def as_vec3(v, name: str = "vector") -> np.ndarray:
    """Coerce to a finite float64 (3,) array."""
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise InputError(f"{name} must have shape (3,), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} has non-finite components: {a}")
    return a


def as_point_cloud(pts, name: str = "points") -> np.ndarray:
    """Coerce to a finite float64 (n, 3) array."""
    a = np.asarray(pts, dtype=np.float64)
    if a.ndim == 1 and a.size == 3:
        a = a.reshape(1, 3)
    if a.ndim != 2 or a.shape[1] != 3:
        raise InputError(f"{name} must have shape (n, 3), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains non-finite coordinates")
    return a


@dataclass(frozen=True)
class UnitQuaternion:
    """Rotation as a unit quaternion (w, x, y, z), canonical sign w >= 0."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if not np.isfinite(n) or abs(n - 1.0) > UNIT_TOL:
            raise InvalidRotationError(f"quaternion norm {n} deviates from 1 beyond {UNIT_TOL}")
        if self.w < 0.0:
            object.__setattr__(self, "w", -self.w)
            object.__setattr__(self, "x", -self.x)
            object.__setattr__(self, "y", -self.y)
            object.__setattr__(self, "z", -self.z)

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, q) -> "UnitQuaternion":
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (4,):
            raise InvalidRotationError(f"quaternion must have 4 components, got shape {q.shape}")
        return cls(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    @classmethod
    def normalized(cls, w, x, y, z) -> "UnitQuaternion":
        """Build from unnormalized components (e.g. an eigenvector)."""
        n = np.sqrt(w * w + x * x + y * y + z * z)
        if n == 0.0 or not np.isfinite(n):
            raise InvalidRotationError("cannot normalize zero or non-finite quaternion")
        return cls(w / n, x / n, y / n, z / n)

    @classmethod
    def from_axis_angle(cls, axis, angle_rad: float) -> "UnitQuaternion":
        axis = as_vec3(axis, "axis")
        n = np.linalg.norm(axis)
        if n == 0.0:
            raise InvalidRotationError("rotation axis must be non-zero")
        axis = axis / n
        half = 0.5 * angle_rad
        s = np.sin(half)
        return cls(float(np.cos(half)), float(axis[0] * s), float(axis[1] * s), float(axis[2] * s))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return UnitQuaternion.normalized(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def rotation_angle(self) -> float:
        """Rotation angle in radians, in [0, pi]."""
        w = min(1.0, max(-1.0, self.w))
        return 2.0 * float(np.arccos(w))


def quat_to_matrix(q: UnitQuaternion) -> np.ndarray:
    """3x3 rotation matrix equivalent to the quaternion."""
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def matrix_to_quat(m: np.ndarray) -> UnitQuaternion:
    """Inverse of quat_to_matrix. Rejects matrices that are not proper rotations."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise InvalidRotationError(f"rotation matrix must be 3x3, got {m.shape}")
    if np.abs(m @ m.T - np.eye(3)).max() > 1e-6 or np.linalg.det(m) < 0.0:
        raise InvalidRotationError("matrix is not orthonormal with determinant +1")
    # Shepperd's method: pick the largest diagonal combination for stability.
    t = np.trace(m)
    if t > 0:
        r = np.sqrt(1.0 + t)
        s = 0.5 / r
        return UnitQuaternion.normalized(
            0.5 * r, (m[2, 1] - m[1, 2]) * s, (m[0, 2] - m[2, 0]) * s, (m[1, 0] - m[0, 1]) * s
        )
    i = int(np.argmax(np.diag(m)))
    j, k = (i + 1) % 3, (i + 2) % 3
    r = np.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k])
    s = 0.5 / r
    q = np.empty(4)
    q[0] = (m[k, j] - m[j, k]) * s
    q[1 + i] = 0.5 * r
    q[1 + j] = (m[j, i] + m[i, j]) * s
    q[1 + k] = (m[k, i] + m[i, k]) * s
    return UnitQuaternion.normalized(q[0], q[1], q[2], q[3])


@dataclass(frozen=True)
class RigidTransform:
    """Rotation followed by translation: p -> R @ p + t."""

    rotation: UnitQuaternion
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "translation", as_vec3(self.translation, "translation"))
        self.translation.setflags(write=False)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(UnitQuaternion.identity(), np.zeros(3))

    @classmethod
    def from_matrix(cls, rotation_matrix, translation) -> "RigidTransform":
        return cls(matrix_to_quat(rotation_matrix), translation)

    def matrix(self) -> np.ndarray:
        """Rotation part as a 3x3 matrix."""
        return quat_to_matrix(self.rotation)

    def homogeneous(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        h = np.eye(4)
        h[:3, :3] = self.matrix()
        h[:3, 3] = self.translation
        return h

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a cloud (n, 3)."""
        a = np.asarray(pts, dtype=np.float64)
        single = a.ndim == 1
        out = a.reshape(-1, 3) @ self.matrix().T + self.translation
        return out[0] if single else out

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.apply(pts)

    def is_identity(self, tol: float = 1e-12) -> bool:
        return (
            self.rotation.rotation_angle() <= tol
            and float(np.abs(self.translation).max()) <= tol
        )


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform equal to applying b first, then a: compose(a, b)(p) == a(b(p))."""
    rot = a.rotation * b.rotation
    trans = a.apply(b.translation)
    return RigidTransform(rot, trans)


def invert(t: RigidTransform) -> RigidTransform:
    """Inverse transform: invert(t)(t(p)) == p."""
    rot = t.rotation.conjugate()
    trans = -(quat_to_matrix(rot) @ t.translation)
    return RigidTransform(rot, trans)


def transform_points(t: RigidTransform, pts) -> np.ndarray:
    """Apply t to a point cloud, preserving cardinality and order."""
    return t.apply(as_point_cloud(pts))


def rotation_between(a: RigidTransform, b: RigidTransform) -> float:
    """Angle in radians separating the rotation parts of two transforms."""
    return (a.rotation.conjugate() * b.rotation).rotation_angle()
