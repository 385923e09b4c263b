"""Closed-form landmark registration between corresponded point sets.

The solver finds the rigid transform minimizing sum ||target_i - (R @
source_i + T)||^2 via the unit-quaternion eigendecomposition of the 4x4
correlation matrix (no scale: the devices are rigid bodies).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError, InputError
from .geometry import RigidTransform, UnitQuaternion, as_point_cloud

COLLINEAR_EIGENRATIO = 1e-10


@dataclass(frozen=True)
class CorrespondencePairs:
    """Paired landmark coordinates: source in model frame, target in image frame."""

    source: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        s = as_point_cloud(self.source, "source")
        t = as_point_cloud(self.target, "target")
        if len(s) != len(t):
            raise InputError(f"source/target length mismatch: {len(s)} vs {len(t)}")
        if len(s) < 3:
            raise InputError(f"at least 3 correspondence pairs required, got {len(s)}")
        if collinearity_ratio(s) <= COLLINEAR_EIGENRATIO:
            raise DegenerateConfigurationError("source landmarks are collinear (or coincident)")
        object.__setattr__(self, "source", s)
        object.__setattr__(self, "target", t)
        s.setflags(write=False)
        t.setflags(write=False)

    def __len__(self) -> int:
        return len(self.source)

    def to_jsonable(self) -> list[dict]:
        return [
            {"source": [float(x) for x in s], "target": [float(x) for x in t]}
            for s, t in zip(self.source, self.target)
        ]

    @classmethod
    def from_jsonable(cls, items) -> "CorrespondencePairs":
        try:
            src = [item["source"] for item in items]
            tgt = [item["target"] for item in items]
        except (TypeError, KeyError) as e:
            raise InputError(f"landmark pairs must be objects with source/target arrays: {e}") from e
        return cls(np.asarray(src, dtype=np.float64), np.asarray(tgt, dtype=np.float64))


def collinearity_ratio(pts: np.ndarray) -> float:
    """Middle-to-largest covariance eigenvalue ratio.

    Near zero for collinear sets. Three non-collinear points are always
    coplanar (smallest eigenvalue 0) yet fully determine a rigid fit, so
    the middle eigenvalue is the degeneracy detector.
    """
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    eig = np.linalg.eigvalsh(cov)
    if eig[2] <= 0.0:
        return 0.0
    return float(eig[1] / eig[2])


def absolute_orientation(pairs: CorrespondencePairs) -> RigidTransform:
    """Least-squares rigid transform mapping pairs.source onto pairs.target.

    Quaternion formulation: build N from the cross-covariance of the
    centered sets; the eigenvector of the largest eigenvalue is the optimal
    rotation, and the translation aligns the centroids.
    """
    src = pairs.source
    tgt = pairs.target
    sc = src.mean(axis=0)
    tc = tgt.mean(axis=0)
    m = (src - sc).T @ (tgt - tc)  # m[a, b] = sum source'_a * target'_b

    sxx, sxy, sxz = m[0]
    syx, syy, syz = m[1]
    szx, szy, szz = m[2]
    n = np.array(
        [
            [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
            [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
            [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
            [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
        ]
    )
    eigvals, eigvecs = np.linalg.eigh(n)
    q = eigvecs[:, -1]  # eigh sorts ascending
    rotation = UnitQuaternion.normalized(q[0], q[1], q[2], q[3])
    translation = tc - rotation_apply(rotation, sc)
    return RigidTransform(rotation, translation)


def rotation_apply(q: UnitQuaternion, v: np.ndarray) -> np.ndarray:
    from .geometry import quat_to_matrix

    return quat_to_matrix(q) @ v


def fiducial_registration_error(t: RigidTransform, pairs: CorrespondencePairs) -> float:
    """RMS residual ||target_i - t(source_i)|| in mm."""
    residual = pairs.target - t.apply(pairs.source)
    return float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
