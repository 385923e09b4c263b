"""Independent verification routines used by the tests.

Each oracle recomputes a result by a different method than the code under
test (homogeneous matrices, linear scans, brute-force loops, closed-form
algebra, LP feasibility), so agreement is meaningful.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import linprog


def homogeneous(rotation_matrix: np.ndarray, translation: np.ndarray) -> np.ndarray:
    h = np.eye(4)
    h[:3, :3] = rotation_matrix
    h[:3, 3] = translation
    return h


def linear_scan_nn(points: np.ndarray, queries: np.ndarray):
    """Exact nearest neighbors: numpy argmin (lowest index wins ties)."""
    idx = np.empty(len(queries), dtype=np.int64)
    dist = np.empty(len(queries))
    for i, q in enumerate(queries):
        d2 = np.sum((points - q) ** 2, axis=1)
        idx[i] = int(np.argmin(d2))
        dist[i] = np.sqrt(np.sum((points[idx[i]] - q) ** 2))
    return idx, dist


def brute_force_mse(transformed_moving: np.ndarray, fixed_points: np.ndarray) -> float:
    total = 0.0
    for p in transformed_moving:
        d2 = np.sum((fixed_points - p) ** 2, axis=1)
        total += d2.min()
    return total / len(transformed_moving)


def segment_sphere_interval(origin, direction, seg_len, center, radius):
    """Closed-form [t_lo, t_hi] along the unit direction where the segment is
    within radius of center; None when it never is."""
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    oc = origin - np.asarray(center, dtype=np.float64)
    b = 2.0 * float(direction @ oc)
    c = float(oc @ oc) - radius**2
    disc = b * b - 4.0 * c
    if disc < 0:
        return None
    root = np.sqrt(disc)
    t0 = (-b - root) / 2.0
    t1 = (-b + root) / 2.0
    lo, hi = max(t0, 0.0), min(t1, seg_len)
    if lo > hi:
        return None
    return lo, hi


def lp_boxes_intersect(center_a, axes_a, ext_a, center_b, axes_b, ext_b) -> bool:
    """Feasibility of a point inside both boxes (12 half-space constraints)."""
    rows = []
    rhs = []
    for center, axes, ext in ((center_a, axes_a, ext_a), (center_b, axes_b, ext_b)):
        for i in range(3):
            n = axes[i]
            d = float(n @ center)
            rows.append(n)
            rhs.append(d + ext[i])
            rows.append(-n)
            rhs.append(-(d - ext[i]))
    res = linprog(
        c=[0.0, 0.0, 0.0],
        A_ub=np.asarray(rows),
        b_ub=np.asarray(rhs),
        bounds=[(None, None)] * 3,
        method="highs",
    )
    return res.status == 0


def _seg_crosses_triangle(p, q, tri, tol=1e-12) -> bool:
    """Closed test: does segment pq meet the (closed) triangle?"""
    a, b, c = tri
    n = np.cross(b - a, c - a)
    dp = float(n @ (p - a))
    dq = float(n @ (q - a))
    if dp * dq > 0 and abs(dp) > tol and abs(dq) > tol:
        return False
    if abs(dp - dq) < tol:
        return False  # parallel to plane: handled by the coplanar path
    t = dp / (dp - dq)
    if t < -tol or t > 1 + tol:
        return False
    x = p + t * (q - p)
    return _point_in_triangle(x, tri, tol)


def _point_in_triangle(x, tri, tol=1e-10) -> bool:
    a, b, c = tri
    v0, v1, v2 = c - a, b - a, x - a
    d00 = v0 @ v0
    d01 = v0 @ v1
    d11 = v1 @ v1
    d20 = v2 @ v0
    d21 = v2 @ v1
    den = d00 * d11 - d01 * d01
    if abs(den) < 1e-18:
        return False
    u = (d11 * d20 - d01 * d21) / den
    v = (d00 * d21 - d01 * d20) / den
    return u >= -tol and v >= -tol and u + v <= 1 + tol


def sampled_tri_tri(t1, t2, grid: int = 24) -> bool:
    """Edge/plane crossing oracle with barycentric sampling for coplanar cases."""
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    for i in range(3):
        if _seg_crosses_triangle(t1[i], t1[(i + 1) % 3], t2):
            return True
        if _seg_crosses_triangle(t2[i], t2[(i + 1) % 3], t1):
            return True
    # coplanar-ish containment: sample barycentric points of each triangle
    n2 = np.cross(t2[1] - t2[0], t2[2] - t2[0])
    n2 /= np.linalg.norm(n2)
    for tri, other, n in ((t1, t2, n2), (t2, t1, None)):
        if n is None:
            n = np.cross(other[1] - other[0], other[2] - other[0])
            n /= np.linalg.norm(n)
        for i in range(grid + 1):
            for j in range(grid + 1 - i):
                k = grid - i - j
                x = (i * tri[0] + j * tri[1] + k * tri[2]) / grid
                if abs(float(n @ (x - other[0]))) < 1e-9 and _point_in_triangle(x, other):
                    return True
    return False


def brute_mesh_intersect(corners_a: np.ndarray, corners_b: np.ndarray, tri_tri_many) -> bool:
    """All-pairs triangle loop over posed corner arrays."""
    na, nb = len(corners_a), len(corners_b)
    rep_a = np.repeat(corners_a, nb, axis=0)
    rep_b = np.tile(corners_b, (na, 1, 1))
    return bool(tri_tri_many(rep_a, rep_b).any())
