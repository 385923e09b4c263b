"""OBB-tree interference detection between triangle meshes.

Trees are built top-down: fit an oriented box to the covariance of the
node's triangle vertices, partition by centroid against the mean centroid
along the box's longest axis (median split when one side comes up empty),
and recurse until each leaf holds exactly one triangle. Queries walk both
trees, pruning with the 15-axis separating-axis test and resolving
surviving leaf pairs with an interval-based triangle-triangle test.

Closed-set semantics throughout: touching counts as intersecting, so a
tangent needle is conservatively flagged as a hit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .geometry import RigidTransform, compose, invert
from .mesh import TriangleMesh

SAT_EPS = 1e-9  # cross-product degeneracy and containment slack, uniform here


@dataclass(frozen=True)
class Obb:
    """Oriented box: center, row-wise orthonormal axes, half extents (mm)."""

    center: np.ndarray
    axes: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        a = np.asarray(self.axes, dtype=np.float64).reshape(3, 3)
        e = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        if np.abs(a @ a.T - np.eye(3)).max() > SAT_EPS * 10:
            raise InputError("OBB axes are not orthonormal")
        if np.any(e < 0.0):
            raise InputError(f"OBB half extents must be >= 0, got {e}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "axes", a)
        object.__setattr__(self, "half_extents", e)

    def contains(self, points, slack: float = SAT_EPS) -> bool:
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        local = (p - self.center) @ self.axes.T
        return bool(np.all(np.abs(local) <= self.half_extents + slack))

    def volume(self) -> float:
        return float(8.0 * np.prod(self.half_extents))

    def corners(self) -> np.ndarray:
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64
        )
        return self.center + (signs * self.half_extents) @ self.axes


def _fit_box(verts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Covariance-aligned box around a vertex set: (center, axes rows, extents)."""
    mean = verts.mean(axis=0)
    centered = verts - mean
    cov = centered.T @ centered
    if np.trace(cov) <= SAT_EPS**2:
        axes = np.eye(3)  # all vertices coincide: world axes
    else:
        _, vecs = np.linalg.eigh(cov)
        axes = vecs.T[::-1].copy()  # rows, largest-variance axis first
        if np.linalg.det(axes) < 0.0:
            axes[2] = -axes[2]
    proj = verts @ axes.T
    lo = proj.min(axis=0)
    hi = proj.max(axis=0)
    center = ((lo + hi) / 2.0) @ axes
    extents = np.maximum((hi - lo) / 2.0, 0.0)
    return center, axes, extents


def fit_obb(mesh: TriangleMesh, triangle_indices=None) -> Obb:
    """Fit an oriented box to a triangle subset (all triangles by default)."""
    if mesh.n_triangles == 0:
        raise InputError("cannot fit an OBB to a mesh with no triangles")
    if triangle_indices is None:
        triangle_indices = np.arange(mesh.n_triangles)
    idx = np.asarray(triangle_indices, dtype=np.int64).reshape(-1)
    if len(idx) == 0:
        raise InputError("triangle subset is empty")
    # distinct vertices: triangle valence must not bias the covariance axes
    verts = mesh.vertices[np.unique(mesh.triangles[idx])]
    return Obb(*_fit_box(verts))


class ObbTree:
    """Binary OBB hierarchy over a mesh; one triangle per leaf.

    Node arrays are preorder: node 0 is the root; leaves carry the triangle
    index, internal nodes carry child indices.
    """

    def __init__(self, mesh: TriangleMesh):
        if mesh.n_triangles == 0:
            raise InputError("cannot build an OBB tree over an empty mesh")
        self.mesh = mesh
        n_nodes = 2 * mesh.n_triangles - 1
        self.centers = np.zeros((n_nodes, 3))
        self.axes = np.zeros((n_nodes, 3, 3))
        self.extents = np.zeros((n_nodes, 3))
        self.volumes = np.zeros(n_nodes)
        self.left = np.full(n_nodes, -1, dtype=np.int64)
        self.right = np.full(n_nodes, -1, dtype=np.int64)
        self.leaf_triangle = np.full(n_nodes, -1, dtype=np.int64)
        self._build()

    @property
    def n_nodes(self) -> int:
        return len(self.centers)

    @property
    def n_leaves(self) -> int:
        return int((self.leaf_triangle >= 0).sum())

    def is_leaf(self, node: int) -> bool:
        return self.leaf_triangle[node] >= 0

    def node_obb(self, node: int) -> Obb:
        return Obb(self.centers[node], self.axes[node], self.extents[node])

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        out = 0
        for node in range(self.n_nodes):  # preorder: parent precedes children
            if self.left[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
            else:
                out = max(out, int(depths[node]))
        return out

    def subtree_triangles(self, node: int) -> list[int]:
        stack = [node]
        out = []
        while stack:
            n = stack.pop()
            if self.leaf_triangle[n] >= 0:
                out.append(int(self.leaf_triangle[n]))
            else:
                stack.append(int(self.left[n]))
                stack.append(int(self.right[n]))
        return out

    def _build(self):
        mesh = self.mesh
        triangles = mesh.triangles
        centroids = mesh.corners().mean(axis=1)
        next_node = [0]

        stack: list[tuple[int, np.ndarray]] = []

        def alloc(subset: np.ndarray) -> int:
            node = next_node[0]
            next_node[0] += 1
            verts = mesh.vertices[np.unique(triangles[subset])]
            c, a, e = _fit_box(verts)
            self.centers[node] = c
            self.axes[node] = a
            self.extents[node] = e
            self.volumes[node] = 8.0 * e[0] * e[1] * e[2]
            stack.append((node, subset))
            return node

        alloc(np.arange(mesh.n_triangles, dtype=np.int64))
        while stack:
            node, subset = stack.pop()
            if len(subset) == 1:
                self.leaf_triangle[node] = subset[0]
                continue
            axis = self.axes[node][int(np.argmax(self.extents[node]))]
            proj = centroids[subset] @ axis
            left_mask = proj < proj.mean()
            if not left_mask.any() or left_mask.all():
                order = np.argsort(proj, kind="stable")
                half = len(subset) // 2
                left_subset = subset[order[:half]]
                right_subset = subset[order[half:]]
            else:
                left_subset = subset[left_mask]
                right_subset = subset[~left_mask]
            self.left[node] = alloc(left_subset)
            self.right[node] = alloc(right_subset)


def build_obb_tree(mesh: TriangleMesh) -> ObbTree:
    return ObbTree(mesh)


@dataclass
class CollisionReport:
    intersecting: bool
    contact_pairs: list[tuple[int, int]] = field(default_factory=list)
    node_tests: int = 0


def obb_disjoint(a: Obb, b: Obb, rel: RigidTransform) -> bool:
    """Separating-axis test; rel maps b's frame into a's frame.

    True iff one of the 15 candidate axes strictly separates the boxes
    (touching boxes are not disjoint). Edge-cross axes with near-zero
    cross products are skipped.
    """
    b_center = rel.apply(b.center)
    b_axes = b.axes @ rel.matrix().T
    out = _sat_disjoint_batch(
        a.center[None], a.axes[None], a.half_extents[None],
        b_center[None], b_axes[None], b.half_extents[None],
    )
    return bool(out[0])


def _sat_disjoint_batch(ca, aa, ea, cb, ab, eb) -> np.ndarray:
    """Vectorized 15-axis SAT for box pairs given in one common frame.

    ca/cb: (k,3) centers; aa/ab: (k,3,3) row axes; ea/eb: (k,3) extents.
    |R| is inflated by a small epsilon so rounding noise on near-parallel
    axes can never fabricate a separation (extra descent is the only cost).
    """
    r = np.einsum("kij,klj->kil", aa, ab)  # r[k,i,j] = aa_i . ab_j
    absr = np.abs(r) + 1e-6
    t = np.einsum("kij,kj->ki", aa, cb - ca)  # b center in a's basis
    disjoint = np.zeros(len(ca), dtype=bool)

    # face axes of A
    for i in range(3):
        ra = ea[:, i]
        rb = np.einsum("kj,kj->k", eb, absr[:, i, :])
        disjoint |= np.abs(t[:, i]) > ra + rb
    # face axes of B
    for j in range(3):
        ra = np.einsum("ki,ki->k", ea, absr[:, :, j])
        rb = eb[:, j]
        lhs = np.abs(np.einsum("ki,ki->k", t, r[:, :, j]))
        disjoint |= lhs > ra + rb
    # edge cross axes
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            lhs = np.abs(t[:, i2] * r[:, i1, j] - t[:, i1] * r[:, i2, j])
            ra = ea[:, i1] * absr[:, i2, j] + ea[:, i2] * absr[:, i1, j]
            rb = eb[:, j1] * absr[:, i, j2] + eb[:, j2] * absr[:, i, j1]
            valid = 1.0 - r[:, i, j] ** 2 >= SAT_EPS**2  # skip near-parallel axes
            disjoint |= valid & (lhs > ra + rb)
    return disjoint


def tri_tri_intersect(t1, t2) -> bool:
    """Closed-set intersection test for two triangles in a common frame."""
    a = np.asarray(t1, dtype=np.float64).reshape(1, 3, 3)
    b = np.asarray(t2, dtype=np.float64).reshape(1, 3, 3)
    return bool(tri_tri_intersect_many(a, b)[0])


def tri_tri_intersect_many(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized closed triangle-triangle test over (n,3,3) corner arrays.

    Interval method: classify each triangle's vertices against the other's
    plane; reject on strict one-sided separation; otherwise compare the
    parametric intervals both triangles cut from the planes' intersection
    line. Coplanar pairs fall back to a 2D edge/containment test.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = len(a)
    result = np.zeros(n, dtype=bool)
    if n == 0:
        return result

    n1 = np.cross(a[:, 1] - a[:, 0], a[:, 2] - a[:, 0])
    n2 = np.cross(b[:, 1] - b[:, 0], b[:, 2] - b[:, 0])
    db = np.einsum("nj,nij->ni", n1, b - a[:, 0:1])  # b verts vs plane(a)
    da = np.einsum("nj,nij->ni", n2, a - b[:, 0:1])  # a verts vs plane(b)

    b_above = (db > 0).all(axis=1)
    b_below = (db < 0).all(axis=1)
    a_above = (da > 0).all(axis=1)
    a_below = (da < 0).all(axis=1)
    separated = b_above | b_below | a_above | a_below

    coplanar = (db == 0).all(axis=1) & ~separated

    cross_mask = ~separated & ~coplanar
    if cross_mask.any():
        d = np.cross(n1, n2)
        pa = np.einsum("nj,nij->ni", d, a)
        pb = np.einsum("nj,nij->ni", d, b)
        lo_a, hi_a = _line_interval(pa[cross_mask], da[cross_mask])
        lo_b, hi_b = _line_interval(pb[cross_mask], db[cross_mask])
        overlap = np.maximum(lo_a, lo_b) <= np.minimum(hi_a, hi_b)
        result[cross_mask] = overlap

    for k in np.nonzero(coplanar)[0]:
        result[k] = _coplanar_intersect(a[k], b[k], n1[k])
    return result


def _line_interval(p: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interval each triangle occupies along the intersection line.

    p: (m,3) vertex projections onto the line direction; d: (m,3) signed
    plane distances. Candidates are strict edge crossings plus vertices
    lying exactly on the plane; the rows reaching here have at least one
    candidate by construction.
    """
    m = len(p)
    lo = np.full((m, 6), np.inf)
    hi = np.full((m, 6), -np.inf)
    col = 0
    for i, j in ((0, 1), (1, 2), (2, 0)):
        crossing = d[:, i] * d[:, j] < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = p[:, i] + (p[:, j] - p[:, i]) * d[:, i] / (d[:, i] - d[:, j])
        tt = np.where(crossing, tt, np.nan)
        lo[:, col] = np.where(crossing, tt, np.inf)
        hi[:, col] = np.where(crossing, tt, -np.inf)
        col += 1
    for i in range(3):
        on_plane = d[:, i] == 0
        lo[:, col] = np.where(on_plane, p[:, i], np.inf)
        hi[:, col] = np.where(on_plane, p[:, i], -np.inf)
        col += 1
    return lo.min(axis=1), hi.max(axis=1)


def _coplanar_intersect(t1: np.ndarray, t2: np.ndarray, normal: np.ndarray) -> bool:
    """2D overlap test for coplanar triangles (closed sets)."""
    drop = int(np.argmax(np.abs(normal))) if np.abs(normal).max() > 0 else 2
    keep = [k for k in range(3) if k != drop]
    p1 = t1[:, keep]
    p2 = t2[:, keep]
    for i in range(3):
        for j in range(3):
            if _segments_intersect_2d(p1[i], p1[(i + 1) % 3], p2[j], p2[(j + 1) % 3]):
                return True
    return _point_in_tri_2d(p1[0], p2) or _point_in_tri_2d(p2[0], p1)


def _orient_2d(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_intersect_2d(p, q, r, s) -> bool:
    d1 = _orient_2d(r, s, p)
    d2 = _orient_2d(r, s, q)
    d3 = _orient_2d(p, q, r)
    d4 = _orient_2d(p, q, s)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    for point, seg_a, seg_b, orient in ((p, r, s, d1), (q, r, s, d2), (r, p, q, d3), (s, p, q, d4)):
        if orient == 0 and _on_segment_2d(seg_a, seg_b, point):
            return True
    return False


def _on_segment_2d(a, b, p) -> bool:
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def _point_in_tri_2d(p, tri) -> bool:
    d1 = _orient_2d(tri[0], tri[1], p)
    d2 = _orient_2d(tri[1], tri[2], p)
    d3 = _orient_2d(tri[2], tri[0], p)
    has_neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
    has_pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
    return not (has_neg and has_pos)


def collide(
    a: ObbTree,
    pose_a: RigidTransform,
    b: ObbTree,
    pose_b: RigidTransform,
    mode: str = "first-contact",
) -> CollisionReport:
    """Interference test between two posed trees.

    Walks overlapping node pairs breadth-first, descending the larger box
    when both nodes are internal (second tree on ties). 'first-contact'
    returns at the first intersecting triangle pair; 'all-pairs' reports
    every intersecting (triangle in a, triangle in b) pair.
    """
    if mode not in ("first-contact", "all-pairs"):
        raise InputError(f"mode must be 'first-contact' or 'all-pairs', got {mode!r}")
    rel = compose(invert(pose_a), pose_b)  # b model frame -> a model frame
    rel_r = rel.matrix()
    rel_t = rel.translation

    # b's boxes expressed in a's model frame, once
    b_centers = b.centers @ rel_r.T + rel_t
    b_axes = b.axes @ rel_r.T

    b_tri_corners = b.mesh.corners() @ rel_r.T + rel_t
    a_tri_corners = a.mesh.corners()

    report = CollisionReport(intersecting=False)
    frontier = np.array([[0, 0]], dtype=np.int64)
    while len(frontier):
        ia = frontier[:, 0]
        ib = frontier[:, 1]
        report.node_tests += len(frontier)
        disjoint = _sat_disjoint_batch(
            a.centers[ia], a.axes[ia], a.extents[ia],
            b_centers[ib], b_axes[ib], b.extents[ib],
        )
        live = frontier[~disjoint]

        next_pairs = []
        leaf_pairs = []
        for na, nb in live:
            a_leaf = a.leaf_triangle[na] >= 0
            b_leaf = b.leaf_triangle[nb] >= 0
            if a_leaf and b_leaf:
                leaf_pairs.append((a.leaf_triangle[na], b.leaf_triangle[nb]))
            elif a_leaf or (not b_leaf and b.volumes[nb] >= a.volumes[na]):
                next_pairs.append((na, b.left[nb]))
                next_pairs.append((na, b.right[nb]))
            else:
                next_pairs.append((a.left[na], nb))
                next_pairs.append((a.right[na], nb))

        if leaf_pairs:
            lp = np.asarray(leaf_pairs, dtype=np.int64)
            hits = tri_tri_intersect_many(a_tri_corners[lp[:, 0]], b_tri_corners[lp[:, 1]])
            for (ta, tb), hit in zip(lp, hits):
                if hit:
                    report.contact_pairs.append((int(ta), int(tb)))
                    report.intersecting = True
                    if mode == "first-contact":
                        return report
        frontier = np.asarray(next_pairs, dtype=np.int64).reshape(-1, 2)
    return report
