"""Indexed triangle meshes and plane sectioning.

Meshes are vertex/index buffers (float64 vertices in mm, int32 triangles).
Device CAD surfaces, the reconstructed isosurface, and needle/tumor models
all flow through this type.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError
from .geometry import RigidTransform

DEGENERATE_AREA = 1e-12  # mm^2
CHAIN_TOL = 1e-6  # mm, endpoint coincidence when joining contour segments

PLANE_AXES = {"sagittal": 0, "coronal": 1, "axial": 2}
# In-plane axes used when projecting a 3D section point to 2D.
PLANE_UV = {"sagittal": (1, 2), "coronal": (0, 2), "axial": (0, 1)}


@dataclass(frozen=True)
class TriangleMesh:
    """Triangle soup with shared vertices.

    vertices: (n, 3) float64 mm; triangles: (m, 3) int32 vertex indices;
    normals: optional (m, 3) per-triangle normals (kept verbatim from file
    input, not normalized here).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3))
        if not np.all(np.isfinite(v)):
            raise InputError("mesh vertices contain non-finite coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise InputError(f"triangle indices out of range [0, {len(v)})")
        if len(t) >= 1 and len(v) < 3:
            raise InputError("mesh with triangles needs at least 3 vertices")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if self.normals is not None:
            n = np.ascontiguousarray(np.asarray(self.normals, dtype=np.float64).reshape(-1, 3))
            if len(n) != len(t):
                raise InputError("per-triangle normal count does not match triangle count")
            object.__setattr__(self, "normals", n)
        for a in (v, t):
            a.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> np.ndarray:
        """Triangle corner positions, shape (m, 3, 3)."""
        return self.vertices[self.triangles]

    def triangle_areas(self) -> np.ndarray:
        c = self.corners()
        cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def face_normals(self) -> np.ndarray:
        """Unit normals from vertex winding (right-hand rule)."""
        c = self.corners()
        cross = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        norms = np.linalg.norm(cross, axis=1)
        norms[norms == 0.0] = 1.0
        return cross / norms[:, None]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_vertices == 0:
            raise InputError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def transformed(self, t: RigidTransform) -> "TriangleMesh":
        return TriangleMesh(t.apply(self.vertices), self.triangles, self.normals)

    def signed_volume(self) -> float:
        """Enclosed volume via the divergence theorem (valid for closed meshes)."""
        c = self.corners()
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    def edge_counts(self) -> dict[tuple[int, int], int]:
        """Undirected edge -> number of incident triangles."""
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        edges.sort(axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        return {(int(a), int(b)): int(c) for (a, b), c in zip(uniq, counts)}

    def is_closed(self) -> bool:
        """True when every edge is shared by exactly two triangles."""
        if self.n_triangles == 0:
            return False
        return all(c == 2 for c in self.edge_counts().values())

    def euler_characteristic(self) -> int:
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        edges.sort(axis=1)
        n_edges = len(np.unique(edges, axis=0))
        used = np.unique(t)
        return int(len(used) - n_edges + len(t))


def weld_vertices(facet_vertices: np.ndarray, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Merge coincident vertices into an index buffer.

    facet_vertices is (m, 3, 3) triangle corners. Vertices are snapped to a
    grid of cell size tol, so "within tol" means "in the same tol cell".
    Returns (vertices, triangles).
    """
    flat = np.asarray(facet_vertices, dtype=np.float64).reshape(-1, 3)
    keys = np.round(flat / tol).astype(np.int64)
    _, first_idx, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    # keep first-appearance order so output is independent of the sort used by unique
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    vertices = flat[np.sort(first_idx)]
    triangles = rank[inverse].reshape(-1, 3)
    return vertices, triangles


def drop_degenerate_triangles(mesh: TriangleMesh) -> tuple[TriangleMesh, int]:
    """Remove zero-area triangles (area <= DEGENERATE_AREA). Returns (mesh, dropped)."""
    if mesh.n_triangles == 0:
        return mesh, 0
    areas = mesh.triangle_areas()
    keep = areas > DEGENERATE_AREA
    dropped = int((~keep).sum())
    if dropped == 0:
        return mesh, 0
    normals = mesh.normals[keep] if mesh.normals is not None else None
    return TriangleMesh(mesh.vertices, mesh.triangles[keep], normals), dropped


def mesh_plane_contours(
    mesh: TriangleMesh,
    pose: RigidTransform,
    axis: str,
    offset: float,
) -> list[dict]:
    """Section a posed mesh with an axis-aligned world plane.

    axis is one of 'axial' (z = offset), 'sagittal' (x = offset), or
    'coronal' (y = offset). Returns a list of polylines, each
    {"points": [[u, v], ...], "closed": bool} with in-plane coordinates
    (axial -> (x, y), sagittal -> (y, z), coronal -> (x, z)).
    Segment endpoints that coincide within 1e-6 mm are chained.
    """
    if axis not in PLANE_AXES:
        raise InputError(f"plane axis must be one of {sorted(PLANE_AXES)}, got {axis!r}")
    k = PLANE_AXES[axis]
    u_ax, v_ax = PLANE_UV[axis]
    if mesh.n_triangles == 0:
        return []

    verts = pose.apply(mesh.vertices)
    d = verts[:, k] - offset
    tri_d = d[mesh.triangles]  # (m, 3)

    # triangles with vertices strictly on both sides produce one segment each;
    # triangles lying in the plane are skipped (no unique section curve).
    pos = tri_d > 0
    neg = tri_d < 0
    crossing = pos.any(axis=1) & neg.any(axis=1)
    segments = []
    corners = verts[mesh.triangles]
    for ti in np.nonzero(crossing)[0]:
        dv = tri_d[ti]
        pts = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            da, db = dv[a], dv[b]
            if da == 0.0 and db == 0.0:
                continue
            if (da <= 0.0 < db) or (db <= 0.0 < da) or (da < 0.0 <= db) or (db < 0.0 <= da):
                t = da / (da - db)
                p = corners[ti, a] + t * (corners[ti, b] - corners[ti, a])
                pts.append((float(p[u_ax]), float(p[v_ax])))
        # dedupe (a vertex exactly on the plane appears from both its edges)
        uniq = []
        for p in pts:
            if not any(abs(p[0] - q[0]) <= CHAIN_TOL and abs(p[1] - q[1]) <= CHAIN_TOL for q in uniq):
                uniq.append(p)
        if len(uniq) == 2:
            segments.append((uniq[0], uniq[1]))
    return _chain_segments(segments)


def _chain_segments(segments: list[tuple]) -> list[dict]:
    """Join segments whose endpoints coincide within CHAIN_TOL into polylines."""
    if not segments:
        return []

    def key(p):
        return (round(p[0] / CHAIN_TOL), round(p[1] / CHAIN_TOL))

    endpoint_map: dict[tuple, list[int]] = {}
    for i, (a, b) in enumerate(segments):
        endpoint_map.setdefault(key(a), []).append(i)
        endpoint_map.setdefault(key(b), []).append(i)

    used = [False] * len(segments)
    polylines = []
    for start in range(len(segments)):
        if used[start]:
            continue
        used[start] = True
        a, b = segments[start]
        chain = [a, b]
        # grow forward from the tail, then from the head
        for endpoint, append in ((chain[-1], True), (chain[0], False)):
            cur = endpoint
            while True:
                candidates = [i for i in endpoint_map.get(key(cur), []) if not used[i]]
                if not candidates:
                    break
                i = candidates[0]
                used[i] = True
                sa, sb = segments[i]
                nxt = sb if key(sa) == key(cur) else sa
                if append:
                    chain.append(nxt)
                else:
                    chain.insert(0, nxt)
                cur = nxt
        closed = key(chain[0]) == key(chain[-1]) and len(chain) > 2
        if closed:
            chain = chain[:-1]
        polylines.append({"points": [[p[0], p[1]] for p in chain], "closed": closed})
    return polylines


def contour_length(polylines: list[dict]) -> float:
    """Total length of a contour set (closing edges included)."""
    total = 0.0
    for poly in polylines:
        pts = np.asarray(poly["points"], dtype=np.float64)
        if len(pts) < 2:
            continue
        seg = np.diff(pts, axis=0)
        total += float(np.linalg.norm(seg, axis=1).sum())
        if poly["closed"]:
            total += float(np.linalg.norm(pts[0] - pts[-1]))
    return total
