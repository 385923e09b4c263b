"""Marching cubes isosurface extraction over a ScalarVolume.

Per-cell lookup in the classic 256-case table with linear interpolation of
crossing positions along cell edges. Crossing vertices are computed once
per lattice edge (canonical low-corner/axis key) and welded through that
key, so shared edges produce shared mesh vertices exactly.

Case bits follow the below-isovalue convention, which orients triangles so
their normals point toward lower scalar values. The classic table's face
ambiguities are accepted as-is; convex shapes cannot trigger them.
"""
from __future__ import annotations

import numpy as np

from ._mc_tables import EDGE_TABLE, TRI_TABLE
from .errors import InputError
from .mesh import TriangleMesh
from .volume import ScalarVolume

# corner offsets in index space, in table order v0..v7
_CORNERS = np.array(
    [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
    dtype=np.int64,
)
# edge -> (canonical start corner, canonical end corner, axis); the canonical
# direction always runs along +axis so shared edges interpolate identically
_EDGES = [
    (0, 1, 0), (1, 2, 1), (3, 2, 0), (0, 3, 1),
    (4, 5, 0), (5, 6, 1), (7, 6, 0), (4, 7, 1),
    (0, 4, 2), (1, 5, 2), (2, 6, 2), (3, 7, 2),
]

_EDGE_TABLE = np.asarray(EDGE_TABLE, dtype=np.int32)
_TRI_TABLE = np.full((256, 16), -1, dtype=np.int64)
for _i, _row in enumerate(TRI_TABLE):
    _TRI_TABLE[_i, : len(_row)] = _row


def marching_cubes(vol: ScalarVolume, iso: float) -> TriangleMesh:
    """Extract the isosurface at the given value as a world-space mesh."""
    nx, ny, nz = vol.dims
    if min(nx, ny, nz) < 2:
        raise InputError(f"isosurfacing needs at least 2 samples per axis, got dims {vol.dims}")

    vals = np.asarray(vol.voxels, dtype=np.float64)
    inside = vals < iso

    ncx, ncy, ncz = nx - 1, ny - 1, nz - 1
    cube_idx = np.zeros((ncx, ncy, ncz), dtype=np.int32)
    for c, (ox, oy, oz) in enumerate(_CORNERS):
        cube_idx |= inside[ox : ox + ncx, oy : oy + ncy, oz : oz + ncz].astype(np.int32) << c

    edge_bits = _EDGE_TABLE[cube_idx]
    active = np.nonzero(edge_bits.ravel())[0]
    if len(active) == 0:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int32))

    ci, cj, ck = np.unravel_index(active, (ncx, ncy, ncz))
    cell_case = cube_idx.ravel()[active]
    cell_bits = edge_bits.ravel()[active]
    n_active = len(active)

    # interpolated crossing per (active cell, edge), keyed by the lattice edge
    edge_keys = np.full((n_active, 12), -1, dtype=np.int64)
    all_keys: list[np.ndarray] = []
    all_pos: list[np.ndarray] = []
    for e, (ca, cb, axis) in enumerate(_EDGES):
        hit = (cell_bits & (1 << e)) != 0
        if not hit.any():
            continue
        hi, hj, hk = ci[hit], cj[hit], ck[hit]
        oa = _CORNERS[ca]
        ob = _CORNERS[cb]
        va = vals[hi + oa[0], hj + oa[1], hk + oa[2]]
        vb = vals[hi + ob[0], hj + ob[1], hk + ob[2]]
        # a crossed edge has corners on opposite sides of iso, so vb != va
        t = (iso - va) / (vb - va)
        pos = np.stack([hi + oa[0], hj + oa[1], hk + oa[2]], axis=1).astype(np.float64)
        pos[:, axis] += t
        key = (((hi + oa[0]) * ny + (hj + oa[1])) * nz + (hk + oa[2])) * 3 + axis
        edge_keys[hit, e] = key
        all_keys.append(key)
        all_pos.append(pos)

    keys = np.concatenate(all_keys)
    positions = np.concatenate(all_pos)
    uniq_keys, first = np.unique(keys, return_index=True)
    uniq_pos = positions[first]

    # assemble triangles: table rows give edge ids, map through this cell's keys
    rows = _TRI_TABLE[cell_case][:, :15].reshape(n_active, 5, 3)
    valid = rows[:, :, 0] >= 0
    cell_of_tri = np.broadcast_to(np.arange(n_active)[:, None], valid.shape)[valid]
    tri_edges = rows[valid]
    tri_keys = edge_keys[cell_of_tri[:, None], tri_edges]
    triangles = np.searchsorted(uniq_keys, tri_keys).astype(np.int32)

    world_vertices = vol.index_to_world(uniq_pos)
    return TriangleMesh(world_vertices, triangles)
