"""STL mesh file reading and writing (binary and ASCII).

Binary layout: 80-byte header (ignored on read, zero-filled on write),
little-endian uint32 triangle count, then per triangle 12 float32
(normal, v0, v1, v2) plus a uint16 attribute (written as 0).

ASCII follows the solid/facet/vertex grammar. Files starting with "solid"
are only treated as ASCII when the binary record arithmetic does not match
the file length, since binary exporters sometimes write "solid" headers.
"""
from __future__ import annotations

import io

import numpy as np

from .errors import ParseError
from .mesh import TriangleMesh, drop_degenerate_triangles, weld_vertices

RECORD = np.dtype([("normal", "<f4", 3), ("verts", "<f4", (3, 3)), ("attr", "<u2")])

WELD_TOL = 1e-6  # mm


def read_stl(data: bytes) -> TriangleMesh:
    """Parse binary or ASCII STL bytes into a welded TriangleMesh.

    Duplicate facet vertices within 1e-6 mm are merged into the index
    buffer; zero-area facets are dropped (CAD exports routinely contain
    them). The dropped count is available as mesh.normals is per kept facet.
    """
    mesh, _ = read_stl_report(data)
    return mesh


def read_stl_report(data: bytes) -> tuple[TriangleMesh, int]:
    """read_stl plus the number of degenerate facets dropped."""
    if len(data) >= 5 and data[:5] == b"solid" and not _binary_length_matches(data):
        facets, normals = _parse_ascii(data)
    else:
        facets, normals = _parse_binary(data)
    vertices, triangles = weld_vertices(facets, WELD_TOL)
    mesh = TriangleMesh(vertices, triangles, normals)
    return drop_degenerate_triangles(mesh)


def write_stl(mesh: TriangleMesh) -> bytes:
    """Serialize to binary STL.

    Vertex coordinates are written as float32, so write/read round-trips
    are exact at 32-bit precision. Stored per-triangle normals are written
    verbatim when present, otherwise recomputed from winding.
    """
    records = np.zeros(mesh.n_triangles, dtype=RECORD)
    records["verts"] = mesh.corners().astype("<f4")
    if mesh.normals is not None:
        records["normal"] = mesh.normals.astype("<f4")
    else:
        records["normal"] = mesh.face_normals().astype("<f4")
    buf = io.BytesIO()
    buf.write(b"\x00" * 80)
    buf.write(np.uint32(mesh.n_triangles).astype("<u4").tobytes())
    buf.write(records.tobytes())
    return buf.getvalue()


def write_stl_ascii(mesh: TriangleMesh, name: str = "mesh") -> bytes:
    """Serialize to ASCII STL (mainly for fixtures and interop debugging)."""
    normals = mesh.normals if mesh.normals is not None else mesh.face_normals()
    lines = [f"solid {name}"]
    for tri, n in zip(mesh.corners(), normals):
        lines.append(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
        lines.append("    outer loop")
        for v in tri:
            lines.append(f"      vertex {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    return ("\n".join(lines) + "\n").encode("ascii")


def _binary_length_matches(data: bytes) -> bool:
    if len(data) < 84:
        return False
    count = int(np.frombuffer(data[80:84], dtype="<u4")[0])
    return len(data) == 84 + 50 * count


def _parse_binary(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(data) < 84:
        raise ParseError(f"binary STL truncated: {len(data)} bytes, need at least 84", offset=len(data))
    count = int(np.frombuffer(data[80:84], dtype="<u4")[0])
    expected = 84 + 50 * count
    if len(data) != expected:
        raise ParseError(
            f"binary STL length mismatch: header declares {count} triangles "
            f"({expected} bytes) but file has {len(data)} bytes",
            offset=80,
        )
    records = np.frombuffer(data, dtype=RECORD, count=count, offset=84)
    return records["verts"].astype(np.float64), records["normal"].astype(np.float64)


def _parse_ascii(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as e:
        raise ParseError(f"ASCII STL contains non-ASCII bytes: {e}", offset=e.start) from e

    facets = []
    normals = []
    vertex_buf: list[list[float]] = []
    current_normal = [0.0, 0.0, 0.0]
    in_solid = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        head = tokens[0].lower()
        if head == "solid":
            in_solid = True
        elif head == "endsolid":
            in_solid = False
        elif head == "facet":
            if len(tokens) >= 5 and tokens[1].lower() == "normal":
                current_normal = _floats(tokens[2:5], lineno)
            vertex_buf = []
        elif head == "vertex":
            if len(tokens) != 4:
                raise ParseError(f"vertex line needs 3 coordinates, got {len(tokens) - 1}", offset=lineno)
            vertex_buf.append(_floats(tokens[1:4], lineno))
        elif head == "endfacet":
            if len(vertex_buf) != 3:
                raise ParseError(f"facet has {len(vertex_buf)} vertices, expected 3", offset=lineno)
            facets.append(vertex_buf)
            normals.append(current_normal)
        elif head in ("outer", "endloop"):
            continue
        else:
            raise ParseError(f"unexpected token {tokens[0]!r} in ASCII STL", offset=lineno)

    if in_solid:
        raise ParseError("ASCII STL missing endsolid", offset=None)
    if not facets:
        return np.zeros((0, 3, 3)), np.zeros((0, 3))
    return np.asarray(facets, dtype=np.float64), np.asarray(normals, dtype=np.float64)


def _floats(tokens, lineno) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError as e:
        raise ParseError(f"malformed number in ASCII STL: {e}", offset=lineno) from e
