"""NRRD reader/writer for the raw-encoded subset this engine consumes.

Supported: magic NRRD0004, dimension 3, types uint8/int16/uint16/float32,
encoding raw, little-endian, fields sizes / space directions / space
origin, data attached after the blank line. The first axis is fastest in
the payload, matching ScalarVolume's (nx, ny, nz) indexing.
"""
from __future__ import annotations

import numpy as np

from .errors import ParseError, UnsupportedFormatError
from .volume import ScalarVolume

MAGIC = "NRRD0004"

_TYPES = {
    "uint8": np.uint8,
    "uchar": np.uint8,
    "unsigned char": np.uint8,
    "int16": np.int16,
    "short": np.int16,
    "signed short": np.int16,
    "uint16": np.uint16,
    "unsigned short": np.uint16,
    "float": np.float32,
    "float32": np.float32,
}
_TYPE_NAMES = {np.uint8: "uint8", np.int16: "int16", np.uint16: "uint16", np.float32: "float"}


def read_volume(data: bytes) -> ScalarVolume:
    """Parse NRRD bytes into a ScalarVolume."""
    header_end = data.find(b"\n\n")
    sep = 2
    if header_end < 0:
        header_end = data.find(b"\r\n\r\n")
        sep = 4
    if header_end < 0:
        raise ParseError("NRRD header terminator (blank line) not found")
    header_text = data[:header_end].decode("ascii", errors="replace")
    payload = data[header_end + sep :]

    lines = header_text.splitlines()
    if not lines or not lines[0].startswith("NRRD"):
        raise ParseError(f"not a NRRD file (magic {lines[0][:8]!r})" if lines else "empty file", offset=0)

    fields: dict[str, str] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line or line.startswith("#"):
            continue
        if ":=" in line:  # key/value metadata: ignored
            continue
        if ":" not in line:
            raise ParseError(f"malformed NRRD field line {line!r}", offset=lineno)
        key, value = line.split(":", 1)
        fields[key.strip().lower()] = value.strip()

    for required in ("dimension", "type", "sizes", "encoding"):
        if required not in fields:
            raise UnsupportedFormatError(f"missing required NRRD field '{required}'")

    if fields["dimension"] != "3":
        raise UnsupportedFormatError(f"unsupported NRRD field: dimension {fields['dimension']} (only 3)")
    if fields["encoding"] != "raw":
        raise UnsupportedFormatError(f"unsupported NRRD field: encoding {fields['encoding']} (only raw)")
    type_name = fields["type"]
    if type_name not in _TYPES:
        raise UnsupportedFormatError(f"unsupported NRRD field: type {type_name}")
    endian = fields.get("endian", "little")
    if endian != "little":
        raise UnsupportedFormatError(f"unsupported NRRD field: endian {endian} (only little)")
    dtype = np.dtype(_TYPES[type_name]).newbyteorder("<")

    try:
        sizes = [int(s) for s in fields["sizes"].split()]
    except ValueError as e:
        raise ParseError(f"malformed sizes field: {e}") from e
    if len(sizes) != 3 or any(s <= 0 for s in sizes):
        raise ParseError(f"sizes must be 3 positive integers, got {fields['sizes']!r}")

    directions, spacing = _parse_space_directions(fields.get("space directions", "(1,0,0) (0,1,0) (0,0,1)"))
    origin = _parse_vector(fields.get("space origin", "(0,0,0)"), "space origin")

    expected = sizes[0] * sizes[1] * sizes[2] * dtype.itemsize
    if len(payload) != expected:
        raise ParseError(
            f"payload size mismatch: sizes {sizes} x {dtype.itemsize} bytes = {expected}, got {len(payload)}",
            offset=header_end + sep,
        )
    # first axis fastest in the file
    voxels = np.frombuffer(payload, dtype=dtype).reshape(sizes[::-1]).transpose(2, 1, 0)
    return ScalarVolume(voxels.astype(dtype.newbyteorder("=")), spacing, origin, directions)


def write_volume(vol: ScalarVolume) -> bytes:
    """Serialize a ScalarVolume to canonical NRRD bytes (lossless round-trip)."""
    dtype = vol.voxels.dtype
    base = dtype.type
    if base not in _TYPE_NAMES:
        raise UnsupportedFormatError(f"cannot write voxel dtype {dtype} (supported: {sorted(_TYPE_NAMES.values())})")
    nx, ny, nz = vol.dims
    m = vol.index_to_world_matrix()
    dirs = " ".join(_fmt_vec(m[:, a]) for a in range(3))
    header = [
        MAGIC,
        "# brachyplan scalar volume",
        "dimension: 3",
        f"type: {_TYPE_NAMES[base]}",
        f"sizes: {nx} {ny} {nz}",
        "encoding: raw",
        "endian: little",
        "space: right-anterior-superior",
        f"space directions: {dirs}",
        f"space origin: {_fmt_vec(vol.origin)}",
        "",
        "",
    ]
    payload = np.ascontiguousarray(vol.voxels.transpose(2, 1, 0)).astype(dtype.newbyteorder("<")).tobytes()
    return "\n".join(header).encode("ascii") + payload


def _parse_space_directions(text: str) -> tuple[np.ndarray, np.ndarray]:
    parts = text.replace(") (", ")|(").split("|")
    if len(parts) != 3:
        parts = text.split()
    if len(parts) != 3:
        raise ParseError(f"space directions must list 3 vectors, got {text!r}")
    cols = [_parse_vector(p, "space directions") for p in parts]
    m = np.stack(cols, axis=1)  # columns are axis direction * spacing
    spacing = np.linalg.norm(m, axis=0)
    if np.any(spacing == 0.0):
        raise ParseError(f"space directions contain a zero vector: {text!r}")
    directions = m / spacing[None, :]
    return directions, spacing


def _parse_vector(text: str, name: str) -> np.ndarray:
    cleaned = text.strip().strip("()")
    try:
        values = [float(x) for x in cleaned.replace(",", " ").split()]
    except ValueError as e:
        raise ParseError(f"malformed {name} vector {text!r}: {e}") from e
    if len(values) != 3:
        raise ParseError(f"{name} vector must have 3 components, got {text!r}")
    return np.asarray(values, dtype=np.float64)


def _fmt_vec(v) -> str:
    return "(" + ",".join(f"{float(x):.9g}" for x in v) + ")"
