"""Mesh file parsing (OBJ / OFF / STL) and normalization.

All parsers produce the same canonical triangle soup: polygons with more
than three vertices are fan-triangulated, duplicate vertices are kept as
the source file stated them, materials / normals / texture coordinates
are read and discarded. Normalization recenters the vertex centroid at
the origin and scales the farthest vertex onto the unit sphere so every
model fits the renderer's orthographic view volume.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMesh, MalformedFile, UnsupportedFormat

FORMAT_OBJ = "OBJ"
FORMAT_OFF = "OFF"
FORMAT_STL_ASCII = "STL_ASCII"
FORMAT_STL_BINARY = "STL_BINARY"

_STL_RECORD = 50  # 12 normal floats + 36 vertex bytes + 2 attribute bytes
_STL_HEADER = 84  # 80-byte comment header + uint32 triangle count


@dataclass(frozen=True)
class TriangleMesh:
    """Parsed triangle geometry: (n, 3) float64 vertices, (m, 3) int faces."""

    vertices: np.ndarray
    faces: np.ndarray
    source_format: str

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 3:
            raise DegenerateMesh(f"need at least 3 vertices, got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3 or f.shape[0] < 1:
            raise DegenerateMesh(f"need at least 1 triangle, got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise MalformedFile(
                f"face index out of range (vertex count {v.shape[0]})"
            )
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def face_count(self) -> int:
        return self.faces.shape[0]


def _fan_triangulate(indices, line=None):
    if len(indices) < 3:
        raise MalformedFile(
            f"face needs at least 3 vertices, got {len(indices)}", line=line
        )
    return [(indices[0], indices[i], indices[i + 1])
            for i in range(1, len(indices) - 1)]


def _decode_text(data: bytes):
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def _parse_obj(data: bytes) -> TriangleMesh:
    vertices = []
    faces = []
    for lineno, raw in enumerate(_decode_text(data).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MalformedFile("vertex needs 3 coordinates", line=lineno)
            try:
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError:
                raise MalformedFile(f"non-numeric vertex: {line!r}", line=lineno)
        elif tag == "f":
            idx = []
            for tok in parts[1:]:
                ref = tok.split("/", 1)[0]
                try:
                    i = int(ref)
                except ValueError:
                    raise MalformedFile(f"non-numeric face index: {tok!r}", line=lineno)
                if i == 0:
                    raise MalformedFile("face index 0 is not allowed", line=lineno)
                # OBJ indices are 1-based; negative counts back from the end.
                i = i - 1 if i > 0 else len(vertices) + i
                if not 0 <= i < len(vertices):
                    raise MalformedFile(f"face index {tok} out of range", line=lineno)
                idx.append(i)
            faces.extend(_fan_triangulate(idx, line=lineno))
        # vn / vt / usemtl / mtllib / o / g / s etc: geometry-irrelevant, skipped.
    if not vertices or not faces:
        raise MalformedFile("OBJ contains no triangle geometry")
    return TriangleMesh(np.array(vertices), np.array(faces), FORMAT_OBJ)


def _parse_off(data: bytes) -> TriangleMesh:
    # Token stream with line tracking; OFF is whitespace-structured but
    # files in the wild vary in line layout.
    tokens = []
    for lineno, raw in enumerate(_decode_text(data).splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for tok in line.split():
            tokens.append((tok, lineno))
    if not tokens:
        raise MalformedFile("empty OFF file", line=1)
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(tokens):
            last = tokens[-1][1] if tokens else 1
            raise MalformedFile(f"truncated OFF: expected {what}", line=last)
        tok = tokens[pos]
        pos += 1
        return tok

    magic, lineno = take("OFF header")
    if magic != "OFF":
        raise MalformedFile(f"missing OFF magic, got {magic!r}", line=lineno)

    def take_int(what):
        tok, ln = take(what)
        try:
            return int(tok)
        except ValueError:
            raise MalformedFile(f"expected integer {what}, got {tok!r}", line=ln)

    def take_float(what):
        tok, ln = take(what)
        try:
            return float(tok)
        except ValueError:
            raise MalformedFile(f"expected number {what}, got {tok!r}", line=ln)

    n_vertices = take_int("vertex count")
    n_faces = take_int("face count")
    take_int("edge count")

    vertices = np.empty((n_vertices, 3), dtype=np.float64)
    for i in range(n_vertices):
        for axis in range(3):
            vertices[i, axis] = take_float(f"vertex {i} coordinate")
    faces = []
    for i in range(n_faces):
        count = take_int(f"face {i} vertex count")
        idx = []
        for _ in range(count):
            k = take_int(f"face {i} index")
            if not 0 <= k < n_vertices:
                raise MalformedFile(
                    f"face index {k} out of range (vertex count {n_vertices})",
                    line=tokens[pos - 1][1],
                )
            idx.append(k)
        faces.extend(_fan_triangulate(idx, line=tokens[pos - 1][1]))
    if not faces:
        raise MalformedFile("OFF contains no faces")
    return TriangleMesh(vertices, np.array(faces), FORMAT_OFF)


def _parse_stl_ascii(data: bytes) -> TriangleMesh:
    vertices = []
    faces = []
    current = []
    seen_solid = False
    for lineno, raw in enumerate(_decode_text(data).splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        low = line.lower()
        if low.startswith("solid"):
            seen_solid = True
        elif low.startswith("vertex"):
            parts = line.split()
            if len(parts) != 4:
                raise MalformedFile("vertex needs 3 coordinates", line=lineno)
            try:
                current.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError:
                raise MalformedFile(f"non-numeric vertex: {line!r}", line=lineno)
        elif low.startswith("endfacet"):
            if len(current) != 3:
                raise MalformedFile(
                    f"facet has {len(current)} vertices, expected 3", line=lineno
                )
            base = len(vertices)
            vertices.extend(current)
            faces.append((base, base + 1, base + 2))
            current = []
        # facet normal / outer loop / endloop / endsolid carry no geometry.
    if not seen_solid:
        raise MalformedFile("missing 'solid' header", line=1)
    if current:
        raise MalformedFile("truncated STL: facet without endfacet")
    if not faces:
        raise MalformedFile("STL contains no facets")
    return TriangleMesh(np.array(vertices), np.array(faces), FORMAT_STL_ASCII)


def _parse_stl_binary(data: bytes) -> TriangleMesh:
    if len(data) < _STL_HEADER:
        raise MalformedFile(
            f"binary STL shorter than {_STL_HEADER}-byte header", offset=len(data)
        )
    (count,) = struct.unpack_from("<I", data, 80)
    expected = _STL_HEADER + count * _STL_RECORD
    if len(data) < expected:
        raise MalformedFile(
            f"binary STL truncated: {count} triangles need {expected} bytes, "
            f"got {len(data)}", offset=len(data)
        )
    if count == 0:
        raise MalformedFile("binary STL with zero triangles", offset=80)
    records = np.frombuffer(
        data, dtype=np.dtype([
            ("normal", "<3f4"), ("verts", "<(3,3)f4"), ("attr", "<u2"),
        ]),
        count=count, offset=_STL_HEADER,
    )
    vertices = records["verts"].reshape(-1, 3).astype(np.float64)
    faces = np.arange(count * 3, dtype=np.int64).reshape(-1, 3)
    return TriangleMesh(vertices, faces, FORMAT_STL_BINARY)


_PARSERS = {
    FORMAT_OBJ: _parse_obj,
    FORMAT_OFF: _parse_off,
    FORMAT_STL_ASCII: _parse_stl_ascii,
    FORMAT_STL_BINARY: _parse_stl_binary,
}

_EXTENSIONS = {
    ".obj": FORMAT_OBJ,
    ".off": FORMAT_OFF,
    ".stl": None,  # binary vs ascii resolved by content
}


def _binary_stl_length_matches(data: bytes) -> bool:
    if len(data) < _STL_HEADER:
        return False
    (count,) = struct.unpack_from("<I", data, 80)
    return count > 0 and len(data) == _STL_HEADER + count * _STL_RECORD


def detect_format(data: bytes, filename: str | None = None) -> str:
    """Identify a mesh format: magic bytes, then extension, then the
    binary-STL length equation."""
    head = data.lstrip()[:16]
    if head.startswith(b"OFF"):
        return FORMAT_OFF
    if head.lower().startswith(b"solid"):
        # Binary files sometimes begin with 'solid' too; trust the length
        # equation over the magic when it holds exactly.
        if _binary_stl_length_matches(data):
            return FORMAT_STL_BINARY
        return FORMAT_STL_ASCII
    if filename:
        ext = "." + filename.rsplit(".", 1)[-1].lower() if "." in filename else ""
        fmt = _EXTENSIONS.get(ext)
        if fmt:
            return fmt
        if ext == ".stl":
            return (FORMAT_STL_BINARY if _binary_stl_length_matches(data)
                    else FORMAT_STL_ASCII)
    if _binary_stl_length_matches(data):
        return FORMAT_STL_BINARY
    raise UnsupportedFormat(
        "could not identify mesh format"
        + (f" for {filename!r}" if filename else "")
    )


def parse_mesh(data: bytes, fmt: str | None = None,
               filename: str | None = None) -> TriangleMesh:
    """Parse raw mesh file bytes into a TriangleMesh.

    fmt is one of the FORMAT_* constants or None for auto-detection.
    """
    if not data:
        raise MalformedFile("empty input", offset=0)
    if fmt is None or fmt == "auto":
        fmt = detect_format(data, filename)
    parser = _PARSERS.get(fmt)
    if parser is None:
        raise UnsupportedFormat(f"unknown format {fmt!r}")
    return parser(data)


def load_mesh(path) -> TriangleMesh:
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_mesh(data, filename=path)


def normalize_mesh(mesh: TriangleMesh) -> TriangleMesh:
    """Center the vertex centroid at the origin and scale the farthest
    vertex onto the unit sphere."""
    centered = mesh.vertices - mesh.vertices.mean(axis=0)
    radius = float(np.linalg.norm(centered, axis=1).max())
    if radius < 1e-12:
        raise DegenerateMesh("all vertices coincide, cannot normalize")
    return TriangleMesh(centered / radius, mesh.faces, mesh.source_format)


def _fmt(value) -> str:
    # repr of a Python float round-trips exactly
    return repr(float(value))


def serialize_off(mesh: TriangleMesh) -> bytes:
    lines = ["OFF", f"{mesh.vertex_count} {mesh.face_count} 0"]
    for v in mesh.vertices:
        lines.append(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
    for f in mesh.faces:
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    return ("\n".join(lines) + "\n").encode("ascii")


def serialize_stl_ascii(mesh: TriangleMesh, name: str = "mesh") -> bytes:
    lines = [f"solid {name}"]
    for f in mesh.faces:
        lines.append("  facet normal 0 0 0")
        lines.append("    outer loop")
        for vi in f:
            v = mesh.vertices[vi]
            lines.append(f"      vertex {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    return ("\n".join(lines) + "\n").encode("ascii")
