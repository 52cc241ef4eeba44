import struct

import numpy as np
import pytest
from helpers_shapes import make_box, make_icosphere

from cadsketch.errors import DegenerateMesh, MalformedFile, UnsupportedFormat
from cadsketch.mesh_io import (FORMAT_OBJ, FORMAT_OFF, FORMAT_STL_ASCII,
                               FORMAT_STL_BINARY, TriangleMesh, detect_format,
                               normalize_mesh, parse_mesh, serialize_off,
                               serialize_stl_ascii)

MINIMAL_OFF = b"OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"


def make_binary_stl(triangles) -> bytes:
    """Hand-build a binary STL: 80-byte header, uint32 count, then per
    triangle 12 f32 (normal + 3 vertices) and a u16 attribute."""
    blob = b"\0" * 80 + struct.pack("<I", len(triangles))
    for tri in triangles:
        blob += struct.pack("<3f", 0.0, 0.0, 1.0)
        for v in tri:
            blob += struct.pack("<3f", *v)
        blob += struct.pack("<H", 0)
    return blob


class TestParseOff:
    def test_minimal(self):
        mesh = parse_mesh(MINIMAL_OFF)
        assert mesh.vertex_count == 3
        assert mesh.face_count == 1
        assert mesh.source_format == FORMAT_OFF
        np.testing.assert_array_equal(mesh.faces, [[0, 1, 2]])

    def test_quad_fan_triangulated(self):
        data = b"OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"
        mesh = parse_mesh(data)
        np.testing.assert_array_equal(mesh.faces, [[0, 1, 2], [0, 2, 3]])

    def test_truncated(self):
        with pytest.raises(MalformedFile):
            parse_mesh(b"OFF\n3 1 0\n0 0 0\n1 0 0\n")

    def test_bad_token_reports_line(self):
        with pytest.raises(MalformedFile, match="line 3"):
            parse_mesh(b"OFF\n3 1 0\n0 zero 0\n1 0 0\n0 1 0\n3 0 1 2\n")

    def test_index_out_of_range(self):
        with pytest.raises(MalformedFile, match="out of range"):
            parse_mesh(b"OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n")


class TestParseObj:
    def test_quad_face_fans(self):
        data = (b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        mesh = parse_mesh(data, FORMAT_OBJ)
        assert mesh.face_count == 2
        np.testing.assert_array_equal(mesh.faces, [[0, 1, 2], [0, 2, 3]])

    def test_slash_refs_and_negative_indices(self):
        data = (b"v 0 0 0\nv 1 0 0\nv 0 1 0\n"
                b"vn 0 0 1\nvt 0 0\n"
                b"f 1/1/1 -2/1 3//1\n")
        mesh = parse_mesh(data, FORMAT_OBJ)
        np.testing.assert_array_equal(mesh.faces, [[0, 1, 2]])

    def test_materials_discarded(self):
        data = (b"mtllib foo.mtl\nusemtl steel\no part\n"
                b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        mesh = parse_mesh(data, FORMAT_OBJ)
        assert mesh.face_count == 1

    def test_out_of_range_index_reports_line(self):
        data = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n"
        with pytest.raises(MalformedFile, match="line 4"):
            parse_mesh(data, FORMAT_OBJ)

    def test_non_numeric_vertex(self):
        with pytest.raises(MalformedFile):
            parse_mesh(b"v a b c\nf 1 1 1\n", FORMAT_OBJ)


class TestParseStl:
    def test_binary_two_triangles_six_vertices(self):
        # 184 bytes total: 80 header + 4 count + 2 * 50.
        tris = [
            [(0, 0, 0), (1, 0, 0), (0, 1, 0)],
            [(0, 0, 1), (1, 0, 1), (0, 1, 1)],
        ]
        blob = make_binary_stl(tris)
        assert len(blob) == 184
        mesh = parse_mesh(blob)
        assert mesh.source_format == FORMAT_STL_BINARY
        assert mesh.face_count == 2
        assert mesh.vertex_count == 6  # per-facet vertices, never merged

    def test_binary_truncated_reports_offset(self):
        blob = make_binary_stl([[(0, 0, 0), (1, 0, 0), (0, 1, 0)]])[:100]
        with pytest.raises(MalformedFile, match="offset"):
            parse_mesh(blob, FORMAT_STL_BINARY)

    def test_ascii_roundtrip_values(self):
        text = (b"solid demo\n"
                b" facet normal 0 0 1\n  outer loop\n"
                b"   vertex 0 0 0\n   vertex 2.5 0 0\n   vertex 0 1 0\n"
                b"  endloop\n endfacet\nendsolid demo\n")
        mesh = parse_mesh(text)
        assert mesh.source_format == FORMAT_STL_ASCII
        assert mesh.vertices[1, 0] == 2.5

    def test_ascii_bad_vertex_line(self):
        text = (b"solid demo\n facet normal 0 0 1\n  outer loop\n"
                b"   vertex 0 0\n")
        with pytest.raises(MalformedFile, match="line 4"):
            parse_mesh(text, FORMAT_STL_ASCII)


class TestDetection:
    def test_magic_off(self):
        assert detect_format(MINIMAL_OFF) == FORMAT_OFF

    def test_solid_magic_is_ascii(self):
        assert detect_format(b"solid x\nendsolid x\n") == FORMAT_STL_ASCII

    def test_binary_that_starts_with_solid(self):
        blob = make_binary_stl([[(0, 0, 0), (1, 0, 0), (0, 1, 0)]])
        blob = b"solid " + blob[6:]
        assert detect_format(blob) == FORMAT_STL_BINARY

    def test_extension_fallback(self):
        assert detect_format(b"v 0 0 0\nf 1 1 1\n", "model.obj") == FORMAT_OBJ

    def test_length_heuristic(self):
        blob = make_binary_stl([[(0, 0, 0), (1, 0, 0), (0, 1, 0)]])
        assert detect_format(blob) == FORMAT_STL_BINARY

    def test_unidentifiable(self):
        with pytest.raises(UnsupportedFormat):
            detect_format(b"\x00\x01\x02 garbage")

    def test_empty_input(self):
        with pytest.raises(MalformedFile):
            parse_mesh(b"")


class TestNormalize:
    def test_shifted_cube_recentered_to_unit_sphere(self):
        mesh = make_box(1, 1, 1, center=(5, 5, 5))
        norm = normalize_mesh(mesh)
        assert np.allclose(norm.vertices.mean(axis=0), 0.0, atol=1e-6)
        radii = np.linalg.norm(norm.vertices, axis=1)
        assert abs(radii.max() - 1.0) < 1e-6
        # cube corners all sit on the sphere
        assert np.allclose(radii, 1.0, atol=1e-9)

    def test_idempotent(self):
        mesh = make_icosphere(1, radius=3.5)
        once = normalize_mesh(mesh)
        twice = normalize_mesh(once)
        assert np.allclose(once.vertices, twice.vertices, atol=1e-6)

    def test_degenerate(self):
        mesh = TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 2]]), "OFF")
        with pytest.raises(DegenerateMesh):
            normalize_mesh(mesh)


class TestRoundTrip:
    def test_off_roundtrip_identical(self):
        mesh = make_icosphere(1)
        again = parse_mesh(serialize_off(mesh))
        np.testing.assert_array_equal(mesh.vertices, again.vertices)
        np.testing.assert_array_equal(mesh.faces, again.faces)

    def test_stl_ascii_roundtrip_identical(self):
        mesh = parse_mesh(serialize_stl_ascii(make_box()))
        again = parse_mesh(serialize_stl_ascii(mesh))
        np.testing.assert_array_equal(mesh.vertices, again.vertices)
        np.testing.assert_array_equal(mesh.faces, again.faces)


def polygon_area(points):
    """Shoelace in 3-D: half the norm of the summed cross products."""
    points = np.asarray(points)
    total = np.zeros(3)
    for i in range(1, len(points) - 1):
        total += np.cross(points[i] - points[0], points[i + 1] - points[0])
    return 0.5 * np.linalg.norm(total)


@pytest.mark.parametrize("n_sides", [4, 5, 8, 13])
def test_fan_triangulation_preserves_polygon_area(n_sides):
    rng = np.random.default_rng(n_sides)
    # random planar convex polygon embedded in 3-D
    angles = np.sort(rng.uniform(0, 2 * np.pi, n_sides))
    flat = np.stack([np.cos(angles), np.sin(angles), np.zeros(n_sides)], axis=1)
    basis, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    points = flat @ basis.T + rng.normal(size=3)

    header = f"OFF\n{n_sides} 1 0\n"
    body = "\n".join(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}" for p in points)
    face = f"\n{n_sides} " + " ".join(str(i) for i in range(n_sides)) + "\n"
    mesh = parse_mesh((header + body + face).encode())

    tri_total = 0.0
    for a, b, c in mesh.faces:
        tri_total += polygon_area(mesh.vertices[[a, b, c]])
    expected = polygon_area(points)
    assert abs(tri_total - expected) / expected < 1e-9
