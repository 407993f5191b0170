import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinchlab.mesh import (
    FrameError,
    Mesh,
    MeshParseError,
    MeshValidationError,
    area_centroid,
    centroid_recenter,
    load_mesh,
    save_mesh,
    vertex_frames,
)
from pinchlab.shapes import Sphere, Torus, cube_mesh, generate

TET_OFF = """OFF
4 4 0
0 0 0
1 0 0
0 1 0
0 0 1
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
"""

TET_V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
TET_F = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])


def test_load_tetrahedron_off(tmp_path):
    path = tmp_path / "tet.off"
    path.write_text(TET_OFF)
    m = load_mesh(path)
    assert m.n_vertices == 4 and m.n_faces == 4
    assert m.euler_characteristic == 2
    np.testing.assert_array_equal(m.vertices, TET_V)


def test_non_manifold_edge_is_named(tmp_path):
    v = np.vstack([TET_V, [[0.5, -1.0, 0.2]]])
    f = np.vstack([TET_F, [[0, 1, 4]]])
    with pytest.raises(MeshValidationError, match="non-manifold") as info:
        Mesh(v, f)
    assert set(info.value.simplex) == {0, 1}
    assert "(0, 1)" in str(info.value) or "0-1" in str(info.value) or "0, 1" in str(info.value)


def test_open_boundary_rejected():
    with pytest.raises(MeshValidationError, match="boundary"):
        Mesh(TET_V, TET_F[:3])


def test_inconsistent_orientation_rejected():
    f = TET_F.copy()
    f[3] = f[3, ::-1]
    with pytest.raises(MeshValidationError, match="orient"):
        Mesh(TET_V, f)


def test_inward_orientation_rejected():
    with pytest.raises(MeshValidationError, match="volume"):
        Mesh(TET_V, TET_F[:, ::-1])


def test_two_components_rejected():
    v = np.vstack([TET_V, TET_V + 5.0])
    f = np.vstack([TET_F, TET_F + 4])
    with pytest.raises(MeshValidationError, match="component"):
        Mesh(v, f)


def test_degenerate_face_rejected():
    v = TET_V.copy()
    v[3] = [0.5, 0.5, 0.0]
    with pytest.raises(MeshValidationError):
        Mesh(v, TET_F)


def test_index_out_of_range_rejected():
    f = TET_F.copy()
    f[0, 0] = 7
    with pytest.raises(MeshValidationError, match="range"):
        Mesh(TET_V, f)


def test_malformed_off(tmp_path):
    path = tmp_path / "bad.off"
    path.write_text("OFF\n4 4 0\n0 0 0\n1 0\n")
    with pytest.raises(MeshParseError):
        load_mesh(path)


def test_quad_face_rejected(tmp_path):
    path = tmp_path / "quad.off"
    path.write_text(TET_OFF.replace("3 1 2 3", "4 1 2 3 0"))
    with pytest.raises(MeshParseError):
        load_mesh(path)


def test_obj_round_trip_bit_identical(tmp_path):
    m = generate(Sphere(1.0), 3)
    path = tmp_path / "ico.obj"
    save_mesh(m, path)
    back = load_mesh(path)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.faces, m.faces)


def test_off_round_trip_exact(tmp_path):
    m = generate(Torus(2.0, 0.5), 12)
    path = tmp_path / "t.off"
    save_mesh(m, path)
    assert path.read_text().splitlines()[0] == "OFF"
    back = load_mesh(path)
    assert (back.n_vertices, back.n_faces) == (m.n_vertices, m.n_faces)
    np.testing.assert_array_equal(back.vertices, m.vertices)


def test_obj_other_records_ignored_with_warning(tmp_path, caplog):
    path = tmp_path / "tet.obj"
    lines = ["# tetrahedron", "o tet", "vn 0 0 1"]
    lines += [f"v {x} {y} {z}" for x, y, z in TET_V]
    lines += [f"f {a + 1}/1 {b + 1}/1 {c + 1}/1" for a, b, c in TET_F]
    path.write_text("\n".join(lines) + "\n")
    with caplog.at_level(logging.WARNING):
        m = load_mesh(path)
    assert m.n_faces == 4
    assert any("ignor" in r.message for r in caplog.records)


def test_sphere_normals_are_radial(unit_sphere):
    m = unit_sphere.mesh
    normals = vertex_frames(m).normals
    radial = m.vertices / np.linalg.norm(m.vertices, axis=1)[:, None]
    angle = np.arccos(np.clip(np.sum(normals * radial, axis=1), -1, 1))
    assert angle.max() < 1e-3


def test_sphere_area_weights(unit_sphere):
    total = vertex_frames(unit_sphere.mesh).areas.sum()
    assert abs(total - 4 * np.pi) / (4 * np.pi) < 2e-3


def test_frame_invariants(unit_sphere):
    fr = vertex_frames(unit_sphere.mesh)
    n, t = fr.normals, fr.tangents
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.einsum("ikj,ij->ik", t, n), 0.0, atol=1e-12)
    np.testing.assert_allclose(np.einsum("ikj,ilj->ikl", t, t), np.broadcast_to(np.eye(2), (len(n), 2, 2)), atol=1e-12)
    assert (fr.areas > 0).all()
    assert abs(fr.areas.sum() - unit_sphere.mesh.total_area) <= 1e-9 * unit_sphere.mesh.total_area
    f0 = fr[0]
    np.testing.assert_array_equal(f0.normal, n[0])
    assert len(list(fr)) == len(fr)


def test_cube_corner_normal_on_diagonal():
    m = cube_mesh(4, 1.0)
    assert m.euler_characteristic == 2
    c = m.vertices - m.vertices.mean(axis=0)
    corner = int(np.argmax(c.sum(axis=1)))
    diag = np.sign(c[corner]) / np.sqrt(3)
    np.testing.assert_allclose(m.frames.normals[corner], diag, atol=1e-12)


def test_cancelling_normals_raise_frame_error():
    m = Mesh(TET_V[:3], np.array([[0, 1, 2], [0, 2, 1]]), validate=False)
    with pytest.raises(FrameError) as info:
        vertex_frames(m)
    assert info.value.vertex == 0


def test_recenter_shifted_sphere():
    m = generate(Sphere(1.0), 3)
    shifted = m.transformed(translation=[5.0, 0.0, 0.0])
    back = centroid_recenter(shifted)
    np.testing.assert_allclose(back.vertices, m.vertices, atol=1e-12)


def test_recenter_idempotent():
    m = centroid_recenter(generate(Sphere(1.0), 3))
    np.testing.assert_allclose(centroid_recenter(m).vertices, m.vertices, atol=1e-12)


def test_recenter_torus_centroid():
    m = generate(Torus(2.0, 0.5), 24).transformed(translation=[1.0, 2.0, 3.0])
    np.testing.assert_allclose(area_centroid(centroid_recenter(m)), 0.0, atol=1e-9)


@pytest.mark.parametrize("shape,res", [(Sphere(1.3), 2), (Torus(2.0, 0.7), 10)])
def test_normal_closure(shape, res):
    m = generate(shape, res)
    total = (m.face_areas[:, None] * m.face_normals).sum(axis=0)
    assert np.linalg.norm(total) <= 1e-9 * m.total_area
    assert m.n_faces == len(m.face_areas)


@settings(max_examples=25, deadline=None)
@given(st.tuples(*[st.floats(-50, 50) for _ in range(3)]))
def test_frames_translation_equivariant(shift):
    m = generate(Sphere(1.0), 2)
    moved = m.transformed(translation=shift)
    a, b = m.frames, moved.frames
    np.testing.assert_allclose(b.normals, a.normals, atol=1e-9)
    np.testing.assert_allclose(b.tangents, a.tangents, atol=1e-8)
    np.testing.assert_allclose(centroid_recenter(moved).frames.normals, a.normals, atol=1e-9)


def test_mesh_is_immutable():
    m = Mesh(TET_V, TET_F)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 3.0
