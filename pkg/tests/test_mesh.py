from __future__ import annotations

import numpy as np
import pytest

from cutdarcy.errors import InvalidArgumentError
from cutdarcy.mesh import build_structured_mesh, dump_mesh, element_geometry


@pytest.mark.parametrize(
    "n,ntri,nvert,nedge",
    [(1, 2, 4, 5), (2, 8, 9, 16), (4, 32, 25, 56)],
)
def test_counts_euler(n, ntri, nvert, nedge):
    mesh = build_structured_mesh(n)
    assert mesh.num_triangles == ntri
    assert mesh.num_vertices == nvert
    assert mesh.num_faces == nedge
    # Euler: V - E + (T + outer face) = 2
    assert mesh.num_vertices - mesh.num_faces + mesh.num_triangles + 1 == 2


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16])
def test_boundary_face_count(n):
    mesh = build_structured_mesh(n)
    assert len(mesh.boundary_faces) == 4 * n
    assert len(mesh.interior_faces) == mesh.num_faces - 4 * n


@pytest.mark.parametrize("n", [1, 3, 8])
def test_face_adjacency_symmetric(n):
    mesh = build_structured_mesh(n)
    for f in range(mesh.num_faces):
        for t in mesh.face_elems[f]:
            if t >= 0:
                assert f in mesh.elem_faces[t]
    # and each local face is opposite its local vertex
    for t in range(mesh.num_triangles):
        for k in range(3):
            fverts = set(mesh.faces[mesh.elem_faces[t, k]])
            assert int(mesh.triangles[t, k]) not in fverts
            assert fverts <= set(mesh.triangles[t])


@pytest.mark.parametrize("n,box", [(4, (0.0, 0.0, 1.0, 1.0)), (3, (-1.0, 2.0, 2.5, 4.0))])
def test_areas_positive_and_sum(n, box):
    mesh = build_structured_mesh(n, box)
    assert np.all(mesh.areas > 0)
    box_area = (box[2] - box[0]) * (box[3] - box[1])
    assert abs(mesh.areas.sum() - box_area) <= 1e-12 * box_area
    # structured mesh is quasi-uniform with ratio 1
    assert mesh.diameters.max() / mesh.diameters.min() < 1.0 + 1e-12


def test_element_geometry_n1():
    mesh = build_structured_mesh(1)
    for t in range(2):
        area, diam, (B, b) = element_geometry(mesh, t)
        assert area == pytest.approx(0.5)
        assert diam == pytest.approx(np.sqrt(2.0))
        assert np.linalg.det(B) == pytest.approx(2 * area)
        # map sends reference vertices onto element vertices
        ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        mapped = ref @ B.T + b
        assert np.allclose(mapped, mesh.triangle_coords(t))


def test_element_geometry_n2():
    mesh = build_structured_mesh(2)
    for t in range(mesh.num_triangles):
        area, _, (B, _) = element_geometry(mesh, t)
        assert area == pytest.approx(1.0 / 8.0)
        assert np.linalg.det(B) == pytest.approx(0.25)


def test_face_normals_unit_and_oriented():
    mesh = build_structured_mesh(4)
    assert np.allclose(np.linalg.norm(mesh.face_normals, axis=1), 1.0)
    away = mesh.face_midpoints - mesh.centroids[mesh.face_elems[:, 0]]
    assert np.all(np.einsum("ij,ij->i", mesh.face_normals, away) > 0)
    # face vertices stored ascending
    assert np.all(mesh.faces[:, 0] < mesh.faces[:, 1])
    # interior faces: normal points toward the higher-indexed element
    for f in mesh.interior_faces:
        lo, hi = mesh.face_elems[f]
        d = mesh.centroids[hi] - mesh.centroids[lo]
        assert np.dot(mesh.face_normals[f], d) > 0


def test_triangles_ccw_and_deterministic():
    m1 = build_structured_mesh(5)
    m2 = build_structured_mesh(5)
    assert np.array_equal(m1.triangles, m2.triangles)
    assert np.array_equal(m1.faces, m2.faces)
    assert np.all(m1.areas > 0)  # CCW means positive signed area


def test_invalid_arguments():
    with pytest.raises(InvalidArgumentError):
        build_structured_mesh(0)
    with pytest.raises(InvalidArgumentError):
        build_structured_mesh(4, (0.0, 0.0, 0.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        build_structured_mesh(-2)


def test_dump(tmp_path):
    mesh = build_structured_mesh(2)
    path = tmp_path / "mesh.txt"
    dump_mesh(mesh, str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "# vertices 9"
    assert lines[10] == "# triangles 8"
    assert len(lines) == 1 + 9 + 1 + 8
