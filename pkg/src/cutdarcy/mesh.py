"""Structured simplicial background meshes with full connectivity.

The background box is split into an n x n grid of squares, each square into
two triangles along its lower-left -> upper-right diagonal.  Orientation is
counterclockwise everywhere.  Faces are stored once with ascending vertex
indices; the face normal points from the lower-indexed adjacent element to
the higher-indexed one (outward on the boundary).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class BackgroundMesh:
    vertices: np.ndarray      # (V, 2) float
    triangles: np.ndarray     # (T, 3) int, CCW
    faces: np.ndarray         # (E, 2) int, ascending vertex index
    face_elems: np.ndarray    # (E, 2) int, ascending element index, -1 if boundary
    elem_faces: np.ndarray    # (T, 3) int, local face i opposite local vertex i
    areas: np.ndarray         # (T,)
    diameters: np.ndarray     # (T,) longest edge
    centroids: np.ndarray     # (T, 2)
    face_lengths: np.ndarray  # (E,)
    face_normals: np.ndarray  # (E, 2) unit, lower elem -> higher elem
    face_midpoints: np.ndarray  # (E, 2)
    h_global: float
    n: int
    box: tuple[float, float, float, float]  # (x0, y0, x1, y1)
    boundary_faces: np.ndarray = field(default=None)  # type: ignore[assignment]
    interior_faces: np.ndarray = field(default=None)  # type: ignore[assignment]

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    def triangle_coords(self, t: int) -> np.ndarray:
        """(3, 2) vertex coordinates of element t."""
        return self.vertices[self.triangles[t]]


def build_structured_mesh(n: int, box: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)) -> BackgroundMesh:
    """Build the 2n^2-triangle structured mesh of an axis-aligned box.

    box is (x0, y0, x1, y1).  Vertex (i, j) sits at index j*(n+1)+i; the cell
    (i, j) produces triangles 2*(j*n+i) (lower, vertices a,b,c) and
    2*(j*n+i)+1 (upper, vertices a,c,d) where a,b,c,d walk the square CCW
    from its lower-left corner.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError(f"subdivision count must be a positive integer, got {n!r}")
    x0, y0, x1, y1 = map(float, box)
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgumentError(f"box must have positive area, got {box!r}")

    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys)            # Y varies along axis 0
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    ii, jj = np.meshgrid(np.arange(n), np.arange(n))
    i = ii.T.ravel()  # ordered so cell q = j*n + i
    j = jj.T.ravel()
    q = j * n + i
    order = np.argsort(q)
    i, j = i[order], j[order]
    a = j * (n + 1) + i
    b = j * (n + 1) + i + 1
    c = (j + 1) * (n + 1) + i + 1
    d = (j + 1) * (n + 1) + i
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([a, b, c])
    triangles[1::2] = np.column_stack([a, c, d])

    # Face table: local face k of a triangle is opposite its local vertex k.
    tri_v = triangles
    local_pairs = [(1, 2), (2, 0), (0, 1)]
    face_index: dict[tuple[int, int], int] = {}
    faces_list: list[tuple[int, int]] = []
    face_elems_list: list[list[int]] = []
    elem_faces = np.empty_like(triangles)
    for t in range(triangles.shape[0]):
        for k, (la, lb) in enumerate(local_pairs):
            va, vb = int(tri_v[t, la]), int(tri_v[t, lb])
            key = (va, vb) if va < vb else (vb, va)
            f = face_index.get(key)
            if f is None:
                f = len(faces_list)
                face_index[key] = f
                faces_list.append(key)
                face_elems_list.append([t, -1])
            else:
                face_elems_list[f][1] = t
            elem_faces[t, k] = f

    faces = np.asarray(faces_list, dtype=np.int64)
    face_elems = np.asarray(face_elems_list, dtype=np.int64)
    # ascending element order, boundary marker -1 last
    swap = (face_elems[:, 1] >= 0) & (face_elems[:, 1] < face_elems[:, 0])
    face_elems[swap] = face_elems[swap][:, ::-1]

    coords = vertices[triangles]                       # (T, 3, 2)
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    areas = signed.copy()
    edge_len = np.stack([
        np.linalg.norm(coords[:, 2] - coords[:, 1], axis=1),
        np.linalg.norm(coords[:, 0] - coords[:, 2], axis=1),
        np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1),
    ], axis=1)
    diameters = edge_len.max(axis=1)
    centroids = coords.mean(axis=1)

    fio = vertices[faces]                              # (E, 2, 2)
    tang = fio[:, 1] - fio[:, 0]
    face_lengths = np.linalg.norm(tang, axis=1)
    normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / face_lengths[:, None]
    face_midpoints = fio.mean(axis=1)
    # orient away from the lower-indexed (always present) adjacent element
    away = face_midpoints - centroids[face_elems[:, 0]]
    flip = np.einsum("ij,ij->i", normals, away) < 0.0
    normals[flip] *= -1.0

    boundary = np.flatnonzero(face_elems[:, 1] < 0)
    interior = np.flatnonzero(face_elems[:, 1] >= 0)

    return BackgroundMesh(
        vertices=vertices,
        triangles=triangles,
        faces=faces,
        face_elems=face_elems,
        elem_faces=elem_faces,
        areas=areas,
        diameters=diameters,
        centroids=centroids,
        face_lengths=face_lengths,
        face_normals=normals,
        face_midpoints=face_midpoints,
        h_global=float(diameters.max()),
        n=int(n),
        box=(x0, y0, x1, y1),
        boundary_faces=boundary,
        interior_faces=interior,
    )


def element_geometry(mesh: BackgroundMesh, t: int) -> tuple[float, float, tuple[np.ndarray, np.ndarray]]:
    """Area, diameter (longest edge) and the affine map of element t.

    The map (B, b) sends the reference triangle (0,0),(1,0),(0,1) onto the
    element: x = B @ xhat + b, det(B) = 2*area.
    """
    coords = mesh.triangle_coords(t)
    B = np.column_stack([coords[1] - coords[0], coords[2] - coords[0]])
    return float(mesh.areas[t]), float(mesh.diameters[t]), (B, coords[0].copy())


def dump_mesh(mesh: BackgroundMesh, path: str) -> None:
    """Plain-text dump (vertex list then triangle list) for debugging."""
    with open(path, "w") as fh:
        fh.write(f"# vertices {mesh.num_vertices}\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g}\n")
        fh.write(f"# triangles {mesh.num_triangles}\n")
        for tri in mesh.triangles:
            fh.write(f"{tri[0]} {tri[1]} {tri[2]}\n")
