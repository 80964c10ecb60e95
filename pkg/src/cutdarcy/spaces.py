"""H(div)-conforming velocity spaces (RT0, BDM1, RT1) and discontinuous
pressures (P0, P1) on active meshes.

Every element carries a local frame xi = (x - c_T)/h_T and each basis
function is stored as monomial coefficients over [1, xi, eta, xi^2, xi*eta,
eta^2] per component.  Degrees of freedom are mean normal fluxes against the
global face normal, sigma_{F,m}(v) = (1/|F|) int_F v.n L_m(t) ds with L_0 = 1
and L_1 = 2t - 1 (t running between the face vertices in ascending global
index order), plus two area-mean interior moments for RT1.  The dual basis is
obtained per element by inverting the generalized Vandermonde matrix of the
functionals on the local polynomial space, so face orientation signs and
length normalization are absorbed into the coefficients, and the normal
component is continuous across shared faces by construction.  The mean-flux
normalization makes element mass matrices scale like h^2, which is what keeps
condition numbers at the fitted-element scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import ActiveMeshes, quadrature_triangle
from .mesh import BackgroundMesh

NMONO = 6  # [1, xi, eta, xi^2, xi*eta, eta^2]

# monomial derivative matrices: (D @ c) represents d/dxi of the poly with
# coefficients c
DXI = np.zeros((NMONO, NMONO))
DXI[0, 1] = 1.0   # xi -> 1
DXI[1, 3] = 2.0   # xi^2 -> 2 xi
DXI[2, 4] = 1.0   # xi*eta -> eta
DETA = np.zeros((NMONO, NMONO))
DETA[0, 2] = 1.0  # eta -> 1
DETA[1, 4] = 1.0  # xi*eta -> xi
DETA[2, 5] = 2.0  # eta^2 -> 2 eta

# master vector generators: components over the monomial basis
_GEN_X = np.zeros((8, NMONO))
_GEN_Y = np.zeros((8, NMONO))
_GEN_DIV = np.zeros((8, NMONO))  # physical divergence carries a 1/h_T factor
_GEN_X[0, 0] = 1.0                       # (1, 0)
_GEN_Y[1, 0] = 1.0                       # (0, 1)
_GEN_X[2, 1] = 1.0                       # (xi, 0)
_GEN_DIV[2, 0] = 1.0
_GEN_X[3, 2] = 1.0                       # (eta, 0)
_GEN_Y[4, 1] = 1.0                       # (0, xi)
_GEN_Y[5, 2] = 1.0                       # (0, eta)
_GEN_DIV[5, 0] = 1.0
_GEN_X[6, 3] = 1.0                       # (xi^2, xi*eta)
_GEN_Y[6, 4] = 1.0
_GEN_DIV[6, 1] = 3.0
_GEN_X[7, 4] = 1.0                       # (xi*eta, eta^2)
_GEN_Y[7, 5] = 1.0
_GEN_DIV[7, 2] = 3.0

# family = rows of generator combinations
_FAM = {
    "RT0": np.array([
        [1, 0, 0, 0, 0, 0, 0, 0],
        [0, 1, 0, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 1, 0, 0],   # (xi, eta)
    ], dtype=float),
    "BDM1": np.eye(8)[:6],
    "RT1": np.eye(8),
}

_PRES = {
    0: np.array([[1.0, 0, 0, 0, 0, 0]]),
    1: np.array([[1.0, 0, 0, 0, 0, 0],
                 [0.0, 1, 0, 0, 0, 0],
                 [0.0, 0, 1, 0, 0, 0]]),
}

_N_FACE_DOFS = {"RT0": 1, "BDM1": 2, "RT1": 2}
_N_INT_DOFS = {"RT0": 0, "BDM1": 0, "RT1": 2}
_PRESSURE_DEG = {"RT0": 0, "BDM1": 0, "RT1": 1}


@dataclass(frozen=True)
class ElementPair:
    velocity: str

    def __post_init__(self):
        if self.velocity not in _FAM:
            raise InvalidArgumentError(f"unknown velocity kind {self.velocity!r}")

    @property
    def pressure_degree(self) -> int:
        return _PRESSURE_DEG[self.velocity]

    @property
    def n_face_dofs(self) -> int:
        return _N_FACE_DOFS[self.velocity]

    @property
    def n_interior_dofs(self) -> int:
        return _N_INT_DOFS[self.velocity]

    @property
    def n_local(self) -> int:
        return 3 * self.n_face_dofs + self.n_interior_dofs

    @property
    def n_pressure_local(self) -> int:
        return 1 if self.pressure_degree == 0 else 3

    @property
    def name(self) -> str:
        return f"{self.velocity.lower()}p{self.pressure_degree}"


PAIRS = {p.name: p for p in (ElementPair("RT0"), ElementPair("BDM1"), ElementPair("RT1"))}


def mono_eval(xi: np.ndarray) -> np.ndarray:
    """(..., 2) local coordinates -> (..., 6) monomial values."""
    x, y = xi[..., 0], xi[..., 1]
    return np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=-1)


def normal_derivative_matrix(normal: np.ndarray, h: float, order: int) -> np.ndarray:
    """Monomial matrix of (n . grad)^order in physical coordinates."""
    D = (normal[0] * DXI + normal[1] * DETA) / h
    out = np.eye(NMONO)
    for _ in range(order):
        out = D @ out
    return out


# ---------------------------------------------------------------------------
# DofMap

@dataclass(frozen=True)
class DofMap:
    pair: ElementPair
    side: int
    mesh: BackgroundMesh
    elems: np.ndarray       # active elements, ascending
    elem_pos: np.ndarray    # (T,) -> position in elems, -1 if absent
    faces: np.ndarray       # faces with >= 1 active adjacent element, ascending
    face_pos: np.ndarray    # (E,) -> position in faces, -1 if absent
    n_udof: int
    n_pdof: int
    u_conn: np.ndarray      # (nelem, n_local) velocity local -> global
    p_conn: np.ndarray      # (nelem, n_pressure_local)
    phix: np.ndarray        # (nelem, n_local, 6) x-component coefficients
    phiy: np.ndarray        # (nelem, n_local, 6)
    divc: np.ndarray        # (nelem, n_local, 6) physical divergence coefficients
    pres: np.ndarray        # (n_pressure_local, 6)
    centers: np.ndarray     # (nelem, 2)
    hs: np.ndarray          # (nelem,)

    @property
    def n_elems(self) -> int:
        return self.elems.size


def build_dofmap(active: ActiveMeshes, side: int, pair: ElementPair) -> DofMap:
    mesh = active.mesh
    elems = active.side_elems(side)
    nelem = elems.size
    elem_pos = np.full(mesh.num_triangles, -1, dtype=np.int64)
    elem_pos[elems] = np.arange(nelem)

    faces = np.unique(mesh.elem_faces[elems].ravel())
    face_pos = np.full(mesh.num_faces, -1, dtype=np.int64)
    face_pos[faces] = np.arange(faces.size)

    npf = pair.n_face_dofs
    nint = pair.n_interior_dofs
    nloc = pair.n_local
    n_face_total = npf * faces.size
    n_udof = n_face_total + nint * nelem

    u_conn = np.empty((nelem, nloc), dtype=np.int64)
    local_faces = face_pos[mesh.elem_faces[elems]]          # (nelem, 3)
    for k in range(3):
        for m in range(npf):
            u_conn[:, npf * k + m] = npf * local_faces[:, k] + m
    for d in range(nint):
        u_conn[:, 3 * npf + d] = n_face_total + nint * np.arange(nelem) + d

    kpre = pair.n_pressure_local
    p_conn = (kpre * np.arange(nelem)[:, None] + np.arange(kpre)[None, :])

    centers = mesh.centroids[elems]
    hs = mesh.diameters[elems]
    coords = mesh.vertices[mesh.triangles[elems]]           # (nelem, 3, 2)

    fam = _FAM[pair.velocity]
    famx = fam @ _GEN_X      # (nloc, 6)
    famy = fam @ _GEN_Y
    famdiv = fam @ _GEN_DIV

    D = np.empty((nelem, nloc, nloc))

    # face moment rows: (1/|F|) int v.n L_m == int_0^1 v(x(t)).n L_m(t) dt
    tq, wq = np.polynomial.legendre.leggauss(3)
    tq = (tq + 1.0) / 2.0
    wq = wq / 2.0
    legendre = [np.ones_like(tq), 2.0 * tq - 1.0]
    for k in range(3):
        fks = mesh.elem_faces[elems, k]
        va = mesh.vertices[mesh.faces[fks, 0]]
        vb = mesh.vertices[mesh.faces[fks, 1]]
        nf = mesh.face_normals[fks]                         # (nelem, 2)
        pts = va[:, None, :] + tq[None, :, None] * (vb - va)[:, None, :]
        xi = (pts - centers[:, None, :]) / hs[:, None, None]
        mono = mono_eval(xi)                                # (nelem, q, 6)
        vx = np.einsum("eqk,ak->eqa", mono, famx)
        vy = np.einsum("eqk,ak->eqa", mono, famy)
        vn = vx * nf[:, None, 0:1] + vy * nf[:, None, 1:2]
        for m in range(npf):
            D[:, npf * k + m, :] = np.einsum("eqa,q->ea", vn, wq * legendre[m])

    if nint:
        bary, bw = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]), np.full(3, 1 / 3)
        pts = np.einsum("qb,ebj->eqj", bary, coords)
        xi = (pts - centers[:, None, :]) / hs[:, None, None]
        mono = mono_eval(xi)
        vx = np.einsum("eqk,ak->eqa", mono, famx)
        vy = np.einsum("eqk,ak->eqa", mono, famy)
        D[:, 3 * npf + 0, :] = np.einsum("eqa,q->ea", vx, bw)
        D[:, 3 * npf + 1, :] = np.einsum("eqa,q->ea", vy, bw)

    coeff = np.linalg.inv(D).transpose(0, 2, 1)             # (nelem, nloc, nloc)
    phix = coeff @ famx
    phiy = coeff @ famy
    divc = coeff @ famdiv / hs[:, None, None]

    return DofMap(
        pair=pair,
        side=side,
        mesh=mesh,
        elems=elems,
        elem_pos=elem_pos,
        faces=faces,
        face_pos=face_pos,
        n_udof=int(n_udof),
        n_pdof=int(kpre * nelem),
        u_conn=u_conn,
        p_conn=p_conn,
        phix=phix,
        phiy=phiy,
        divc=divc,
        pres=_PRES[pair.pressure_degree],
        centers=centers,
        hs=np.asarray(hs, dtype=float),
    )


# ---------------------------------------------------------------------------
# evaluation

def _local_mono(dofmap: DofMap, pos: np.ndarray, pts: np.ndarray) -> np.ndarray:
    xi = (pts - dofmap.centers[pos]) / dofmap.hs[pos][:, None]
    return mono_eval(xi)


def velocity_values(dofmap: DofMap, vec: np.ndarray, elem_ids: np.ndarray,
                    pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Field and divergence values; elem_ids gives each point's element."""
    pos = dofmap.elem_pos[elem_ids]
    mono = _local_mono(dofmap, pos, pts)
    loc = vec[dofmap.u_conn[pos]]                              # (n, nloc)
    vx = np.einsum("nak,nk,na->n", dofmap.phix[pos], mono, loc)
    vy = np.einsum("nak,nk,na->n", dofmap.phiy[pos], mono, loc)
    dv = np.einsum("nak,nk,na->n", dofmap.divc[pos], mono, loc)
    return np.column_stack([vx, vy]), dv


def pressure_values(dofmap: DofMap, vec: np.ndarray, elem_ids: np.ndarray,
                    pts: np.ndarray) -> np.ndarray:
    pos = dofmap.elem_pos[elem_ids]
    mono = _local_mono(dofmap, pos, pts)
    loc = vec[dofmap.p_conn[pos]]                              # (n, k)
    basis = np.einsum("ak,nk->na", dofmap.pres, mono)
    return np.einsum("na,na->n", basis, loc)


def interpolate(field, dofmap: DofMap) -> np.ndarray:
    """Apply the DOF functionals of the map to a callable field.

    field(pts (m,2)) -> (m,2).  Face moments use full faces and interior
    moments full elements, so the field must be evaluable there.
    """
    mesh = dofmap.mesh
    pair = dofmap.pair
    npf = pair.n_face_dofs
    vec = np.zeros(dofmap.n_udof)

    tq, wq = np.polynomial.legendre.leggauss(4)
    tq = (tq + 1.0) / 2.0
    wq = wq / 2.0
    legendre = [np.ones_like(tq), 2.0 * tq - 1.0]
    va = mesh.vertices[mesh.faces[dofmap.faces, 0]]
    vb = mesh.vertices[mesh.faces[dofmap.faces, 1]]
    nf = mesh.face_normals[dofmap.faces]
    pts = va[:, None, :] + tq[None, :, None] * (vb - va)[:, None, :]
    vals = field(pts.reshape(-1, 2)).reshape(pts.shape)
    vn = np.einsum("fqj,fj->fq", vals, nf)
    for m in range(npf):
        vec[np.arange(dofmap.faces.size) * npf + m] = vn @ (wq * legendre[m])

    if pair.n_interior_dofs:
        elems = dofmap.elems
        coords = mesh.vertices[mesh.triangles[elems]]
        bary, _ = _TRI_DEG2
        ptsv = np.einsum("qb,ebj->eqj", bary, coords)
        valsv = field(ptsv.reshape(-1, 2)).reshape(ptsv.shape)
        mean = valsv.mean(axis=1)                              # (nelem, 2)
        base = npf * dofmap.faces.size
        n = elems.size
        vec[base + 2 * np.arange(n) + 0] = mean[:, 0]
        vec[base + 2 * np.arange(n) + 1] = mean[:, 1]
    return vec


_TRI_DEG2 = (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]), np.full(3, 1 / 3))


def project_pressure(field, dofmap: DofMap) -> np.ndarray:
    """Elementwise L2 projection of a scalar callable onto the pressure space."""
    mesh = dofmap.mesh
    k = dofmap.pair.n_pressure_local
    vec = np.zeros(dofmap.n_pdof)
    for e, t in enumerate(dofmap.elems):
        qr = quadrature_triangle(mesh.triangle_coords(int(t)), 4)
        mono = mono_eval((qr.points - dofmap.centers[e]) / dofmap.hs[e])
        basis = mono @ dofmap.pres.T                           # (q, k)
        M = basis.T @ (basis * qr.weights[:, None])
        rhs = basis.T @ (qr.weights * field(qr.points))
        vec[dofmap.p_conn[e]] = np.linalg.solve(M, rhs)
    return vec


# ---------------------------------------------------------------------------
# reference-element views (tests and the Piola contract)

_REF_TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
_REF_CACHE: dict[str, np.ndarray] = {}


def _ref_tables(kind: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dual-basis coefficient tables on the reference triangle."""
    if kind in _REF_CACHE:
        return _REF_CACHE[kind]
    pair = ElementPair(kind)
    center = _REF_TRI.mean(axis=0)
    h = np.sqrt(2.0)
    fam = _FAM[kind]
    famx = fam @ _GEN_X
    famy = fam @ _GEN_Y
    famdiv = fam @ _GEN_DIV
    npf = pair.n_face_dofs
    nloc = pair.n_local
    D = np.empty((nloc, nloc))
    # local face i opposite vertex i, vertices in ascending local index
    face_verts = [(1, 2), (0, 2), (0, 1)]
    outward = {0: np.array([1.0, 1.0]) / np.sqrt(2.0),
               1: np.array([-1.0, 0.0]),
               2: np.array([0.0, -1.0])}
    tq, wq = np.polynomial.legendre.leggauss(3)
    tq = (tq + 1.0) / 2.0
    wq = wq / 2.0
    legendre = [np.ones_like(tq), 2.0 * tq - 1.0]
    for k, (ia, ib) in enumerate(face_verts):
        a, b = _REF_TRI[ia], _REF_TRI[ib]
        pts = a + np.outer(tq, b - a)
        mono = mono_eval((pts - center) / h)
        vn = mono @ (famx.T * outward[k][0] + famy.T * outward[k][1])
        for m in range(npf):
            D[npf * k + m] = (wq * legendre[m]) @ vn
    if pair.n_interior_dofs:
        bary, bw = _TRI_DEG2
        pts = bary @ _REF_TRI
        mono = mono_eval((pts - center) / h)
        D[3 * npf + 0] = bw @ (mono @ famx.T)
        D[3 * npf + 1] = bw @ (mono @ famy.T)
    coeff = np.linalg.inv(D).T
    tables = (coeff @ famx, coeff @ famy, coeff @ famdiv / h)
    _REF_CACHE[kind] = tables
    return tables


def ref_basis(kind: str, point) -> tuple[np.ndarray, np.ndarray]:
    """Values (n_local, 2) and divergences (n_local,) at a reference point."""
    phix, phiy, divc = _ref_tables(kind)
    center = _REF_TRI.mean(axis=0)
    mono = mono_eval((np.asarray(point, dtype=float) - center) / np.sqrt(2.0))
    vals = np.column_stack([phix @ mono, phiy @ mono])
    return vals, divc @ mono


def piola_map(element_geometry, ref_values: np.ndarray, ref_divergences: np.ndarray):
    """Contravariant (divergence-preserving) transform of reference values."""
    _, _, (B, _) = element_geometry
    detJ = float(np.linalg.det(B))
    if detJ == 0.0:
        raise InvalidArgumentError("degenerate element map")
    return ref_values @ (B.T / detJ), ref_divergences / detJ
