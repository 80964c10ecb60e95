"""Bilinear and linear forms of the mixed Darcy interface scheme.

Assembles, over the cut quadrature collections of :mod:`cutdarcy.geometry`:

- ``a``:  velocity mass per side, the interface coupling of normal traces,
  and the weak velocity-boundary penalty ``lambda_u = c / h_T``;
- ``b`` / ``b0``:  pressure-divergence coupling, with and without the
  velocity-boundary term;
- ghost penalties ``s_u`` (vector normal-derivative jumps), ``s_p`` (scalar
  pressure jumps), and the divergence-compatible ``s_b`` (divergence jumps
  against pressure jumps), on either the full cut-neighborhood face sets or
  the macro-interior face sets;
- the right-hand side and the method-specific block system.

Interface normals are stored pointing out of subdomain 2; jump/average are
side-ordered ([w] = w_1 - w_2, {w} = (w_1 + w_2)/2), so every interface term
of the scheme is either invariant under the normal flip or has its sign
absorbed here (the interface pressure enters with a plus sign against the
stored normal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError
from .geometry import (
    ActiveMeshes,
    interface_quadrature,
    quadrature_segment,
    side_quadrature,
)
from .kernels import get_kernels
from .spaces import DofMap, mono_eval, normal_derivative_matrix

METHODS = ("unstab", "m1", "m2")
STAB_DOMAINS = ("full", "macro")
COUPLINGS = ("b0", "b")


def _as_pair(value, name: str) -> tuple[float, float]:
    if np.isscalar(value):
        return (float(value), float(value))
    pair = tuple(float(v) for v in value)
    if len(pair) != 2:
        raise InvalidArgumentError(f"{name} must be a scalar or a pair")
    return pair


@dataclass(frozen=True)
class Params:
    """Physical and discretization parameters of one scheme instance."""

    kappa_gamma: float = 1.0
    xi: float = 0.125
    eta: tuple[float, float] = (1.0, 1.0)
    c_boundary: float = 1.0          # lambda_u = c_boundary / h_T
    tau_u: float = 1.0
    tau_p: float = 1.0
    tau_b: float = 1.0
    gamma: float = 1.0
    method: str = "m2"
    stab: str = "full"
    delta: tuple[float, float] = (0.25, 0.25)
    coupling: str = "b0"             # "b" couples the velocity boundary into the q-rows

    def __post_init__(self):
        object.__setattr__(self, "eta", _as_pair(self.eta, "eta"))
        object.__setattr__(self, "delta", _as_pair(self.delta, "delta"))
        if not 0.0 < self.xi <= 0.25:
            raise InvalidArgumentError(f"xi must lie in (0, 1/4], got {self.xi}")
        if not -1.0 <= self.gamma <= 1.0:
            raise InvalidArgumentError(f"gamma must lie in [-1, 1], got {self.gamma}")
        if self.kappa_gamma <= 0.0:
            raise InvalidArgumentError("kappa_gamma must be positive")
        if min(self.eta) <= 0.0:
            raise InvalidArgumentError("eta must be positive")
        if self.c_boundary <= 0.0:
            raise InvalidArgumentError("c_boundary must be positive")
        for name in ("tau_u", "tau_p", "tau_b"):
            if getattr(self, name) < 0.0:
                raise InvalidArgumentError(f"{name} must be nonnegative")
        if self.method not in METHODS:
            raise InvalidArgumentError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.stab not in STAB_DOMAINS:
            raise InvalidArgumentError(f"stab must be one of {STAB_DOMAINS}, got {self.stab!r}")
        if self.coupling not in COUPLINGS:
            raise InvalidArgumentError(f"coupling must be one of {COUPLINGS}")
        if self.coupling == "b" and self.method != "unstab":
            raise InvalidArgumentError("the 'b' divergence coupling is only defined "
                                       "for the unstabilized scheme")
        if not (0.0 < self.delta[0] <= 1.0 and 0.0 < self.delta[1] <= 1.0):
            raise InvalidArgumentError("delta must lie in (0, 1]")


@dataclass(frozen=True)
class BoundaryTerm:
    """Flattened segment quadrature over part of the weak boundary.

    ``eids[s]`` owns segment ``s`` (points ``offs[s]:offs[s+1]``); normals are
    outward unit normals of the domain.  ``data`` is the boundary datum
    evaluated by the right-hand side: ``data(pts, normals)`` for velocity
    data, ``data(pts)`` for pressure data.
    """

    side: int
    eids: np.ndarray
    pts: np.ndarray
    w: np.ndarray
    normals: np.ndarray
    offs: np.ndarray
    data: object = None

    @property
    def n_points(self) -> int:
        return self.pts.shape[0]


@dataclass(frozen=True)
class SystemBlocks:
    """Assembled sparse blocks; velocity rows/cols first, then pressure."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    B0: sp.csr_matrix
    S_u: sp.csr_matrix | None
    S_p: sp.csr_matrix | None
    S_b: sp.csr_matrix | None
    F_v: np.ndarray
    F_q: np.ndarray
    q_int: np.ndarray | None      # pressure means, present when the zero-mean constraint applies
    n_u: int
    n_p: int


# ---------------------------------------------------------------------------
# layout helpers

def _sides(dofmaps) -> list[tuple[int, DofMap]]:
    out = []
    for i, dm in enumerate(dofmaps):
        if dm is not None:
            out.append((i, dm))
    if not out:
        raise InvalidArgumentError("at least one side must carry a dofmap")
    return out


def _layout(dofmaps):
    n_u1 = dofmaps[0].n_udof if dofmaps[0] is not None else 0
    n_p1 = dofmaps[0].n_pdof if dofmaps[0] is not None else 0
    n_u2 = dofmaps[1].n_udof if dofmaps[1] is not None else 0
    n_p2 = dofmaps[1].n_pdof if dofmaps[1] is not None else 0
    return (0, n_u1), (0, n_p1), n_u1 + n_u2, n_p1 + n_p2


class _Coo:
    def __init__(self, shape):
        self.shape = shape
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []

    def add(self, rows, cols, vals):
        self.rows.append(np.asarray(rows, dtype=np.int64).ravel())
        self.cols.append(np.asarray(cols, dtype=np.int64).ravel())
        self.vals.append(np.asarray(vals, dtype=float).ravel())

    def add_blocks(self, row_conn, col_conn, blocks):
        """row_conn (n, r), col_conn (n, c), blocks (n, r, c)."""
        n, r = row_conn.shape
        c = col_conn.shape[1]
        self.add(np.repeat(row_conn, c, axis=1),
                 np.tile(col_conn, (1, r)).reshape(n, r * c),
                 blocks)

    def tocsr(self) -> sp.csr_matrix:
        if not self.vals:
            return sp.csr_matrix(self.shape)
        mat = sp.coo_matrix(
            (np.concatenate(self.vals),
             (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=self.shape,
        )
        return mat.tocsr()


def _zero_data(side: int, pts: np.ndarray) -> np.ndarray:
    return np.zeros(len(pts))


def _volume_pass(active: ActiveMeshes, side0: int, dm: DofMap, eta: float,
                 f=None, g=None):
    """Run the element kernel over one side's cut volume quadrature."""
    _, pts, w, offs = side_quadrature(active, side0 + 1)
    fvals = np.zeros((len(pts), 2)) if f is None else np.asarray(f(side0 + 1, pts), dtype=float)
    gvals = np.zeros(len(pts)) if g is None else np.asarray(g(side0 + 1, pts), dtype=float)
    kern = get_kernels()
    return kern.local_volume_matrices(
        dm.centers, dm.hs, dm.phix, dm.phiy, dm.divc, dm.pres, float(eta),
        pts, w, offs, fvals, gvals)


# ---------------------------------------------------------------------------
# interface traces

def _interface_tables(active: ActiveMeshes, dofmaps):
    """Normal traces of both sides' bases at interface quadrature points.

    Returns (ids, w, pts, traces, conns) where traces[i] has shape
    (Q, n_local_i) holding basis . n_stored and conns[i] maps each cut
    element's locals to global velocity indices (side offsets NOT applied).
    """
    ids, pts, w, normals, offs = interface_quadrature(active)
    counts = np.diff(offs)
    elem_of_point = np.repeat(np.arange(ids.size), counts)
    traces = []
    conns = []
    for _, dm in _sides(dofmaps):
        pos = dm.elem_pos[ids]
        if np.any(pos < 0):
            raise InvalidArgumentError("cut element missing from a side dofmap")
        ppt = pos[elem_of_point]
        xi = (pts - dm.centers[ppt]) / dm.hs[ppt][:, None]
        mono = mono_eval(xi)
        vx = np.einsum("qm,qam->qa", mono, dm.phix[ppt])
        vy = np.einsum("qm,qam->qa", mono, dm.phiy[ppt])
        traces.append(vx * normals[:, 0:1] + vy * normals[:, 1:2])
        conns.append(dm.u_conn[ppt])
    return ids, pts, w, traces, conns


# ---------------------------------------------------------------------------
# main operators

def assemble_a(active: ActiveMeshes, dofmaps, params: Params,
               u_boundary: tuple[BoundaryTerm, ...] = ()) -> sp.csr_matrix:
    """Velocity-velocity form: mass, interface coupling, boundary penalty."""
    uoff, _, n_u, _ = _layout(dofmaps)
    out = _Coo((n_u, n_u))

    for i, dm in _sides(dofmaps):
        Aloc, *_ = _volume_pass(active, i, dm, params.eta[i])
        conn = dm.u_conn + uoff[i]
        out.add_blocks(conn, conn, Aloc)

    if dofmaps[0] is not None and dofmaps[1] is not None:
        _, _, w, traces, conns = _interface_tables(active, dofmaps)
        signs = (1.0, -1.0)
        for i in range(2):
            for j in range(2):
                # kappa ({u.n},{v.n}) + xi kappa ([u.n],[v.n]); both products
                # are invariant under the stored-normal orientation
                coef = params.kappa_gamma * (0.25 + params.xi * signs[i] * signs[j])
                blocks = np.einsum("qa,q,qb->qab", traces[i], coef * w, traces[j])
                out.add_blocks(conns[i] + uoff[i], conns[j] + uoff[j], blocks)

    for bt in u_boundary:
        dm = dofmaps[bt.side - 1]
        if dm is None:
            raise InvalidArgumentError("boundary term on a side without a dofmap")
        tr, conn, lam = _boundary_traces(dm, bt, params)
        blocks = np.einsum("qa,q,qb->qab", tr, lam * bt.w, tr)
        out.add_blocks(conn + uoff[bt.side - 1], conn + uoff[bt.side - 1], blocks)

    return out.tocsr()


def _boundary_traces(dm: DofMap, bt: BoundaryTerm, params: Params):
    """Per-point normal traces, velocity connectivity, and lambda_u weights."""
    counts = np.diff(bt.offs)
    seg_of_point = np.repeat(np.arange(bt.eids.size), counts)
    pos = dm.elem_pos[bt.eids]
    if np.any(pos < 0):
        raise InvalidArgumentError("boundary element missing from the side dofmap")
    ppt = pos[seg_of_point]
    xi = (bt.pts - dm.centers[ppt]) / dm.hs[ppt][:, None]
    mono = mono_eval(xi)
    vx = np.einsum("qm,qam->qa", mono, dm.phix[ppt])
    vy = np.einsum("qm,qam->qa", mono, dm.phiy[ppt])
    tr = vx * bt.normals[:, 0:1] + vy * bt.normals[:, 1:2]
    return tr, dm.u_conn[ppt], params.c_boundary / dm.hs[ppt]


def _boundary_pressure(dm: DofMap, bt: BoundaryTerm):
    counts = np.diff(bt.offs)
    seg_of_point = np.repeat(np.arange(bt.eids.size), counts)
    ppt = dm.elem_pos[bt.eids][seg_of_point]
    xi = (bt.pts - dm.centers[ppt]) / dm.hs[ppt][:, None]
    return mono_eval(xi) @ dm.pres.T, dm.p_conn[ppt]


def assemble_b_b0(active: ActiveMeshes, dofmaps, params: Params,
                  u_boundary: tuple[BoundaryTerm, ...] = ()):
    """(B, B0): rows are pressure test functions, columns velocity."""
    uoff, poff, n_u, n_p = _layout(dofmaps)
    b0 = _Coo((n_p, n_u))
    for i, dm in _sides(dofmaps):
        _, Dloc, *_ = _volume_pass(active, i, dm, params.eta[i])
        b0.add_blocks(dm.p_conn + poff[i], dm.u_conn + uoff[i], -Dloc)
    B0 = b0.tocsr()

    extra = _Coo((n_p, n_u))
    for bt in u_boundary:
        dm = dofmaps[bt.side - 1]
        tr, conn, _ = _boundary_traces(dm, bt, params)
        pq, pconn = _boundary_pressure(dm, bt)
        blocks = np.einsum("qa,q,qb->qab", pq, bt.w, tr)
        extra.add_blocks(pconn + poff[bt.side - 1], conn + uoff[bt.side - 1], blocks)
    B = (B0 + extra.tocsr()).tocsr()
    return B, B0


def assemble_pressure_mass(active: ActiveMeshes, dofmaps) -> sp.csr_matrix:
    """Pressure mass matrix over the physical (cut) volumes."""
    _, poff, _, n_p = _layout(dofmaps)
    out = _Coo((n_p, n_p))
    for i, dm in _sides(dofmaps):
        _, _, Mploc, *_ = _volume_pass(active, i, dm, 1.0)
        conn = dm.p_conn + poff[i]
        out.add_blocks(conn, conn, Mploc)
    return out.tocsr()


def assemble_zero_mean(active: ActiveMeshes, dofmaps) -> np.ndarray:
    """Vector of pressure-basis means, the zero-mean constraint row."""
    _, poff, _, n_p = _layout(dofmaps)
    vec = np.zeros(n_p)
    for i, dm in _sides(dofmaps):
        _, _, _, qint, *_ = _volume_pass(active, i, dm, 1.0)
        np.add.at(vec, (dm.p_conn + poff[i]).ravel(), qint.ravel())
    return vec


# ---------------------------------------------------------------------------
# ghost penalties

def stab_face_sets(active: ActiveMeshes, params: Params, partition=None):
    """Face sets the penalties run over: full cut neighborhoods or macros."""
    if params.stab == "full":
        return active.side_faces(1), active.side_faces(2)
    if partition is None:
        raise InvalidArgumentError("macro stabilization needs a partition")
    return partition.stab_faces(1), partition.stab_faces(2)


def _face_jump_rows(mesh, dm: DofMap, face: int, qr_pts, orders, nF):
    """For each adjacent element and order j: matrix (q, 6) mapping local
    monomial coefficients to D^j values at the face quadrature points, plus
    the element's dof positions."""
    lo, hi = (int(e) for e in mesh.face_elems[face])
    rows = []
    for e in (lo, hi):
        pos = int(dm.elem_pos[e])
        if pos < 0:
            raise InvalidArgumentError("stabilization face touches an element "
                                       "outside the active mesh")
        h = float(dm.hs[pos])
        mono = mono_eval((qr_pts - dm.centers[pos]) / h)
        rows.append((pos, [mono @ normal_derivative_matrix(nF, h, j) for j in orders]))
    return rows


def _assemble_face_penalty(dofmaps, params, faces_by_side, kind: str) -> sp.csr_matrix:
    """Shared face loop for s_u / s_p / s_b."""
    uoff, poff, n_u, n_p = _layout(dofmaps)
    shape = {"u": (n_u, n_u), "p": (n_p, n_p), "b": (n_p, n_u)}[kind]
    out = _Coo(shape)
    for i, dm in _sides(dofmaps):
        faces = faces_by_side[i]
        if len(faces) == 0:
            continue
        mesh = dm.mesh
        khat = dm.pair.pressure_degree
        orders = range(khat + 2) if kind == "u" else range(khat + 1)
        tau = {"u": params.tau_u, "p": params.tau_p, "b": params.tau_b}[kind]
        if tau == 0.0:
            continue
        for f in faces:
            f = int(f)
            va, vb = mesh.vertices[mesh.faces[f]]
            qr = quadrature_segment(va, vb, 5)
            nF = mesh.face_normals[f]
            lo, hi = mesh.face_elems[f]
            hF = 0.5 * (mesh.diameters[lo] + mesh.diameters[hi])
            sides = _face_jump_rows(mesh, dm, f, qr.points, orders, nF)
            (plo, rows_lo), (phi, rows_hi) = sides
            if kind == "u":
                conn = np.concatenate([dm.u_conn[plo], dm.u_conn[phi]]) + uoff[i]
                loc = np.zeros((conn.size, conn.size))
                for j in orders:
                    scale = tau * hF ** (2 * j + 1)
                    for comp in (dm.phix, dm.phiy):
                        jump = np.hstack([rows_lo[j] @ comp[plo].T,
                                          -(rows_hi[j] @ comp[phi].T)])
                        loc += scale * (jump.T * qr.weights) @ jump
                out.add_blocks(conn[None, :], conn[None, :], loc[None])
            elif kind == "p":
                conn = np.concatenate([dm.p_conn[plo], dm.p_conn[phi]]) + poff[i]
                loc = np.zeros((conn.size, conn.size))
                for j in orders:
                    scale = tau * hF ** (2 * j + params.gamma)
                    jump = np.hstack([rows_lo[j] @ dm.pres.T,
                                      -(rows_hi[j] @ dm.pres.T)])
                    loc += scale * (jump.T * qr.weights) @ jump
                out.add_blocks(conn[None, :], conn[None, :], loc[None])
            else:
                rconn = np.concatenate([dm.p_conn[plo], dm.p_conn[phi]]) + poff[i]
                cconn = np.concatenate([dm.u_conn[plo], dm.u_conn[phi]]) + uoff[i]
                loc = np.zeros((rconn.size, cconn.size))
                for j in orders:
                    scale = tau * hF ** (2 * j + params.gamma)
                    jq = np.hstack([rows_lo[j] @ dm.pres.T,
                                    -(rows_hi[j] @ dm.pres.T)])
                    jdiv = np.hstack([rows_lo[j] @ dm.divc[plo].T,
                                      -(rows_hi[j] @ dm.divc[phi].T)])
                    loc += scale * (jq.T * qr.weights) @ jdiv
                out.add_blocks(rconn[None, :], cconn[None, :], loc[None])
    return out.tocsr()


def assemble_s_u(dofmaps, params: Params, faces_by_side) -> sp.csr_matrix:
    """Vector ghost penalty: normal-derivative jumps of orders 0..khat+1."""
    return _assemble_face_penalty(dofmaps, params, faces_by_side, "u")


def assemble_s_p(dofmaps, params: Params, faces_by_side) -> sp.csr_matrix:
    """Scalar pressure ghost penalty: jumps of orders 0..khat."""
    return _assemble_face_penalty(dofmaps, params, faces_by_side, "p")


def assemble_s_b(dofmaps, params: Params, faces_by_side) -> sp.csr_matrix:
    """Divergence-compatible penalty: divergence jumps against pressure jumps."""
    return _assemble_face_penalty(dofmaps, params, faces_by_side, "b")


# ---------------------------------------------------------------------------
# right-hand side

def assemble_rhs(active: ActiveMeshes, dofmaps, params: Params,
                 f=None, g=None, p_hat=None,
                 u_boundary: tuple[BoundaryTerm, ...] = (),
                 p_boundary: tuple[BoundaryTerm, ...] = ()):
    """Load vectors (F_v, F_q).

    F_v = (f, v) + (lambda_u u_B, v.n) - (p_B, v.n) + (p_hat, [v.n_stored]);
    F_q = (g, q), plus -(u_B, q) on the velocity boundary only under the
    'b' divergence coupling.
    """
    uoff, poff, n_u, n_p = _layout(dofmaps)
    F_v = np.zeros(n_u)
    F_q = np.zeros(n_p)

    for i, dm in _sides(dofmaps):
        _, _, _, _, Fvloc, Fqloc = _volume_pass(active, i, dm, params.eta[i], f=f, g=g)
        np.add.at(F_v, (dm.u_conn + uoff[i]).ravel(), Fvloc.ravel())
        np.add.at(F_q, (dm.p_conn + poff[i]).ravel(), Fqloc.ravel())

    if p_hat is not None:
        if dofmaps[0] is None or dofmaps[1] is None:
            raise InvalidArgumentError("interface pressure needs both sides")
        _, pts, w, traces, conns = _interface_tables(active, dofmaps)
        ph = np.asarray(p_hat(pts), dtype=float)
        signs = (1.0, -1.0)
        for i in range(2):
            vals = np.einsum("qa,q->qa", traces[i], signs[i] * ph * w)
            np.add.at(F_v, (conns[i] + uoff[i]).ravel(), vals.ravel())

    for bt in u_boundary:
        if bt.data is None:
            continue
        dm = dofmaps[bt.side - 1]
        tr, conn, lam = _boundary_traces(dm, bt, params)
        ub = np.asarray(bt.data(bt.pts, bt.normals), dtype=float)
        vals = np.einsum("qa,q->qa", tr, lam * ub * bt.w)
        np.add.at(F_v, (conn + uoff[bt.side - 1]).ravel(), vals.ravel())
        if params.coupling == "b":
            pq, pconn = _boundary_pressure(dm, bt)
            pvals = np.einsum("qa,q->qa", pq, -ub * bt.w)
            np.add.at(F_q, (pconn + poff[bt.side - 1]).ravel(), pvals.ravel())

    for bt in p_boundary:
        if bt.data is None:
            continue
        dm = dofmaps[bt.side - 1]
        tr, conn, _ = _boundary_traces(dm, bt, params)
        pb = np.asarray(bt.data(bt.pts), dtype=float)
        vals = np.einsum("qa,q->qa", tr, -pb * bt.w)
        np.add.at(F_v, (conn + uoff[bt.side - 1]).ravel(), vals.ravel())

    return F_v, F_q


# ---------------------------------------------------------------------------
# system composition

def compose_system(blocks: SystemBlocks, params: Params):
    """Block system, right-hand side, and layout metadata for one method."""
    n_u, n_p = blocks.n_u, blocks.n_p
    if blocks.A.shape != (n_u, n_u) or blocks.B0.shape != (n_p, n_u):
        raise InvalidArgumentError("inconsistent block dimensions")

    Buq = blocks.B if params.coupling == "b" else blocks.B0
    if params.method == "unstab":
        UL, UR, LL, LR = blocks.A, blocks.B.T, -Buq, None
    elif params.method == "m1":
        if blocks.S_u is None or blocks.S_p is None:
            raise InvalidArgumentError("method m1 needs S_u and S_p blocks")
        UL, UR, LL, LR = blocks.A + blocks.S_u, blocks.B.T, -blocks.B0, blocks.S_p
    else:
        if blocks.S_u is None or blocks.S_b is None:
            raise InvalidArgumentError("method m2 needs S_u and S_b blocks")
        UL = blocks.A + blocks.S_u
        UR = (blocks.B - blocks.S_b).T
        LL = -blocks.B0 + blocks.S_b
        LR = None

    rhs = np.concatenate([blocks.F_v, blocks.F_q])
    if blocks.q_int is not None:
        col = sp.csr_matrix(blocks.q_int.reshape(-1, 1))
        zero_u = sp.csr_matrix((n_u, 1))
        C = sp.bmat([[UL, UR, zero_u],
                     [LL, LR, col],
                     [zero_u.T, col.T, None]], format="csr")
        rhs = np.concatenate([rhs, [0.0]])
    else:
        C = sp.bmat([[UL, UR], [LL, LR]], format="csr")

    meta = {"n_u": n_u, "n_p": n_p, "constraint": blocks.q_int is not None,
            "method": params.method}
    return C, rhs, meta
