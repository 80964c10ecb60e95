"""Level sets, element classification/clipping, cut quadrature, active meshes.

Sign convention: phi > 0 outside the interface (side 1), phi < 0 inside
(side 2).  Stored interface normals point in the +grad(phi) direction, i.e.
out of side 2.

Classification uses linearized vertex values after a degeneracy rule (values
within 1e-12*h_T of zero are pushed to +1e-12*h_T).  For circles there is an
extra guard: an element whose vertices all sit outside can still be crossed
when the circle protrudes through one edge without capturing a vertex; such
elements are classified Cut but carry no chord, so clipping them (and hence
assembling on them) reports a resolve-interface failure, while active-mesh
construction still gets exact intersection fractions from the closed-form
disk/polygon area.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError, ResolveInterfaceError
from .mesh import BackgroundMesh

INSIDE1 = "Inside1"
INSIDE2 = "Inside2"
CUT = "Cut"

# internal int codes
_INSIDE1, _INSIDE2, _CUT = 1, 2, 3

DEGENERACY_REL_TOL = 1e-12
DEFAULT_VOLUME_DEGREE = 4
DEFAULT_SEGMENT_DEGREE = 5


# ---------------------------------------------------------------------------
# level sets

@dataclass(frozen=True)
class Circle:
    """phi(x) = |x - center| - radius."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgumentError(f"radius must be positive, got {self.radius}")

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - np.asarray(self.center), axis=-1) - self.radius

    def normals_at(self, x: np.ndarray) -> np.ndarray:
        """Unit +grad(phi) direction (radially outward)."""
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def shifted(self, dx: float, dy: float) -> "Circle":
        cx, cy = self.center
        return replace(self, center=(cx + dx, cy + dy))


@dataclass(frozen=True)
class HalfPlane:
    """phi(x) = a . x - b with |a| = 1 (used by tests)."""

    a: tuple[float, float]
    b: float

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a = np.asarray(self.a) / np.linalg.norm(self.a)
        return x @ a - self.b / np.linalg.norm(self.a)

    def normals_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a = np.asarray(self.a) / np.linalg.norm(self.a)
        return np.broadcast_to(a, x.shape).copy()


# ---------------------------------------------------------------------------
# quadrature tables

# Symmetric triangle rules in barycentric coordinates; weights sum to 1 and
# multiply the triangle area.
def _perm3(a: float) -> np.ndarray:
    c = 1.0 - 2.0 * a
    return np.array([[a, a, c], [a, c, a], [c, a, a]])


def _perm6(a: float, b: float) -> np.ndarray:
    c = 1.0 - a - b
    return np.array([[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]])


_TRI_RULES: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_TRI_RULES[1] = (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0]))
_TRI_RULES[2] = (_perm3(0.5), np.full(3, 1 / 3))
_TRI_RULES[4] = (
    np.vstack([_perm3(0.445948490915965), _perm3(0.091576213509771)]),
    np.concatenate([np.full(3, 0.223381589678011), np.full(3, 0.109951743655322)]),
)
_TRI_RULES[6] = (
    np.vstack([
        _perm3(0.249286745170910),
        _perm3(0.063089014491502),
        _perm6(0.310352451033785, 0.053145049844816),
    ]),
    np.concatenate([
        np.full(3, 0.116786275726379),
        np.full(3, 0.050844906370207),
        np.full(6, 0.082851075618374),
    ]),
)


def _tri_rule_for(degree: int) -> tuple[np.ndarray, np.ndarray]:
    for d in sorted(_TRI_RULES):
        if d >= degree:
            return _TRI_RULES[d]
    raise InvalidArgumentError(f"no triangle rule of degree >= {degree}")


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray   # (m, 2)
    weights: np.ndarray  # (m,)

    def measure(self) -> float:
        return float(self.weights.sum())


_EMPTY_RULE = QuadRule(points=np.zeros((0, 2)), weights=np.zeros(0))


def quadrature_triangle(coords: np.ndarray, degree: int) -> QuadRule:
    bary, w = _tri_rule_for(degree)
    e1 = coords[1] - coords[0]
    e2 = coords[2] - coords[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    if area == 0.0:
        return _EMPTY_RULE
    return QuadRule(points=bary @ coords, weights=w * area)


def quadrature_polygon(poly: np.ndarray, degree: int) -> QuadRule:
    """Rule on a convex CCW polygon via fan triangulation from vertex 0."""
    poly = np.asarray(poly, dtype=float)
    if poly.shape[0] < 3 or abs(polygon_area(poly)) < 1e-300:
        return _EMPTY_RULE
    pts, ws = [], []
    for i in range(1, poly.shape[0] - 1):
        r = quadrature_triangle(poly[[0, i, i + 1]], degree)
        pts.append(r.points)
        ws.append(r.weights)
    return QuadRule(points=np.vstack(pts), weights=np.concatenate(ws))


def quadrature_segment(a: np.ndarray, b: np.ndarray, degree: int) -> QuadRule:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length == 0.0:
        return _EMPTY_RULE
    npts = (max(degree, 1) + 2) // 2
    xi, w = np.polynomial.legendre.leggauss(npts)
    pts = a + np.outer((xi + 1.0) / 2.0, b - a)
    return QuadRule(points=pts, weights=w * (length / 2.0))


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


# ---------------------------------------------------------------------------
# exact disk/polygon intersection area (used for guard-cut fractions and as
# a high-accuracy oracle in tests)

def disk_polygon_area(poly: np.ndarray, center, radius: float) -> float:
    """Area of polygon ∩ disk, exact up to rounding (arcs included)."""
    c = np.asarray(center, dtype=float)
    R = float(radius)
    m = poly.shape[0]
    total = 0.0
    for k in range(m):
        a = poly[k] - c
        b = poly[(k + 1) % m] - c
        total += _edge_disk_contrib(a, b, R)
    return abs(total)


def _edge_disk_contrib(a: np.ndarray, b: np.ndarray, R: float) -> float:
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return 0.0
    # segment-circle intersection parameters in (0, 1)
    pb = float(a @ d) / dd
    pc = (float(a @ a) - R * R) / dd
    disc = pb * pb - pc
    ts = [0.0]
    if disc > 0.0:
        rt = np.sqrt(disc)
        for t in (-pb - rt, -pb + rt):
            if 1e-14 < t < 1.0 - 1e-14:
                ts.append(float(t))
    ts.append(1.0)
    ts = sorted(ts)
    out = 0.0
    for s, e in zip(ts[:-1], ts[1:]):
        mid = a + 0.5 * (s + e) * d
        ps = a + s * d
        pe = a + e * d
        if float(mid @ mid) <= R * R:
            out += 0.5 * (ps[0] * pe[1] - ps[1] * pe[0])
        else:
            ang = np.arctan2(ps[0] * pe[1] - ps[1] * pe[0], float(ps @ pe))
            out += 0.5 * R * R * ang
    return out


# ---------------------------------------------------------------------------
# classification

def _effective_vertex_values(values: np.ndarray, h: float) -> np.ndarray:
    tol = DEGENERACY_REL_TOL * h
    out = np.array(values, dtype=float, copy=True)
    out[np.abs(out) < tol] = tol
    return out


def _classify_codes(mesh: BackgroundMesh, levelset) -> np.ndarray:
    vvals = levelset.value(mesh.vertices)
    ev = vvals[mesh.triangles]                      # (T, 3)
    tol = DEGENERACY_REL_TOL * mesh.diameters[:, None]
    ev = np.where(np.abs(ev) < tol, tol, ev)
    pos = ev > 0.0
    codes = np.full(mesh.num_triangles, _CUT, dtype=np.int8)
    all_pos = pos.all(axis=1)
    all_neg = (~pos).all(axis=1)
    codes[all_pos] = _INSIDE1
    codes[all_neg] = _INSIDE2
    if isinstance(levelset, Circle):
        # circle may protrude through an edge of an all-outside element
        c = np.asarray(levelset.center)
        R = levelset.radius
        cand = np.flatnonzero(all_pos)
        if cand.size:
            coords = mesh.vertices[mesh.triangles[cand]]        # (m, 3, 2)
            dmin = _min_dist_center_tris(c, coords)
            margin = DEGENERACY_REL_TOL * mesh.diameters[cand]
            codes[cand[dmin < R - margin]] = _CUT
    return codes


def _min_dist_center_tris(c: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Min distance from point c to each closed triangle (vectorized)."""
    m = coords.shape[0]
    dmin = np.full(m, np.inf)
    inside = np.ones(m, dtype=bool)
    for k in range(3):
        a = coords[:, k]
        b = coords[:, (k + 1) % 3]
        d = b - a
        dd = np.einsum("ij,ij->i", d, d)
        t = np.clip(np.einsum("ij,ij->i", c - a, d) / np.where(dd == 0, 1.0, dd), 0.0, 1.0)
        q = a + t[:, None] * d
        dmin = np.minimum(dmin, np.linalg.norm(c - q, axis=1))
        cross = d[:, 0] * (c[1] - a[:, 1]) - d[:, 1] * (c[0] - a[:, 0])
        inside &= cross >= 0.0
    dmin[inside] = 0.0
    return dmin


def classify_element(mesh: BackgroundMesh, t: int, levelset) -> str:
    """One of Inside1/Inside2/Cut for element t."""
    code = _classify_codes(mesh, levelset)[t]
    return {_INSIDE1: INSIDE1, _INSIDE2: INSIDE2, _CUT: CUT}[code]


# ---------------------------------------------------------------------------
# clipping

@dataclass(frozen=True)
class CutGeometry:
    classification: str
    poly1: np.ndarray | None      # CCW sub-polygon on phi > 0 side
    poly2: np.ndarray | None      # CCW sub-polygon on phi < 0 side
    segment: np.ndarray | None    # (2, 2) chord endpoints
    normal: np.ndarray | None     # unit, +grad(phi) direction
    qr1: QuadRule | None
    qr2: QuadRule | None
    qr_iface: QuadRule | None

    @property
    def area1(self) -> float:
        return 0.0 if self.poly1 is None else polygon_area(self.poly1)

    @property
    def area2(self) -> float:
        return 0.0 if self.poly2 is None else polygon_area(self.poly2)


def clip_triangle(coords: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a CCW triangle by linearly interpolated vertex values.

    Returns (positive polygon, negative polygon, chord endpoints (2, 2)).
    values must change sign (after any degeneracy handling by the caller).
    """
    pos: list[np.ndarray] = []
    neg: list[np.ndarray] = []
    roots: list[np.ndarray] = []
    for k in range(3):
        j = (k + 1) % 3
        va, vb = float(values[k]), float(values[j])
        (pos if va > 0.0 else neg).append(coords[k])
        if (va > 0.0) != (vb > 0.0):
            s = va / (va - vb)
            r = coords[k] + s * (coords[j] - coords[k])
            pos.append(r)
            neg.append(r)
            roots.append(r)
    if len(roots) != 2:
        raise InvalidArgumentError("values do not change sign across the triangle")
    return np.asarray(pos), np.asarray(neg), np.asarray(roots)


def clip_element(
    mesh: BackgroundMesh,
    t: int,
    levelset,
    volume_degree: int = DEFAULT_VOLUME_DEGREE,
    segment_degree: int = DEFAULT_SEGMENT_DEGREE,
) -> CutGeometry:
    """Clip a Cut element into per-side polygons, chord and quadrature."""
    coords = mesh.triangle_coords(t)
    h = float(mesh.diameters[t])
    vals = _effective_vertex_values(levelset.value(coords), h)
    pos = vals > 0.0
    if pos.all() or (~pos).all():
        raise ResolveInterfaceError(
            f"element {t} intersects the interface without a vertex sign change; refine the mesh"
        )
    if isinstance(levelset, Circle):
        _check_double_crossing(coords, vals, levelset, h)
    poly1, poly2, chord = clip_triangle(coords, vals)
    mid = 0.5 * (chord[0] + chord[1])
    tang = chord[1] - chord[0]
    nrm = np.array([tang[1], -tang[0]])
    nrm /= np.linalg.norm(nrm)
    if float(nrm @ levelset.normals_at(mid)) < 0.0:
        nrm = -nrm
    return CutGeometry(
        classification=CUT,
        poly1=poly1,
        poly2=poly2,
        segment=chord,
        normal=nrm,
        qr1=quadrature_polygon(poly1, volume_degree),
        qr2=quadrature_polygon(poly2, volume_degree),
        qr_iface=quadrature_segment(chord[0], chord[1], segment_degree),
    )


def _check_double_crossing(coords, vals, circle: Circle, h: float) -> None:
    # an edge whose endpoints both sit outside is double-crossed when the
    # circle has two intersection parameters strictly inside the segment
    # (endpoints on the circle produce roots at 0/1: a chord, not a crossing)
    c = np.asarray(circle.center)
    R = circle.radius
    for k in range(3):
        j = (k + 1) % 3
        if vals[k] > 0.0 and vals[j] > 0.0:
            a = coords[k] - c
            d = coords[j] - coords[k]
            qa = float(d @ d)
            qb = float(a @ d)
            qc = float(a @ a) - R * R
            disc = qb * qb - qa * qc
            if disc <= 0.0:
                continue
            rt = np.sqrt(disc)
            t1 = (-qb - rt) / qa
            t2 = (-qb + rt) / qa
            if 1e-9 < t1 < 1.0 - 1e-9 and 1e-9 < t2 < 1.0 - 1e-9:
                raise ResolveInterfaceError(
                    "circle crosses one element edge twice; refine the mesh"
                )


# ---------------------------------------------------------------------------
# active meshes

@dataclass(frozen=True)
class ActiveMeshes:
    mesh: BackgroundMesh
    levelset: object
    codes: np.ndarray                 # (T,) int8 classification
    elems: tuple[np.ndarray, np.ndarray]   # T_{h,1}, T_{h,2} (sorted)
    cut_elems: np.ndarray             # G_h (sorted)
    guard_cut: np.ndarray             # Cut without a chord (no assembly possible)
    faces: tuple[np.ndarray, np.ndarray]   # F_{h,1}, F_{h,2} (sorted)
    frac: np.ndarray                  # (T, 2) intersection fractions
    cut_geoms: dict[int, CutGeometry]
    volume_degree: int
    segment_degree: int

    def classification(self, t: int) -> str:
        return {_INSIDE1: INSIDE1, _INSIDE2: INSIDE2, _CUT: CUT}[int(self.codes[t])]

    def side_elems(self, side: int) -> np.ndarray:
        return self.elems[side - 1]

    def side_faces(self, side: int) -> np.ndarray:
        return self.faces[side - 1]


def build_active_meshes(
    mesh: BackgroundMesh,
    levelset,
    volume_degree: int = DEFAULT_VOLUME_DEGREE,
    segment_degree: int = DEFAULT_SEGMENT_DEGREE,
) -> ActiveMeshes:
    codes = _classify_codes(mesh, levelset)
    cut = np.flatnonzero(codes == _CUT)
    frac = np.zeros((mesh.num_triangles, 2))
    frac[codes == _INSIDE1, 0] = 1.0
    frac[codes == _INSIDE2, 1] = 1.0

    cut_geoms: dict[int, CutGeometry] = {}
    guard: list[int] = []
    for t in cut:
        t = int(t)
        coords = mesh.triangle_coords(t)
        vals = _effective_vertex_values(levelset.value(coords), float(mesh.diameters[t]))
        if (vals > 0.0).all():
            # circle protrudes through an edge without a vertex sign change;
            # fractions come from the exact disk/polygon area instead, and
            # clipping (hence assembly) on this mesh is impossible
            a2 = disk_polygon_area(coords, levelset.center, levelset.radius)
            area = float(mesh.areas[t])
            frac[t] = (1.0 - a2 / area, a2 / area)
            guard.append(t)
            continue
        cg = clip_element(mesh, t, levelset, volume_degree, segment_degree)
        area = float(mesh.areas[t])
        frac[t] = (cg.area1 / area, cg.area2 / area)
        cut_geoms[t] = cg
    # sliver polygons can round to zero area; fractions stay in [0,1] and
    # every cut element belongs to both active meshes by construction
    np.clip(frac, 0.0, 1.0, out=frac)

    elems1 = np.flatnonzero((codes == _INSIDE1) | (codes == _CUT))
    elems2 = np.flatnonzero((codes == _INSIDE2) | (codes == _CUT))

    in1 = np.zeros(mesh.num_triangles, dtype=bool)
    in1[elems1] = True
    in2 = np.zeros(mesh.num_triangles, dtype=bool)
    in2[elems2] = True
    is_cut = codes == _CUT

    faces_by_side = []
    for member in (in1, in2):
        fi = mesh.interior_faces
        lo, hi = mesh.face_elems[fi, 0], mesh.face_elems[fi, 1]
        keep = member[lo] & member[hi] & (is_cut[lo] | is_cut[hi])
        faces_by_side.append(fi[keep])

    return ActiveMeshes(
        mesh=mesh,
        levelset=levelset,
        codes=codes,
        elems=(elems1, elems2),
        cut_elems=cut,
        guard_cut=np.asarray(guard, dtype=np.int64),
        faces=(faces_by_side[0], faces_by_side[1]),
        frac=frac,
        cut_geoms=cut_geoms,
        volume_degree=volume_degree,
        segment_degree=segment_degree,
    )


# ---------------------------------------------------------------------------
# flattened quadrature collections consumed by assembly

def _require_resolved(active: ActiveMeshes) -> None:
    if active.guard_cut.size:
        raise ResolveInterfaceError(
            f"{active.guard_cut.size} element(s) are crossed without a vertex sign change; refine the mesh"
        )


def side_quadrature(active: ActiveMeshes, side: int, degree: int | None = None):
    """Volume quadrature over every element of T_{h,side}.

    Returns (elem_ids, points, weights, offsets) with offsets of length
    len(elem_ids)+1 delimiting each element's points.
    """
    _require_resolved(active)
    degree = active.volume_degree if degree is None else degree
    mesh = active.mesh
    ids = active.side_elems(side)
    pts_list, w_list, offs = [], [], [0]
    count = 0
    reuse_default = degree == active.volume_degree
    for t in ids:
        t = int(t)
        if active.codes[t] == _CUT:
            cg = active.cut_geoms[t]
            if reuse_default:
                qr = cg.qr1 if side == 1 else cg.qr2
            else:
                poly = cg.poly1 if side == 1 else cg.poly2
                qr = quadrature_polygon(poly, degree)
        else:
            qr = quadrature_triangle(mesh.triangle_coords(t), degree)
        pts_list.append(qr.points)
        w_list.append(qr.weights)
        count += qr.weights.size
        offs.append(count)
    pts = np.vstack(pts_list) if pts_list else np.zeros((0, 2))
    ws = np.concatenate(w_list) if w_list else np.zeros(0)
    return ids, pts, ws, np.asarray(offs, dtype=np.int64)


def interface_quadrature(active: ActiveMeshes, degree: int | None = None):
    """Segment quadrature over all interface chords.

    Returns (elem_ids, points, weights, normals, offsets); normals are the
    per-chord +grad(phi) unit normals repeated per point.
    """
    _require_resolved(active)
    degree = active.segment_degree if degree is None else degree
    ids, pts_list, w_list, n_list, offs = [], [], [], [], [0]
    count = 0
    for t in active.cut_elems:
        t = int(t)
        cg = active.cut_geoms[t]
        qr = cg.qr_iface if degree == active.segment_degree else quadrature_segment(
            cg.segment[0], cg.segment[1], degree)
        ids.append(t)
        pts_list.append(qr.points)
        w_list.append(qr.weights)
        n_list.append(np.broadcast_to(cg.normal, qr.points.shape))
        count += qr.weights.size
        offs.append(count)
    pts = np.vstack(pts_list) if pts_list else np.zeros((0, 2))
    ws = np.concatenate(w_list) if w_list else np.zeros(0)
    nrm = np.vstack(n_list) if n_list else np.zeros((0, 2))
    return np.asarray(ids, dtype=np.int64), pts, ws, nrm, np.asarray(offs, dtype=np.int64)


def boundary_side_quadrature(active: ActiveMeshes, side: int, face_ids: np.ndarray,
                             degree: int | None = None):
    """Quadrature on box-boundary faces restricted to one side's subdomain.

    Faces of cut elements are split at the linear level-set root.  Returns
    (face_ids_out, elem_ids, points, weights, normals, offsets); normals are
    the outward box normals of each face.
    """
    _require_resolved(active)
    degree = active.segment_degree if degree is None else degree
    mesh = active.mesh
    want = _INSIDE1 if side == 1 else _INSIDE2
    fout, eout, pts_list, w_list, n_list, offs = [], [], [], [], [], [0]
    count = 0
    for f in face_ids:
        f = int(f)
        t = int(mesh.face_elems[f, 0])
        code = int(active.codes[t])
        a = mesh.vertices[mesh.faces[f, 0]]
        b = mesh.vertices[mesh.faces[f, 1]]
        if code == _CUT:
            vals = _effective_vertex_values(
                np.array([active.levelset.value(a), active.levelset.value(b)]),
                float(mesh.diameters[t]))
            sa, sb = vals[0] > 0, vals[1] > 0
            if sa != sb:
                s = float(vals[0] / (vals[0] - vals[1]))
                r = a + s * (b - a)
                seg = (a, r) if (sa == (side == 1)) else (r, b)
            elif sa == (side == 1):
                seg = (a, b)
            else:
                continue
        elif code == want:
            seg = (a, b)
        else:
            continue
        qr = quadrature_segment(seg[0], seg[1], degree)
        if qr.weights.size == 0:
            continue
        fout.append(f)
        eout.append(t)
        pts_list.append(qr.points)
        w_list.append(qr.weights)
        n_list.append(np.broadcast_to(mesh.face_normals[f], qr.points.shape))
        count += qr.weights.size
        offs.append(count)
    pts = np.vstack(pts_list) if pts_list else np.zeros((0, 2))
    ws = np.concatenate(w_list) if w_list else np.zeros(0)
    nrm = np.vstack(n_list) if n_list else np.zeros((0, 2))
    return (np.asarray(fout, dtype=np.int64), np.asarray(eout, dtype=np.int64),
            pts, ws, nrm, np.asarray(offs, dtype=np.int64))
