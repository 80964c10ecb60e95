from __future__ import annotations

import numpy as np
import pytest

from cutdarcy.errors import InvalidArgumentError
from cutdarcy.geometry import Circle, HalfPlane, build_active_meshes, side_quadrature
from cutdarcy.kernels import active_lane, get_kernels
from cutdarcy.kernels.numpy_impl import segment_sum
from cutdarcy.mesh import build_structured_mesh
from cutdarcy.spaces import ElementPair, build_dofmap, pressure_values, velocity_values

ALL_KINDS = ("RT0", "BDM1", "RT1")


def cut_active(n=8):
    mesh = build_structured_mesh(n)
    return build_active_meshes(mesh, Circle(center=(0.5, 0.5), radius=0.25))


def volume_inputs(dm, active, side, rng):
    _, pts, w, offs = side_quadrature(active, side)
    fvals = rng.standard_normal((len(pts), 2))
    gvals = rng.standard_normal(len(pts))
    return (dm.centers, dm.hs, dm.phix, dm.phiy, dm.divc, dm.pres, 1.0,
            pts, w, offs, fvals, gvals)


# ---------------------------------------------------------------------------
# segment_sum

def test_segment_sum_against_loop_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        nseg = int(rng.integers(1, 12))
        counts = rng.integers(0, 5, nseg)   # zeros allowed, incl. trailing
        offs = np.concatenate([[0], np.cumsum(counts)])
        vals = rng.standard_normal((offs[-1], 3))
        got = segment_sum(vals, offs)
        want = np.stack([vals[offs[i]:offs[i + 1]].sum(axis=0) for i in range(nseg)])
        assert np.allclose(got, want, atol=1e-14)


def test_segment_sum_empty_cases():
    offs = np.array([0, 0, 0, 0])
    assert np.array_equal(segment_sum(np.zeros((0, 2)), offs), np.zeros((3, 2)))
    # trailing empty segment after data
    vals = np.arange(6.0).reshape(3, 2)
    offs = np.array([0, 3, 3])
    got = segment_sum(vals, offs)
    assert np.allclose(got[0], vals.sum(axis=0))
    assert np.allclose(got[1], 0.0)
    # leading empty
    offs = np.array([0, 0, 3])
    got = segment_sum(vals, offs)
    assert np.allclose(got[0], 0.0)
    assert np.allclose(got[1], vals.sum(axis=0))


# ---------------------------------------------------------------------------
# lane selection

def test_default_lane_is_numba(monkeypatch):
    monkeypatch.delenv("CUTDARCY_KERNELS", raising=False)
    assert active_lane() == "numba"
    assert get_kernels().LANE == "numba"


def test_env_flag_switches_to_numpy(monkeypatch):
    monkeypatch.setenv("CUTDARCY_KERNELS", "numpy")
    assert active_lane() == "numpy"


def test_bad_env_flag_raises(monkeypatch):
    monkeypatch.setenv("CUTDARCY_KERNELS", "fortran")
    with pytest.raises(InvalidArgumentError):
        get_kernels()


def test_explicit_lane_request():
    assert get_kernels("numpy").LANE == "numpy"
    assert get_kernels("numba").LANE == "numba"
    with pytest.raises(InvalidArgumentError):
        get_kernels("cuda")


# ---------------------------------------------------------------------------
# lane equality

@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("side", (1, 2))
def test_volume_matrices_lane_equality(kind, side):
    active = cut_active()
    dm = build_dofmap(active, side, ElementPair(kind))
    rng = np.random.default_rng(1)
    args = volume_inputs(dm, active, side, rng)
    out_np = get_kernels("numpy").local_volume_matrices(*args)
    out_nb = get_kernels("numba").local_volume_matrices(*args)
    for a, b in zip(out_np, out_nb):
        scale = max(np.max(np.abs(a)), 1.0)
        assert np.max(np.abs(a - b)) < 1e-13 * scale


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_eval_fields_lane_equality(kind):
    active = cut_active()
    dm = build_dofmap(active, 1, ElementPair(kind))
    rng = np.random.default_rng(2)
    uvec = rng.standard_normal(dm.n_udof)
    pvec = rng.standard_normal(dm.n_pdof)
    npts = 200
    pos = rng.integers(0, dm.n_elems, npts)
    t = rng.dirichlet(np.ones(3), npts)
    coords = dm.mesh.vertices[dm.mesh.triangles[dm.elems[pos]]]
    pts = np.einsum("nb,nbj->nj", t, coords)
    args = (dm.centers, dm.hs, dm.phix, dm.phiy, dm.divc, dm.pres,
            pos, uvec[dm.u_conn[pos]], pvec[dm.p_conn[pos]], pts)
    v1, d1, p1 = get_kernels("numpy").eval_fields(*args)
    v2, d2, p2 = get_kernels("numba").eval_fields(*args)
    assert np.max(np.abs(v1 - v2)) < 1e-13 * max(np.max(np.abs(v1)), 1.0)
    assert np.max(np.abs(d1 - d2)) < 1e-13 * max(np.max(np.abs(d1)), 1.0)
    assert np.max(np.abs(p1 - p2)) < 1e-13 * max(np.max(np.abs(p1)), 1.0)


def test_eval_fields_matches_space_evaluation():
    active = cut_active()
    dm = build_dofmap(active, 2, ElementPair("RT1"))
    rng = np.random.default_rng(3)
    uvec = rng.standard_normal(dm.n_udof)
    pvec = rng.standard_normal(dm.n_pdof)
    pos = rng.integers(0, dm.n_elems, 100)
    t = rng.dirichlet(np.ones(3), 100)
    eids = dm.elems[pos]
    coords = dm.mesh.vertices[dm.mesh.triangles[eids]]
    pts = np.einsum("nb,nbj->nj", t, coords)
    vals, divs, pvals = get_kernels("numpy").eval_fields(
        dm.centers, dm.hs, dm.phix, dm.phiy, dm.divc, dm.pres,
        pos, uvec[dm.u_conn[pos]], pvec[dm.p_conn[pos]], pts)
    v_ref, d_ref = velocity_values(dm, uvec, eids, pts)
    p_ref = pressure_values(dm, pvec, eids, pts)
    assert np.allclose(vals, v_ref, atol=1e-13)
    assert np.allclose(divs, d_ref, atol=1e-13)
    assert np.allclose(pvals, p_ref, atol=1e-13)


# ---------------------------------------------------------------------------
# correctness oracles

@pytest.mark.parametrize("lane", ("numpy", "numba"))
def test_divergence_rows_equal_signed_face_lengths(lane):
    # for RT0 on full elements, int_T div(phi_b) = +-|F_b| by the divergence
    # theorem (sign = whether the global face normal points out of T)
    mesh = build_structured_mesh(3)
    active = build_active_meshes(mesh, HalfPlane(a=(1.0, 0.0), b=-1000.0))
    dm = build_dofmap(active, 1, ElementPair("RT0"))
    _, pts, w, offs = side_quadrature(active, 1)
    Z2 = np.zeros((len(pts), 2))
    Z1 = np.zeros(len(pts))
    _, Dm, _, _, _, _ = get_kernels(lane).local_volume_matrices(
        dm.centers, dm.hs, dm.phix, dm.phiy, dm.divc, dm.pres, 1.0,
        pts, w, offs, Z2, Z1)
    for e in range(dm.n_elems):
        t = int(dm.elems[e])
        for k in range(3):
            f = int(mesh.elem_faces[t, k])
            sign = 1.0 if mesh.face_elems[f, 0] == t else -1.0
            assert Dm[e, 0, k] == pytest.approx(sign * mesh.face_lengths[f], rel=1e-12)


@pytest.mark.parametrize("lane", ("numpy", "numba"))
def test_p0_rows_give_areas_and_loads(lane):
    active = cut_active()
    dm = build_dofmap(active, 2, ElementPair("BDM1"))
    _, pts, w, offs = side_quadrature(active, 2)
    fvals = np.tile([2.0, -1.0], (len(pts), 1))
    gvals = np.full(len(pts), -64.0)
    A, _, Mp, qint, Fv, Fq = get_kernels(lane).local_volume_matrices(
        dm.centers, dm.hs, dm.phix, dm.phiy, dm.divc, dm.pres, 1.0,
        pts, w, offs, fvals, gvals)
    cut_areas = active.frac[dm.elems, 1] * active.mesh.areas[dm.elems]
    assert np.allclose(qint[:, 0], cut_areas, atol=1e-14)
    assert np.allclose(Mp[:, 0, 0], cut_areas, atol=1e-14)
    assert np.allclose(Fq[:, 0], -64.0 * cut_areas, atol=1e-12)
    # A is symmetric PSD elementwise
    assert np.max(np.abs(A - A.transpose(0, 2, 1))) < 1e-13
    for e in range(0, dm.n_elems, 7):
        evals = np.linalg.eigvalsh(A[e])
        assert evals.min() > -1e-12


def test_constant_field_energy():
    # interpolate u = (1, 0); then u^T A u = eta * |Omega_{h,2}|
    active = cut_active()
    from cutdarcy.spaces import interpolate
    dm = build_dofmap(active, 2, ElementPair("RT0"))
    vec = interpolate(lambda p: np.tile([1.0, 0.0], (len(p), 1)), dm)
    _, pts, w, offs = side_quadrature(active, 2)
    Z2 = np.zeros((len(pts), 2))
    Z1 = np.zeros(len(pts))
    A, _, _, _, _, _ = get_kernels("numba").local_volume_matrices(
        dm.centers, dm.hs, dm.phix, dm.phiy, dm.divc, dm.pres, 3.0,
        pts, w, offs, Z2, Z1)
    total = 0.0
    for e in range(dm.n_elems):
        loc = vec[dm.u_conn[e]]
        total += loc @ A[e] @ loc
    area = np.sum(active.frac[dm.elems, 1] * active.mesh.areas[dm.elems])
    assert total == pytest.approx(3.0 * area, rel=1e-12)
