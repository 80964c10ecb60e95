from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from cutdarcy.errors import InvalidArgumentError, UnreachableElementError
from cutdarcy.geometry import Circle, HalfPlane, build_active_meshes
from cutdarcy.macro import build_macro_partition, classify_large, dump_macro
from cutdarcy.mesh import build_structured_mesh


def ex1_active(n):
    return build_active_meshes(build_structured_mesh(n), Circle(center=(0.5, 0.5), radius=0.25))


# ---------------------------------------------------------------------------
# classify_large

def test_classify_large_examples():
    assert classify_large(1.0, 0.25)
    assert not classify_large(0.1, 0.25)
    assert classify_large(0.25, 0.25)  # threshold is inclusive


def test_classify_large_validation():
    with pytest.raises(InvalidArgumentError):
        classify_large(1.5, 0.25)
    with pytest.raises(InvalidArgumentError):
        classify_large(0.5, 0.0)
    with pytest.raises(InvalidArgumentError):
        classify_large(0.5, 1.5)


# ---------------------------------------------------------------------------
# aggregation

def test_tiny_delta_gives_singletons():
    # every fraction is strictly positive here, so delta -> 0+ makes every
    # element large: all macros are singletons and no face is stabilized
    mesh = build_structured_mesh(4)
    active = build_active_meshes(mesh, HalfPlane(a=(1.0, 0.0), b=0.55))
    part = build_macro_partition(active, 1e-12, 1e-12)
    for side in (1, 2):
        elems = active.side_elems(side)
        root = part.side_roots(side)
        assert np.array_equal(root[elems], elems)
        assert all(v.size == 1 for v in part.side_members(side).values())
        assert part.stab_faces(side).size == 0


def test_two_element_aggregation():
    # half-plane y > 0.9: lower triangle has side-1 fraction 0.01 (small),
    # upper triangle 0.19 (large at delta = 0.15) -> one macro, one face
    mesh = build_structured_mesh(1)
    active = build_active_meshes(mesh, HalfPlane(a=(0.0, 1.0), b=0.9))
    assert active.frac[0, 0] == pytest.approx(0.01)
    assert active.frac[1, 0] == pytest.approx(0.19)
    part = build_macro_partition(active, 0.15, 0.15)
    root1 = part.side_roots(1)
    assert root1[0] == 1 and root1[1] == 1
    assert np.array_equal(part.side_members(1)[1], [0, 1])
    faces1 = part.side_interior_faces(1)[1]
    assert faces1.size == 1
    lo, hi = mesh.face_elems[faces1[0]]
    assert (lo, hi) == (0, 1)
    # side 2 fractions 0.99 / 0.81: both large, singleton macros
    assert part.stab_faces(2).size == 0


def oracle_bfs(active, side, delta):
    """Dict/queue reimplementation of the same aggregation rule."""
    mesh = active.mesh
    elems = [int(t) for t in active.side_elems(side)]
    member = set(elems)
    frac = {t: float(active.frac[t, side - 1]) for t in elems}
    nbrs = {t: [] for t in elems}
    for f in mesh.interior_faces:
        a, b = (int(x) for x in mesh.face_elems[f])
        if a in member and b in member:
            nbrs[a].append(b)
            nbrs[b].append(a)
    root = {t: t for t in elems if frac[t] >= delta}
    frontier = deque(sorted(root))
    pending = [t for t in elems if t not in root]
    while pending:
        nxt = {}
        for t in pending:
            cands = [nb for nb in nbrs[t] if nb in root]
            if cands:
                cands.sort(key=lambda nb: (-frac[nb], nb))
                nxt[t] = root[cands[0]]
        if not nxt:
            raise UnreachableElementError("stuck")
        root.update(nxt)
        pending = [t for t in pending if t not in nxt]
    return root


@pytest.mark.parametrize("side", (1, 2))
def test_matches_independent_bfs_oracle(side):
    active = ex1_active(16)
    part = build_macro_partition(active, 0.25, 0.25)
    want = oracle_bfs(active, side, 0.25)
    root = part.side_roots(side)
    got = {int(t): int(root[t]) for t in active.side_elems(side)}
    assert got == want
    # some aggregation actually happened
    small = [t for t, r in got.items() if r != t]
    assert len(small) > 0


def test_partition_invariants():
    active = ex1_active(8)
    part = build_macro_partition(active, 0.25, 0.25)
    mesh = active.mesh
    for side in (1, 2):
        elems = active.side_elems(side)
        members = part.side_members(side)
        allm = np.sort(np.concatenate(list(members.values())))
        assert np.array_equal(allm, elems)          # union, disjoint by count
        root = part.side_roots(side)
        for r, mem in members.items():
            assert active.frac[r, side - 1] >= 0.25
            assert np.all(root[mem] == r)
            # face-connectivity of the macro
            memset = set(int(t) for t in mem)
            seen = {r}
            queue = deque([r])
            adj = {t: [] for t in memset}
            for f in mesh.interior_faces:
                a, b = (int(x) for x in mesh.face_elems[f])
                if a in memset and b in memset:
                    adj[a].append(b)
                    adj[b].append(a)
            while queue:
                t = queue.popleft()
                for nb in adj[t]:
                    if nb not in seen:
                        seen.add(nb)
                        queue.append(nb)
            assert seen == memset
        # interior faces join same-root pairs
        for r, faces in part.side_interior_faces(side).items():
            for f in faces:
                lo, hi = mesh.face_elems[f]
                assert root[lo] == r and root[hi] == r


def test_stab_face_monotonicity_in_delta():
    active = ex1_active(8)
    counts = []
    for delta in (1e-9, 0.1, 0.25, 0.4, 0.6):
        part = build_macro_partition(active, delta, delta)
        counts.append(part.stab_faces(1).size + part.stab_faces(2).size)
    assert counts == sorted(counts)


def test_macro_faces_subset_of_cut_neighborhood_faces():
    active = ex1_active(16)
    part = build_macro_partition(active, 0.25, 0.25)
    for side in (1, 2):
        full = set(int(f) for f in active.side_faces(side))
        macro = set(int(f) for f in part.stab_faces(side))
        assert macro <= full


def test_unreachable_small_elements():
    # side 2 is a thin strip of cut elements only: no large element exists
    mesh = build_structured_mesh(2)
    active = build_active_meshes(mesh, HalfPlane(a=(1.0, 0.0), b=0.1))
    assert np.all(active.frac[active.side_elems(2), 1] < 0.9)
    with pytest.raises(UnreachableElementError):
        build_macro_partition(active, 0.25, 0.9)


def test_delta_validation():
    active = ex1_active(4)
    with pytest.raises(InvalidArgumentError):
        build_macro_partition(active, 0.0, 0.25)
    with pytest.raises(InvalidArgumentError):
        build_macro_partition(active, 0.25, 1.01)


def test_dump_macro_format():
    active = ex1_active(4)
    part = build_macro_partition(active, 0.25, 0.25)
    text = dump_macro(part, 1)
    lines = text.strip().splitlines()
    assert lines[0] == "element,root"
    assert "face,root" in lines
    n_elem_rows = lines.index("face,root") - 1
    assert n_elem_rows == active.side_elems(1).size
