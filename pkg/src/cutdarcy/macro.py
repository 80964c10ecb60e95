"""Macro-element aggregation on active meshes.

Elements with a large intersection fraction (``frac >= delta``) become macro
roots; every small element is attached to a nearby root by breadth-first
rounds over face adjacency.  Ghost-penalty stabilization can then be
restricted to faces interior to a macro, which empties entirely when every
element is large.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UnreachableElementError
from .geometry import ActiveMeshes


def classify_large(fraction: float, delta: float) -> bool:
    """True when an intersection fraction meets the threshold (inclusive)."""
    if not 0.0 <= fraction <= 1.0:
        raise InvalidArgumentError(f"fraction must lie in [0, 1], got {fraction}")
    if not 0.0 < delta <= 1.0:
        raise InvalidArgumentError(f"delta must lie in (0, 1], got {delta}")
    return fraction >= delta


@dataclass(frozen=True)
class MacroPartition:
    """Per-side macro aggregation: root labels, member lists, interior faces."""

    deltas: tuple[float, float]
    roots: tuple[np.ndarray, np.ndarray]   # (T,) root element id, -1 off-mesh
    members: tuple[dict[int, np.ndarray], dict[int, np.ndarray]]
    interior_faces: tuple[dict[int, np.ndarray], dict[int, np.ndarray]]

    def side_roots(self, side: int) -> np.ndarray:
        return self.roots[side - 1]

    def side_members(self, side: int) -> dict[int, np.ndarray]:
        return self.members[side - 1]

    def side_interior_faces(self, side: int) -> dict[int, np.ndarray]:
        return self.interior_faces[side - 1]

    def stab_faces(self, side: int) -> np.ndarray:
        """All macro-interior faces of one side, ascending."""
        lists = [f for f in self.interior_faces[side - 1].values() if f.size]
        if not lists:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(lists))


def _aggregate_side(active: ActiveMeshes, side: int, delta: float):
    mesh = active.mesh
    elems = active.side_elems(side)
    frac = active.frac[:, side - 1]
    member = np.zeros(mesh.num_triangles, dtype=bool)
    member[elems] = True

    # interior faces with both neighbors on this active mesh
    fi = mesh.interior_faces
    lo, hi = mesh.face_elems[fi, 0], mesh.face_elems[fi, 1]
    keep = member[lo] & member[hi]
    adj_faces = fi[keep]
    lo, hi = lo[keep], hi[keep]
    nbrs: dict[int, list[int]] = {int(t): [] for t in elems}
    for a, b in zip(lo, hi):
        nbrs[int(a)].append(int(b))
        nbrs[int(b)].append(int(a))

    root = np.full(mesh.num_triangles, -1, dtype=np.int64)
    large = elems[frac[elems] >= delta]
    root[large] = large
    unassigned = [int(t) for t in elems if root[t] < 0]

    while unassigned:
        joins = []
        for t in unassigned:
            cands = [nb for nb in nbrs[t] if root[nb] >= 0]
            if cands:
                best = min(cands, key=lambda nb: (-frac[nb], nb))
                joins.append((t, int(root[best])))
        if not joins:
            raise UnreachableElementError(
                f"{len(unassigned)} element(s) on side {side} cannot reach a "
                f"large element (delta={delta}); lower delta or refine"
            )
        for t, r in joins:
            root[t] = r
        assigned = {t for t, _ in joins}
        unassigned = [t for t in unassigned if t not in assigned]

    members: dict[int, np.ndarray] = {}
    for r in np.unique(root[elems]):
        members[int(r)] = elems[root[elems] == r]

    same = root[lo] == root[hi]
    interior: dict[int, np.ndarray] = {int(r): np.empty(0, dtype=np.int64) for r in members}
    for r in np.unique(root[lo[same]]):
        interior[int(r)] = np.sort(adj_faces[same & (root[lo] == r)])
    return root, members, interior


def build_macro_partition(active: ActiveMeshes, delta_1: float = 0.25,
                          delta_2: float = 0.25) -> MacroPartition:
    for d in (delta_1, delta_2):
        if not 0.0 < d <= 1.0:
            raise InvalidArgumentError(f"delta must lie in (0, 1], got {d}")
    r1, m1, f1 = _aggregate_side(active, 1, delta_1)
    r2, m2, f2 = _aggregate_side(active, 2, delta_2)
    return MacroPartition(
        deltas=(delta_1, delta_2),
        roots=(r1, r2),
        members=(m1, m2),
        interior_faces=(f1, f2),
    )


def dump_macro(partition: MacroPartition, side: int) -> str:
    """CSV-style debug dump: element->root rows then face->root rows."""
    lines = ["element,root"]
    root = partition.side_roots(side)
    for t in np.flatnonzero(root >= 0):
        lines.append(f"{t},{root[t]}")
    lines.append("face,root")
    for r, faces in sorted(partition.side_interior_faces(side).items()):
        for f in faces:
            lines.append(f"{f},{r}")
    return "\n".join(lines) + "\n"
