"""Pure-numpy element kernels (vectorized fallback lane).

Per-element quadrature collections arrive flattened: `pts`/`w` hold all
points back to back, and `offs[e]:offs[e+1]` is element e's slice.  Empty
slices are legal (a cut element whose polygon on one side degenerates to a
sliver of zero area contributes no points) and must produce zero rows, which
is why the segment reduction below cannot call ``np.add.reduceat`` directly.
"""

from __future__ import annotations

import numpy as np

LANE = "numpy"

_BLOCK = 4096  # elements per chunk; bounds the (Q, nloc, nloc) temporaries


def segment_sum(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Sum `values` rows into ``len(offsets) - 1`` contiguous segments.

    Empty segments (including trailing ones) yield zero rows.
    """
    n = offsets.size - 1
    out = np.zeros((n,) + values.shape[1:], dtype=values.dtype)
    nonempty = offsets[:-1] < offsets[1:]
    if np.any(nonempty):
        starts = offsets[:-1][nonempty]
        out[nonempty] = np.add.reduceat(values, starts, axis=0)
        # reduceat runs each start to the next start; the final reduction
        # runs to the end of values, which is exactly the last segment's end
        # because the segments partition the rows in order.
    return out


def _mono(xi: np.ndarray) -> np.ndarray:
    x, y = xi[..., 0], xi[..., 1]
    return np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=-1)


def local_volume_matrices(centers, hs, phix, phiy, divc, pres, eta,
                          pts, w, offs, fvals, gvals):
    """Element-local volume integrals for the mixed Darcy forms.

    Returns ``(A, Dm, Mp, qint, Fv, Fq)``:

    - ``A[e]``    = eta * int u_a . u_b
    - ``Dm[e]``   = int q_a div u_b
    - ``Mp[e]``   = int q_a q_b
    - ``qint[e]`` = int q_a
    - ``Fv[e]``   = int f . u_a
    - ``Fq[e]``   = int g q_a
    """
    nelem = centers.shape[0]
    nloc = phix.shape[1]
    k = pres.shape[0]
    A = np.zeros((nelem, nloc, nloc))
    Dm = np.zeros((nelem, k, nloc))
    Mp = np.zeros((nelem, k, k))
    qint = np.zeros((nelem, k))
    Fv = np.zeros((nelem, nloc))
    Fq = np.zeros((nelem, k))

    for e0 in range(0, nelem, _BLOCK):
        e1 = min(e0 + _BLOCK, nelem)
        lo, hi = offs[e0], offs[e1]
        if hi == lo:
            continue
        soffs = offs[e0:e1 + 1] - lo
        counts = np.diff(soffs)
        pos = np.repeat(np.arange(e0, e1), counts)
        xi = (pts[lo:hi] - centers[pos]) / hs[pos][:, None]
        mono = _mono(xi)                                      # (Q, 6)
        vx = np.einsum("qm,qam->qa", mono, phix[pos])         # (Q, nloc)
        vy = np.einsum("qm,qam->qa", mono, phiy[pos])
        dv = np.einsum("qm,qam->qa", mono, divc[pos])
        pq = mono @ pres.T                                    # (Q, k)
        wq = w[lo:hi]
        vxw = vx * wq[:, None]
        vyw = vy * wq[:, None]
        pqw = pq * wq[:, None]
        A[e0:e1] = eta * segment_sum(
            np.einsum("qa,qb->qab", vxw, vx) + np.einsum("qa,qb->qab", vyw, vy), soffs)
        Dm[e0:e1] = segment_sum(np.einsum("qa,qb->qab", pqw, dv), soffs)
        Mp[e0:e1] = segment_sum(np.einsum("qa,qb->qab", pqw, pq), soffs)
        qint[e0:e1] = segment_sum(pqw, soffs)
        Fv[e0:e1] = segment_sum(
            fvals[lo:hi, 0:1] * vxw + fvals[lo:hi, 1:2] * vyw, soffs)
        Fq[e0:e1] = segment_sum(gvals[lo:hi, None] * pqw, soffs)
    return A, Dm, Mp, qint, Fv, Fq


def eval_fields(centers, hs, phix, phiy, divc, pres, pos, ucoef, pcoef, pts):
    """Velocity, divergence, and pressure values at scattered points.

    ``pos[i]`` is point i's element position (row into the coefficient
    tables); ``ucoef``/``pcoef`` are the gathered local coefficient vectors.
    """
    xi = (pts - centers[pos]) / hs[pos][:, None]
    mono = _mono(xi)
    cx = np.einsum("na,nam->nm", ucoef, phix[pos])
    cy = np.einsum("na,nam->nm", ucoef, phiy[pos])
    cd = np.einsum("na,nam->nm", ucoef, divc[pos])
    vals = np.stack([np.einsum("nm,nm->n", cx, mono),
                     np.einsum("nm,nm->n", cy, mono)], axis=1)
    divs = np.einsum("nm,nm->n", cd, mono)
    pvals = np.einsum("nm,nm->n", pcoef @ pres, mono)
    return vals, divs, pvals
