"""Compiled element kernels (numba lane).

Same contracts as :mod:`cutdarcy.kernels.numpy_impl`; plain serial loops that
numba compiles once per machine (``cache=True``).
"""

from __future__ import annotations

import numpy as np
from numba import njit

LANE = "numba"


@njit(cache=True)
def local_volume_matrices(centers, hs, phix, phiy, divc, pres, eta,
                          pts, w, offs, fvals, gvals):
    nelem = centers.shape[0]
    nloc = phix.shape[1]
    k = pres.shape[0]
    A = np.zeros((nelem, nloc, nloc))
    Dm = np.zeros((nelem, k, nloc))
    Mp = np.zeros((nelem, k, k))
    qint = np.zeros((nelem, k))
    Fv = np.zeros((nelem, nloc))
    Fq = np.zeros((nelem, k))
    mono = np.empty(6)
    vx = np.empty(nloc)
    vy = np.empty(nloc)
    dv = np.empty(nloc)
    pq = np.empty(k)
    for e in range(nelem):
        cx = centers[e, 0]
        cy = centers[e, 1]
        h = hs[e]
        for q in range(offs[e], offs[e + 1]):
            xi = (pts[q, 0] - cx) / h
            et = (pts[q, 1] - cy) / h
            mono[0] = 1.0
            mono[1] = xi
            mono[2] = et
            mono[3] = xi * xi
            mono[4] = xi * et
            mono[5] = et * et
            for a in range(nloc):
                sx = 0.0
                sy = 0.0
                sd = 0.0
                for m in range(6):
                    sx += phix[e, a, m] * mono[m]
                    sy += phiy[e, a, m] * mono[m]
                    sd += divc[e, a, m] * mono[m]
                vx[a] = sx
                vy[a] = sy
                dv[a] = sd
            for a in range(k):
                s = 0.0
                for m in range(6):
                    s += pres[a, m] * mono[m]
                pq[a] = s
            wq = w[q]
            for a in range(nloc):
                wx = eta * wq * vx[a]
                wy = eta * wq * vy[a]
                for b in range(nloc):
                    A[e, a, b] += wx * vx[b] + wy * vy[b]
                Fv[e, a] += wq * (fvals[q, 0] * vx[a] + fvals[q, 1] * vy[a])
            for a in range(k):
                wp = wq * pq[a]
                for b in range(nloc):
                    Dm[e, a, b] += wp * dv[b]
                for b in range(k):
                    Mp[e, a, b] += wp * pq[b]
                qint[e, a] += wp
                Fq[e, a] += wp * gvals[q]
    return A, Dm, Mp, qint, Fv, Fq


@njit(cache=True)
def eval_fields(centers, hs, phix, phiy, divc, pres, pos, ucoef, pcoef, pts):
    n = pts.shape[0]
    nloc = phix.shape[1]
    k = pres.shape[0]
    vals = np.empty((n, 2))
    divs = np.empty(n)
    pvals = np.empty(n)
    mono = np.empty(6)
    for i in range(n):
        e = pos[i]
        xi = (pts[i, 0] - centers[e, 0]) / hs[e]
        et = (pts[i, 1] - centers[e, 1]) / hs[e]
        mono[0] = 1.0
        mono[1] = xi
        mono[2] = et
        mono[3] = xi * xi
        mono[4] = xi * et
        mono[5] = et * et
        sx = 0.0
        sy = 0.0
        sd = 0.0
        for a in range(nloc):
            c = ucoef[i, a]
            for m in range(6):
                sx += c * phix[e, a, m] * mono[m]
                sy += c * phiy[e, a, m] * mono[m]
                sd += c * divc[e, a, m] * mono[m]
        sp = 0.0
        for a in range(k):
            c = pcoef[i, a]
            for m in range(6):
                sp += c * pres[a, m] * mono[m]
        vals[i, 0] = sx
        vals[i, 1] = sy
        divs[i] = sd
        pvals[i] = sp
    return vals, divs, pvals
