"""Direct saddle-point solves, condition numbers, and diagonal preconditioning.

Systems at desk scale go through dense LAPACK (LU with partial pivoting,
full SVD).  Larger systems use the same contracts behind sparse SuperLU
factorizations and Lanczos extreme-singular-value estimation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    InvalidArgumentError,
    InvalidPreconditionerError,
    SingularSystemError,
    TooLargeError,
)

DENSE_LIMIT = 20_000
_PIVOT_FLOOR = 1e-300
_RESIDUAL_TARGET = 1e-10


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one direct solve."""

    solution: np.ndarray
    residual: float          # ||Cx - b|| / ||b|| (absolute norm when b = 0)
    dim: int
    cond: float | None = None
    cond_pre: float | None = None


def _check_square(C, b=None):
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InvalidArgumentError(f"matrix must be square, got shape {C.shape}")
    if b is not None and np.asarray(b).shape != (C.shape[0],):
        raise InvalidArgumentError(
            f"right-hand side shape {np.asarray(b).shape} does not match {C.shape}")


def _matrix_scale(C) -> float:
    if sp.issparse(C):
        return float(np.max(np.abs(C.data))) if C.nnz else 0.0
    return float(np.max(np.abs(C))) if C.size else 0.0


def _relative_residual(C, x, b) -> float:
    r = C @ x - b
    nb = float(np.linalg.norm(b))
    nr = float(np.linalg.norm(r))
    return nr / nb if nb > 0.0 else nr


def solve(C, b) -> SolveReport:
    """LU solve with partial pivoting and iterative refinement.

    Raises SingularSystemError when a pivot falls below 1e-300 times the
    matrix scale (or the factorization breaks down outright).
    """
    _check_square(C, b)
    b = np.asarray(b, dtype=float)
    n = C.shape[0]
    scale = _matrix_scale(C)
    if scale == 0.0:
        raise SingularSystemError("zero matrix")

    if sp.issparse(C):
        csc = C.tocsc()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                lu = spla.splu(csc)
        except RuntimeError as exc:
            raise SingularSystemError(f"sparse factorization failed: {exc}") from exc
        if np.min(np.abs(lu.U.diagonal())) < _PIVOT_FLOOR * scale:
            raise SingularSystemError("pivot below 1e-300 of the matrix scale")
        apply = lu.solve
    else:
        Cd = np.asarray(C, dtype=float)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lu_piv = sla.lu_factor(Cd)
        if np.min(np.abs(np.diag(lu_piv[0]))) < _PIVOT_FLOOR * scale:
            raise SingularSystemError("pivot below 1e-300 of the matrix scale")
        apply = lambda rhs: sla.lu_solve(lu_piv, rhs)

    x = apply(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("factorization produced non-finite solution")
    residual = _relative_residual(C, x, b)
    for _ in range(2):
        if residual < _RESIDUAL_TARGET:
            break
        dx = apply(b - C @ x)
        x_new = x + dx
        res_new = _relative_residual(C, x_new, b)
        if not np.isfinite(res_new) or res_new >= residual:
            break
        x, residual = x_new, res_new
    return SolveReport(solution=x, residual=residual, dim=n)


def spectral_condition_number(C, dense_limit: int = DENSE_LIMIT) -> float:
    """sigma_max / sigma_min from a full dense SVD.

    Raises TooLargeError above `dense_limit`; returns inf for an exactly
    singular matrix.
    """
    _check_square(C)
    n = C.shape[0]
    if n > dense_limit:
        raise TooLargeError(
            f"dimension {n} exceeds dense decomposition limit {dense_limit}")
    dense = C.toarray() if sp.issparse(C) else np.asarray(C, dtype=float)
    s = np.linalg.svd(dense, compute_uv=False)
    if s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def extreme_singular_values(C) -> tuple[float, float]:
    """(sigma_max, sigma_min) of a sparse matrix without a dense SVD.

    sigma_max comes from Lanczos iteration on C; sigma_min from Lanczos on
    the SuperLU inverse (1 / sigma_max(C^-1)).  Deterministic start vector.
    """
    _check_square(C)
    csc = sp.csc_matrix(C)
    n = csc.shape[0]
    v0 = np.cos(np.arange(n, dtype=float))          # fixed, not axis-aligned
    smax = float(spla.svds(csc, k=1, which="LM", v0=v0,
                           return_singular_vectors=False, maxiter=20000)[0])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lu = spla.splu(csc)
    except RuntimeError:
        return smax, 0.0
    if np.min(np.abs(lu.U.diagonal())) < _PIVOT_FLOOR * max(_matrix_scale(csc), 1e-300):
        return smax, 0.0
    inv = spla.LinearOperator(
        (n, n), matvec=lu.solve, rmatvec=lambda y: lu.solve(y, trans="T"))
    inv_smax = float(spla.svds(inv, k=1, which="LM", v0=v0,
                               return_singular_vectors=False, maxiter=20000)[0])
    return smax, 1.0 / inv_smax


def condition_number(C, dense_limit: int = DENSE_LIMIT) -> float:
    """Spectral condition number; dense SVD up to the limit, Lanczos beyond."""
    _check_square(C)
    if C.shape[0] <= dense_limit:
        return spectral_condition_number(C, dense_limit)
    smax, smin = extreme_singular_values(C)
    return np.inf if smin == 0.0 else smax / smin


def diag_preconditioner(A, Mp) -> np.ndarray:
    """Diagonal of blockdiag(diag(P_u), diag(P_p)) as a vector.

    P_u is the velocity form matrix and P_p the physical pressure mass.
    """
    diag = np.concatenate([np.asarray(A.diagonal()), np.asarray(Mp.diagonal())])
    if diag.size == 0 or np.min(diag) <= 0.0:
        raise InvalidPreconditionerError("preconditioner diagonal must be positive")
    return diag


def preconditioned_condition(C, diag: np.ndarray,
                             dense_limit: int = DENSE_LIMIT) -> float:
    """Condition number of the symmetrically scaled system P^-1/2 C P^-1/2."""
    _check_square(C)
    diag = np.asarray(diag, dtype=float)
    if diag.shape != (C.shape[0],):
        raise InvalidArgumentError(
            f"diagonal length {diag.shape} does not match matrix {C.shape}")
    if np.min(diag) <= 0.0:
        raise InvalidPreconditionerError("preconditioner diagonal must be positive")
    s = 1.0 / np.sqrt(diag)
    if sp.issparse(C):
        D = sp.diags(s)
        scaled = (D @ C @ D).tocsr()
    else:
        scaled = s[:, None] * np.asarray(C, dtype=float) * s[None, :]
    return condition_number(scaled, dense_limit)
