from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from cutdarcy.errors import (
    InvalidArgumentError,
    InvalidPreconditionerError,
    SingularSystemError,
    TooLargeError,
)
from cutdarcy.linalg import (
    SolveReport,
    condition_number,
    diag_preconditioner,
    extreme_singular_values,
    preconditioned_condition,
    solve,
    spectral_condition_number,
)


# ---------------------------------------------------------------------------
# solve

def test_solve_identity():
    b = np.array([3.0, -1.0, 2.5])
    rep = solve(np.eye(3), b)
    assert isinstance(rep, SolveReport)
    assert np.allclose(rep.solution, b)
    assert rep.residual < 1e-10
    assert rep.dim == 3


def test_solve_hand_system():
    C = np.array([[2.0, 1.0], [-1.0, 0.0]])
    rep = solve(C, np.array([1.0, 0.0]))
    assert np.allclose(rep.solution, [0.0, 1.0], atol=1e-14)


def test_solve_random_well_conditioned():
    rng = np.random.default_rng(7)
    C = 5.0 * np.eye(50) + 0.1 * rng.standard_normal((50, 50))
    b = rng.standard_normal(50)
    rep = solve(C, b)
    assert rep.residual < 1e-12
    assert np.allclose(C @ rep.solution, b, atol=1e-11)


def test_solve_sparse_matches_dense():
    rng = np.random.default_rng(11)
    C = 4.0 * np.eye(40) + rng.standard_normal((40, 40))
    b = rng.standard_normal(40)
    xd = solve(C, b).solution
    xs = solve(sp.csr_matrix(C), b)
    assert xs.residual < 1e-12
    assert np.allclose(xd, xs.solution, atol=1e-10)


def test_solve_singular_raises():
    C = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularSystemError):
        solve(C, np.array([1.0, 1.0]))
    with pytest.raises(SingularSystemError):
        solve(sp.csr_matrix(C), np.array([1.0, 1.0]))
    with pytest.raises(SingularSystemError):
        solve(np.zeros((3, 3)), np.zeros(3))


def test_solve_shape_validation():
    with pytest.raises(InvalidArgumentError):
        solve(np.ones((2, 3)), np.ones(2))
    with pytest.raises(InvalidArgumentError):
        solve(np.eye(3), np.ones(2))


# ---------------------------------------------------------------------------
# condition numbers

def test_cond_identity_and_diagonal():
    assert spectral_condition_number(np.eye(4)) == pytest.approx(1.0, rel=1e-14)
    assert spectral_condition_number(np.diag([1.0, 10.0])) == pytest.approx(10.0, rel=1e-14)


def test_cond_spd_matches_eigenvalue_ratio():
    rng = np.random.default_rng(5)
    B = rng.standard_normal((10, 10))
    C = B @ B.T + 0.5 * np.eye(10)
    evals = np.linalg.eigvalsh(C)
    assert spectral_condition_number(C) == pytest.approx(
        evals[-1] / evals[0], rel=1e-8)


def test_cond_scale_invariance():
    rng = np.random.default_rng(9)
    C = rng.standard_normal((20, 20)) + 3.0 * np.eye(20)
    base = spectral_condition_number(C)
    for alpha in (2.0, -0.5, 1e6, 1e-6):
        assert spectral_condition_number(alpha * C) == pytest.approx(base, rel=1e-10)


def test_cond_dense_limit():
    with pytest.raises(TooLargeError):
        spectral_condition_number(np.eye(6), dense_limit=5)


def test_cond_singular_matrix_is_inf():
    C = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert spectral_condition_number(C) == np.inf


def test_extreme_singular_values_match_dense_svd():
    rng = np.random.default_rng(13)
    C = sp.csr_matrix(rng.standard_normal((200, 200)) + 5.0 * np.eye(200))
    smax, smin = extreme_singular_values(C)
    s = np.linalg.svd(C.toarray(), compute_uv=False)
    assert smax == pytest.approx(s[0], rel=1e-8)
    assert smin == pytest.approx(s[-1], rel=1e-8)


def test_condition_number_dispatch_agreement():
    rng = np.random.default_rng(17)
    C = sp.csr_matrix(rng.standard_normal((120, 120)) + 4.0 * np.eye(120))
    dense = condition_number(C)                       # within dense limit
    lanczos = condition_number(C, dense_limit=10)     # forced sparse path
    assert lanczos == pytest.approx(dense, rel=1e-7)


# ---------------------------------------------------------------------------
# preconditioner

def test_diag_preconditioner_concatenates_blocks():
    A = sp.csr_matrix(np.diag([2.0, 3.0]))
    M = sp.csr_matrix(np.diag([0.5]))
    assert np.array_equal(diag_preconditioner(A, M), [2.0, 3.0, 0.5])


def test_diag_preconditioner_rejects_nonpositive():
    A = sp.csr_matrix(np.diag([2.0, 0.0]))
    M = sp.csr_matrix(np.diag([0.5]))
    with pytest.raises(InvalidPreconditionerError):
        diag_preconditioner(A, M)


def test_preconditioned_identity_and_diagonal():
    assert preconditioned_condition(np.eye(3), np.ones(3)) == pytest.approx(1.0, rel=1e-12)
    d = np.array([4.0, 0.25, 100.0])
    # perfect scaling: P^-1/2 diag(d) P^-1/2 = identity
    assert preconditioned_condition(np.diag(d), d) == pytest.approx(1.0, rel=1e-12)
    assert preconditioned_condition(sp.csr_matrix(np.diag(d)), d) == pytest.approx(
        1.0, rel=1e-12)


def test_preconditioned_condition_improves_bad_scaling():
    rng = np.random.default_rng(21)
    Q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    C = Q @ np.diag(np.linspace(1.0, 2.0, 30)) @ Q.T   # kappa = 2
    d = 10.0 ** rng.uniform(-6, 6, size=30)
    bad = np.sqrt(d)[:, None] * C * np.sqrt(d)[None, :]
    assert spectral_condition_number(bad) > 1e6
    assert preconditioned_condition(bad, np.diag(bad)) < 100.0


def test_preconditioned_condition_validation():
    with pytest.raises(InvalidArgumentError):
        preconditioned_condition(np.eye(3), np.ones(2))
    with pytest.raises(InvalidPreconditionerError):
        preconditioned_condition(np.eye(2), np.array([1.0, -1.0]))
