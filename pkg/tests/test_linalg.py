"""Tests for the dense symmetric kernels.

Inertia results are checked against eigenvalue sign counts from the dense
eigensolver, which takes a different route (tridiagonal reduction) than the
Bunch-Kaufman elimination under test.
"""

import numpy as np
import pytest

from specslice import linalg
from specslice.linalg import (
    NotPositiveDefinite,
    SingularPivot,
    cholesky,
    dense_gen_eig,
    factor_ldlt,
    solve_ldlt,
)


def random_symmetric(rng, n, scale=1.0):
    m = rng.standard_normal((n, n))
    return scale * (m + m.T) / 2.0


def random_spd(rng, n):
    m = rng.standard_normal((n, n))
    return m @ m.T + n * np.eye(n)


def inertia_oracle(m, zero_tol):
    vals = np.linalg.eigvalsh(m)
    n_neg = int(np.sum(vals < -zero_tol))
    n_zero = int(np.sum(np.abs(vals) <= zero_tol))
    return n_neg, n_zero, len(vals) - n_neg - n_zero


def test_inertia_of_diagonal():
    fact = factor_ldlt(np.diag([1.0, -2.0, 3.0]))
    assert fact.inertia() == (1, 0, 2)


def test_inertia_of_zero_matrix():
    fact = factor_ldlt(np.zeros((3, 3)))
    assert fact.inertia() == (0, 3, 0)
    assert np.allclose(fact.lower, np.eye(3))


def test_inertia_of_rotated_diagonal():
    # Eigenvalues fixed by construction: two negative, three positive.
    rng = np.random.default_rng(7)
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    m = q.T @ np.diag([-3.0, -1.0, 2.0, 4.0, 5.0]) @ q
    assert factor_ldlt(m).inertia() == (2, 0, 3)


def test_reconstruction_identity():
    rng = np.random.default_rng(21)
    for n in (1, 2, 3, 7, 24, 60):
        m = random_symmetric(rng, n, scale=3.0)
        fact = factor_ldlt(m)
        lhs = m[np.ix_(fact.perm, fact.perm)]
        rhs = fact.lower @ fact.d_matrix() @ fact.lower.T
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(np.linalg.norm(m), 1e-300)


def test_inertia_matches_eigenvalue_signs():
    rng = np.random.default_rng(42)
    for trial in range(60):
        n = int(rng.integers(2, 40))
        m = random_symmetric(rng, n, scale=float(rng.uniform(0.1, 10.0)))
        fact = factor_ldlt(m)
        assert tuple(fact.inertia()) == inertia_oracle(m, fact.zero_tol)


def test_inertia_with_forced_2x2_pivots():
    # Zero diagonal forces 2x2 pivots; counts must still match the oracle.
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 16))
        m = random_symmetric(rng, n)
        np.fill_diagonal(m, 0.0)
        fact = factor_ldlt(m)
        assert tuple(fact.inertia()) == inertia_oracle(m, fact.zero_tol)


def test_shifted_pencil_inertia_counts_eigenvalues_below_shift():
    # Sylvester's law: n_neg(A - sigma*B) equals #{lambda_i < sigma}.
    rng = np.random.default_rng(11)
    a = random_symmetric(rng, 30)
    b = random_spd(rng, 30)
    vals, _ = dense_gen_eig(a, b)
    for sigma in np.quantile(vals, [0.1, 0.45, 0.8]) + 1e-6:
        fact = factor_ldlt(a - sigma * b)
        assert fact.inertia().n_neg == int(np.sum(vals < sigma))


def test_solve_identity():
    fact = factor_ldlt(np.eye(4))
    rhs = np.arange(4.0)
    assert np.allclose(solve_ldlt(fact, rhs), rhs)


def test_solve_spd_residual():
    rng = np.random.default_rng(5)
    m = random_spd(rng, 50)
    rhs = rng.standard_normal((50, 3))
    x = solve_ldlt(factor_ldlt(m), rhs)
    rel = np.linalg.norm(m @ x - rhs) / np.linalg.norm(rhs)
    assert rel < 1e-10


def test_solve_indefinite_residual():
    rng = np.random.default_rng(6)
    for _ in range(10):
        n = int(rng.integers(2, 50))
        m = random_symmetric(rng, n)
        rhs = rng.standard_normal(n)
        x = solve_ldlt(factor_ldlt(m), rhs)
        assert np.linalg.norm(m @ x - rhs) <= 1e-9 * np.linalg.norm(rhs)


def test_solve_raises_on_singular_factor():
    fact = factor_ldlt(np.zeros((2, 2)))
    with pytest.raises(SingularPivot):
        solve_ldlt(fact, np.ones(2))


def test_zero_diagonal_and_rank_deficient_paths():
    # Zero diagonal is handled by a 2x2 pivot, not an error.
    fact = factor_ldlt(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert fact.inertia() == (1, 0, 1)
    # Rank-one matrix factors (zero trailing blocks land in D), solving fails.
    singular = np.ones((3, 3))
    fact = factor_ldlt(singular)
    assert fact.inertia() == (0, 2, 1)
    with pytest.raises(SingularPivot):
        solve_ldlt(fact, np.ones(3))


def test_cholesky_hand_case():
    m = np.array([[4.0, 2.0], [2.0, 5.0]])
    expected = np.array([[2.0, 0.0], [1.0, 2.0]])
    assert np.allclose(cholesky(m), expected)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_dense_gen_eig_tridiagonal_closed_form():
    # Classic second-difference matrix: lambda_j = 2 - 2 cos(j pi / (n+1)).
    n = 10
    a = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    vals, _ = dense_gen_eig(a, np.eye(n))
    expected = 2.0 - 2.0 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    assert np.allclose(vals, np.sort(expected), atol=1e-12)
    assert abs(vals[0] - (2.0 - 2.0 * np.cos(np.pi / 11.0))) < 1e-12


def test_dense_gen_eig_contracts():
    rng = np.random.default_rng(9)
    a = random_symmetric(rng, 40)
    b = random_spd(rng, 40)
    vals, vecs = dense_gen_eig(a, b)
    assert np.all(np.diff(vals) >= -1e-14)
    assert np.max(np.abs(vecs.T @ b @ vecs - np.eye(40))) < 1e-10
    scale = np.linalg.norm(a) + np.abs(vals) * np.linalg.norm(b)
    res = np.linalg.norm(a @ vecs - b @ vecs * vals, axis=0)
    assert np.all(res <= 1e-10 * scale)


def test_dense_gen_eig_rejects_indefinite_b():
    rng = np.random.default_rng(10)
    a = random_symmetric(rng, 5)
    with pytest.raises(NotPositiveDefinite):
        dense_gen_eig(a, np.diag([1.0, -1.0, 1.0, 1.0, 1.0]))


def test_op_counters():
    linalg.reset_op_counts()
    m = random_spd(np.random.default_rng(1), 6)
    fact = factor_ldlt(m)
    solve_ldlt(fact, np.ones(6))
    solve_ldlt(fact, np.ones(6))
    assert linalg.OP_COUNTS["factor_ldlt"] == 1
    assert linalg.OP_COUNTS["solve_ldlt"] == 2
