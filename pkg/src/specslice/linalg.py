"""Dense symmetric kernels: pivoted LDL^T with inertia, Cholesky, generalized eig.

The LDL^T factorization is the workhorse of the slice validator: the signs of
the diagonal blocks of D give the inertia of A - sigma*B, and by Sylvester's
law the difference of negative counts at two shifts equals the number of
eigenvalues between them.  The factorization is written out by hand (lower
triangular, Bunch-Kaufman partial pivoting) so that inertia counting does not
share a code path with the dense eigensolver used to cross-check it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

__all__ = [
    "Inertia",
    "LdltFactorization",
    "NotPositiveDefinite",
    "SingularPivot",
    "OP_COUNTS",
    "reset_op_counts",
    "factor_ldlt",
    "solve_ldlt",
    "cholesky",
    "dense_gen_eig",
]

# Bunch-Kaufman pivot threshold, minimizes element growth bound.
_ALPHA = (1.0 + np.sqrt(17.0)) / 8.0

# Call counters, used by tests to pin down how many factorizations and solves
# a probe performs.  Reset with reset_op_counts().
OP_COUNTS = {"factor_ldlt": 0, "solve_ldlt": 0, "cholesky": 0, "dense_gen_eig": 0}


def reset_op_counts() -> None:
    for key in OP_COUNTS:
        OP_COUNTS[key] = 0


class SingularPivot(Exception):
    """A pivot block is numerically singular (shift collides with an eigenvalue)."""


class NotPositiveDefinite(Exception):
    """Matrix handed to a Cholesky-based routine is not positive definite."""


class Inertia(NamedTuple):
    n_neg: int
    n_zero: int
    n_pos: int


@dataclass
class LdltFactorization:
    """P M P^T = L D L^T with unit lower L and block diagonal D.

    ``perm`` holds the row permutation: row i of P M P^T is row perm[i] of M.
    ``d_main`` and ``d_off`` store D; ``block_starts`` lists the leading index
    and size of each diagonal block.  ``zero_tol`` is the threshold below which
    a 1x1 block counts as numerically zero (N * eps * max|M|).
    """

    lower: np.ndarray
    d_main: np.ndarray
    d_off: np.ndarray
    perm: np.ndarray
    block_starts: list[tuple[int, int]]
    zero_tol: float

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def inertia(self) -> Inertia:
        """Count negative, zero, and positive eigenvalues from the D blocks."""
        n_neg = n_zero = n_pos = 0
        for start, size in self.block_starts:
            if size == 1:
                d = self.d_main[start]
                if abs(d) <= self.zero_tol:
                    n_zero += 1
                elif d < 0.0:
                    n_neg += 1
                else:
                    n_pos += 1
            else:
                a = self.d_main[start]
                c = self.d_main[start + 1]
                b = self.d_off[start]
                half_trace = 0.5 * (a + c)
                radius = np.hypot(0.5 * (a - c), b)
                for eig in (half_trace - radius, half_trace + radius):
                    if abs(eig) <= self.zero_tol:
                        n_zero += 1
                    elif eig < 0.0:
                        n_neg += 1
                    else:
                        n_pos += 1
        return Inertia(n_neg, n_zero, n_pos)

    def d_matrix(self) -> np.ndarray:
        d = np.diag(self.d_main.copy())
        for start, size in self.block_starts:
            if size == 2:
                d[start, start + 1] = self.d_off[start]
                d[start + 1, start] = self.d_off[start]
        return d


def _swap_full(w: np.ndarray, perm: np.ndarray, i: int, j: int) -> None:
    if i == j:
        return
    w[[i, j], :] = w[[j, i], :]
    w[:, [i, j]] = w[:, [j, i]]
    perm[[i, j]] = perm[[j, i]]


def factor_ldlt(m: np.ndarray) -> LdltFactorization:
    """Factor a symmetric matrix as P M P^T = L D L^T (Bunch-Kaufman pivoting).

    D has 1x1 and 2x2 diagonal blocks; every 2x2 block is indefinite, so the
    inertia of M is read off the blocks directly.  An all-zero pivot column is
    benign (the zero lands in D and counts toward n_zero).  SingularPivot is
    raised only when elimination would divide nonzero entries by a numerically
    singular block, which is the shift-collision signature.
    """
    OP_COUNTS["factor_ldlt"] += 1
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {m.shape}")

    w = m.copy()
    perm = np.arange(n)
    d_main = np.zeros(n)
    d_off = np.zeros(max(n - 1, 0))
    blocks: list[tuple[int, int]] = []
    scale = float(np.max(np.abs(m))) if n else 0.0
    zero_tol = n * np.finfo(float).eps * scale

    k = 0
    while k < n:
        abs_akk = abs(w[k, k])
        if k + 1 < n:
            rel = int(np.argmax(np.abs(w[k + 1 :, k])))
            imax = k + 1 + rel
            colmax = abs(w[imax, k])
        else:
            imax = k
            colmax = 0.0

        if max(abs_akk, colmax) <= zero_tol:
            # Column is numerically zero: nothing to eliminate.
            d_main[k] = w[k, k]
            w[k + 1 :, k] = 0.0
            blocks.append((k, 1))
            k += 1
            continue

        use_two = False
        pivot_row = k
        if abs_akk >= _ALPHA * colmax:
            pass
        else:
            row_slice = np.abs(w[imax, k:imax])
            col_slice = np.abs(w[imax + 1 :, imax])
            rowmax = max(row_slice.max() if row_slice.size else 0.0,
                         col_slice.max() if col_slice.size else 0.0)
            if abs_akk * rowmax >= _ALPHA * colmax * colmax:
                pass
            elif abs(w[imax, imax]) >= _ALPHA * rowmax:
                pivot_row = imax
            else:
                use_two = True

        if not use_two:
            _swap_full(w, perm, k, pivot_row)
            d = w[k, k]
            if abs(d) <= zero_tol:
                raise SingularPivot(f"singular 1x1 pivot at step {k}")
            col = w[k + 1 :, k].copy()
            if col.size:
                w[k + 1 :, k + 1 :] -= np.outer(col, col) / d
                w[k + 1 :, k] = col / d
            d_main[k] = d
            blocks.append((k, 1))
            k += 1
        else:
            _swap_full(w, perm, k + 1, imax)
            a = w[k, k]
            b = w[k + 1, k]
            c = w[k + 1, k + 1]
            det = a * c - b * b
            if abs(det) <= zero_tol * max(abs(a), abs(b), abs(c)):
                raise SingularPivot(f"singular 2x2 pivot at step {k}")
            cols = w[k + 2 :, k : k + 2].copy()
            if cols.size:
                # cols @ inv([[a, b], [b, c]]) via the adjugate.
                l21 = np.empty_like(cols)
                l21[:, 0] = (cols[:, 0] * c - cols[:, 1] * b) / det
                l21[:, 1] = (cols[:, 1] * a - cols[:, 0] * b) / det
                w[k + 2 :, k + 2 :] -= l21 @ cols.T
                w[k + 2 :, k : k + 2] = l21
            d_main[k] = a
            d_main[k + 1] = c
            d_off[k] = b
            blocks.append((k, 2))
            k += 2

    lower = np.tril(w, -1)
    for start, size in blocks:
        if size == 2:
            lower[start + 1, start] = 0.0
    np.fill_diagonal(lower, 1.0)
    return LdltFactorization(lower, d_main, d_off, perm, blocks, zero_tol)


def solve_ldlt(fact: LdltFactorization, rhs: np.ndarray) -> np.ndarray:
    """Solve M x = rhs using a factorization from factor_ldlt.

    Raises SingularPivot if any D block is numerically singular, which happens
    when the factored matrix was A - sigma*B with sigma on an eigenvalue.
    """
    OP_COUNTS["solve_ldlt"] += 1
    rhs = np.asarray(rhs, dtype=float)
    single = rhs.ndim == 1
    y = rhs.reshape(-1, 1) if single else rhs.copy()
    if y.shape[0] != fact.n:
        raise ValueError(f"rhs has {y.shape[0]} rows, matrix has {fact.n}")

    y = y[fact.perm]
    y = scipy.linalg.solve_triangular(fact.lower, y, lower=True, unit_diagonal=True)
    for start, size in fact.block_starts:
        if size == 1:
            d = fact.d_main[start]
            if abs(d) <= fact.zero_tol:
                raise SingularPivot(f"singular 1x1 block at index {start}")
            y[start] /= d
        else:
            a = fact.d_main[start]
            c = fact.d_main[start + 1]
            b = fact.d_off[start]
            det = a * c - b * b
            if abs(det) <= fact.zero_tol * max(abs(a), abs(b), abs(c)):
                raise SingularPivot(f"singular 2x2 block at index {start}")
            top = y[start].copy()
            bot = y[start + 1].copy()
            y[start] = (c * top - b * bot) / det
            y[start + 1] = (a * bot - b * top) / det
    y = scipy.linalg.solve_triangular(fact.lower.T, y, lower=False, unit_diagonal=True)
    out = np.empty_like(y)
    out[fact.perm] = y
    return out[:, 0] if single else out


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of an SPD matrix.

    Raises NotPositiveDefinite when the matrix is not numerically SPD; callers
    in the orthonormalization path catch this to trigger their fallbacks.
    """
    OP_COUNTS["cholesky"] += 1
    try:
        return np.linalg.cholesky(np.asarray(m, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def dense_gen_eig(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full solution of A x = lambda B x for symmetric A and SPD B.

    Returns ascending eigenvalues and B-orthonormal eigenvectors (X^T B X = I).
    This is the reference the slicing pipeline is checked against, so it stays
    on the LAPACK reduction path and shares nothing with factor_ldlt.
    """
    OP_COUNTS["dense_gen_eig"] += 1
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        vals, vecs = scipy.linalg.eigh(a, b)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return vals, vecs
