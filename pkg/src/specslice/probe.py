"""Spectral probes: shift-invert subspace iteration around a single shift.

A probe owns a shift sigma and a block of k basis vectors.  One compute cycle
factors A - sigma*B once, applies M rounds of V <- (A - sigma*B)^-1 B V with
B-orthonormalization after every application, and finishes with a
Rayleigh-Ritz extraction.  The factorization doubles as the inertia counter
at sigma, which the validator consumes; the probe never sees other probes'
vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import linalg
from .linalg import NotPositiveDefinite, SingularPivot
from .pencil import MatrixPencil, residual_norms

__all__ = [
    "ProbeConfig",
    "SpectralProbe",
    "cholesky_qr",
    "seed_block",
    "rayleigh_ritz",
    "si_subspace_iteration",
]


@dataclass
class ProbeConfig:
    dim: int
    iters: int
    ortho_retry_limit: int = 3
    collision_nudge: float = 0.0


@dataclass
class SpectralProbe:
    """Result of one compute cycle at a fixed shift."""

    probe_id: int
    sigma: float
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    inertia_neg: int
    iterations: int

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def cholesky_qr(v: np.ndarray, pencil: MatrixPencil) -> tuple[np.ndarray, np.ndarray]:
    """B-orthonormalize a block: G = V^T B V = R R^T, W = V R^-T.

    Returns (W, R) with W^T B W = I and V = W R^T.  Raises NotPositiveDefinite
    when the Gram matrix is numerically rank deficient.
    """
    gram = v.T @ pencil.b_mult(v)
    gram = (gram + gram.T) / 2.0
    r = linalg.cholesky(gram)
    w = sla.solve_triangular(r, v.T, lower=True)
    return w.T, r


def b_orthonormalize(
    v: np.ndarray,
    pencil: MatrixPencil,
    rng: np.random.Generator | None = None,
    retries: int = 3,
) -> np.ndarray:
    """CholeskyQR with fallbacks for ill-conditioned blocks.

    Shift-invert amplification can make the block numerically collinear; a
    plain QR rebalances it while preserving the span.  If the block is
    genuinely rank deficient, the null directions are replaced with random
    vectors (requires rng), up to ``retries`` times.
    """
    scale = np.linalg.norm(v, axis=0)
    scale[scale == 0.0] = 1.0
    work = v / scale
    try:
        return cholesky_qr(work, pencil)[0]
    except NotPositiveDefinite:
        pass

    n, k = work.shape
    for _ in range(retries + 1):
        u, s, _ = np.linalg.svd(work, full_matrices=False)
        cutoff = (s[0] if s.size and s[0] > 0.0 else 1.0) * n * np.finfo(float).eps
        rank = int(np.sum(s > cutoff))
        if rank < k:
            if rng is None:
                raise NotPositiveDefinite(
                    f"block has numerical rank {rank} < {k} and no generator to reseed"
                )
            u[:, rank:] = rng.standard_normal((n, k - rank))
            u = np.linalg.qr(u)[0]
        work = u
        try:
            return cholesky_qr(work, pencil)[0]
        except NotPositiveDefinite:
            continue
    raise NotPositiveDefinite("block stayed rank deficient after re-randomization")


def seed_block(
    prev_vectors: np.ndarray | None,
    n: int,
    k: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Start block for a compute cycle: carried-over columns padded with noise."""
    v0 = np.empty((n, k))
    n_carry = 0
    if prev_vectors is not None and prev_vectors.size:
        n_carry = min(k, prev_vectors.shape[1])
        v0[:, :n_carry] = prev_vectors[:, :n_carry]
    if n_carry < k:
        v0[:, n_carry:] = rng.standard_normal((n, k - n_carry))
    return v0


def rayleigh_ritz(pencil: MatrixPencil, basis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ritz pairs of the pencil over a B-orthonormal basis, ascending."""
    h = basis.T @ (pencil.a @ basis)
    h = (h + h.T) / 2.0
    vals, q = np.linalg.eigh(h)
    return vals, basis @ q


def si_subspace_iteration(
    pencil: MatrixPencil,
    sigma: float,
    v0: np.ndarray,
    config: ProbeConfig,
    probe_id: int = 0,
    rng: np.random.Generator | None = None,
) -> SpectralProbe:
    """Run one probe compute cycle at shift sigma.

    Factors A - sigma*B exactly once; a numerically singular factorization
    (shift collides with an eigenvalue) is retried once with sigma nudged by
    config.collision_nudge, if set.  Applies config.iters inverse iterations
    with B-orthonormalization, then Rayleigh-Ritz.
    """
    n = pencil.n
    if v0.shape != (n, config.dim):
        raise ValueError(f"start block must be {n}x{config.dim}, got {v0.shape}")

    basis = b_orthonormalize(v0, pencil, rng=rng, retries=config.ortho_retry_limit)

    shift = float(sigma)
    factor = None
    for attempt in range(2):
        try:
            candidate = linalg.factor_ldlt(pencil.shifted(shift))
            if candidate.inertia().n_zero > 0:
                raise SingularPivot(f"shift {shift} sits on an eigenvalue")
            factor = candidate
            break
        except SingularPivot:
            if attempt == 0 and config.collision_nudge > 0.0:
                shift += config.collision_nudge
            else:
                raise
    assert factor is not None
    inertia_neg = factor.inertia().n_neg

    for _ in range(config.iters):
        basis = linalg.solve_ldlt(factor, pencil.b_mult(basis))
        basis = b_orthonormalize(basis, pencil, rng=rng, retries=config.ortho_retry_limit)

    values, vectors = rayleigh_ritz(pencil, basis)
    res = residual_norms(pencil, values, vectors)
    return SpectralProbe(
        probe_id=probe_id,
        sigma=shift,
        values=values,
        vectors=vectors,
        residuals=res,
        inertia_neg=inertia_neg,
        iterations=config.iters,
    )
