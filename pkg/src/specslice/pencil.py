"""Matrix pencils, file I/O, and synthetic problem generators.

A pencil is a pair (A, B) with A symmetric and B symmetric positive definite.
Sequences of pencils share B while A drifts between outer iterations, which is
the shape of the self-consistent loops this solver targets.  The synthetic
generator builds pencils with an exactly known generalized spectrum so tests
can compare against ground truth instead of a second eigensolver.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import linalg

__all__ = [
    "MatrixPencil",
    "PencilSequence",
    "SpectrumCluster",
    "SyntheticSpectrumSpec",
    "MatrixMarketError",
    "load_matrix_market",
    "save_matrix_market",
    "synth_pencil",
    "synth_sequence",
    "residual_norms",
    "load_manifest",
]


class MatrixMarketError(Exception):
    """Malformed Matrix Market input; message carries the offending line number."""


@dataclass
class MatrixPencil:
    """Symmetric pencil (A, B); B defaults to the identity."""

    a: np.ndarray
    b: np.ndarray | None = None
    _b_lower: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def b_is_identity(self) -> bool:
        return self.b is None

    def b_matrix(self) -> np.ndarray:
        return np.eye(self.n) if self.b is None else self.b

    def b_mult(self, x: np.ndarray) -> np.ndarray:
        return x if self.b is None else self.b @ x

    def b_lower(self) -> np.ndarray:
        """Cached lower Cholesky factor of B."""
        if self.b is None:
            return np.eye(self.n)
        if self._b_lower is None:
            self._b_lower = linalg.cholesky(self.b)
        return self._b_lower

    def b_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.b is None:
            return rhs
        l = self.b_lower()
        y = scipy.linalg.solve_triangular(l, rhs, lower=True)
        return scipy.linalg.solve_triangular(l.T, y, lower=False)

    def shifted(self, sigma: float) -> np.ndarray:
        if self.b is None:
            return self.a - sigma * np.eye(self.n)
        return self.a - sigma * self.b


@dataclass
class PencilSequence:
    """Shared B with one A per outer iteration, plus ground truth if synthetic."""

    a_list: list[np.ndarray]
    b: np.ndarray | None = None
    true_spectra: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.a_list)

    def pencil(self, i: int) -> MatrixPencil:
        return MatrixPencil(self.a_list[i], self.b)


@dataclass
class SpectrumCluster:
    center: float
    half_width: float
    count: int


@dataclass
class SyntheticSpectrumSpec:
    """Recipe for a synthetic pencil sequence with known spectra.

    Cluster counts must sum to the matrix order; a wide flat cluster doubles
    as a uniform background band.  Between iterations the eigenvalues move by
    decay**i times a fixed perturbation and the eigenbasis rotates by
    expm(decay**i * S) with S a fixed random skew matrix scaled by the same
    amplitude.  When jump_at is set, jump_amplitude is added to the designated
    cluster from that iteration onward, producing a step in its trajectory.
    """

    clusters: list[SpectrumCluster]
    perturbation_amplitude: float = 0.0
    decay: float = 0.5
    jump_at: int | None = None
    jump_amplitude: float = 0.0
    jump_cluster: int = 0
    basis_rotation_seed: int = 0
    b_mode: str | float = "identity"  # "identity" or a condition number target

    def total_count(self) -> int:
        return sum(c.count for c in self.clusters)

    def to_dict(self) -> dict:
        return {
            "clusters": [
                {"center": c.center, "half_width": c.half_width, "count": c.count}
                for c in self.clusters
            ],
            "perturbation_amplitude": self.perturbation_amplitude,
            "decay": self.decay,
            "jump_at": self.jump_at,
            "jump_amplitude": self.jump_amplitude,
            "jump_cluster": self.jump_cluster,
            "basis_rotation_seed": self.basis_rotation_seed,
            "b_mode": self.b_mode,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpectrumSpec":
        clusters = [
            SpectrumCluster(float(c["center"]), float(c["half_width"]), int(c["count"]))
            for c in data["clusters"]
        ]
        b_mode = data.get("b_mode", "identity")
        if isinstance(b_mode, dict):
            b_mode = float(b_mode["random_spd"])
        return cls(
            clusters=clusters,
            perturbation_amplitude=float(data.get("perturbation_amplitude", 0.0)),
            decay=float(data.get("decay", 0.5)),
            jump_at=data.get("jump_at"),
            jump_amplitude=float(data.get("jump_amplitude", 0.0)),
            jump_cluster=int(data.get("jump_cluster", 0)),
            basis_rotation_seed=int(data.get("basis_rotation_seed", 0)),
            b_mode=b_mode,
        )


# ---------------------------------------------------------------------------
# Matrix Market I/O
#
# Hand-written so the reference reader in scipy stays available as an
# independent cross-check.  Coordinate and array formats, real field,
# general or symmetric storage; duplicate coordinate entries are summed.


def _mm_error(path: str, lineno: int, msg: str) -> MatrixMarketError:
    return MatrixMarketError(f"{path}:{lineno}: {msg}")


def load_matrix_market(path: str) -> np.ndarray:
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise _mm_error(path, 1, "empty file")

    banner = lines[0].split()
    if len(banner) != 5 or banner[0] != "%%MatrixMarket" or banner[1].lower() != "matrix":
        raise _mm_error(path, 1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'")
    fmt, fld, sym = (tok.lower() for tok in banner[2:5])
    if fmt not in ("coordinate", "array"):
        raise _mm_error(path, 1, f"unsupported format '{fmt}'")
    if fld not in ("real", "integer"):
        raise _mm_error(path, 1, f"unsupported field '{fld}'")
    if sym not in ("general", "symmetric"):
        raise _mm_error(path, 1, f"unsupported symmetry '{sym}'")

    lineno = 1
    body = []
    for raw in lines[1:]:
        lineno += 1
        stripped = raw.strip()
        if not stripped or stripped.startswith("%"):
            continue
        body.append((lineno, stripped))
    if not body:
        raise _mm_error(path, lineno, "missing size line")

    size_lineno, size_line = body[0]
    toks = size_line.split()
    expected_toks = 3 if fmt == "coordinate" else 2
    if len(toks) != expected_toks:
        raise _mm_error(path, size_lineno, f"size line must have {expected_toks} integers")
    try:
        dims = [int(t) for t in toks]
    except ValueError:
        raise _mm_error(path, size_lineno, "size line must contain integers") from None
    nrows, ncols = dims[0], dims[1]
    out = np.zeros((nrows, ncols))

    if fmt == "coordinate":
        nnz = dims[2]
        entries = body[1:]
        if len(entries) != nnz:
            raise _mm_error(path, size_lineno, f"expected {nnz} entries, found {len(entries)}")
        for lineno, line in entries:
            parts = line.split()
            if len(parts) != 3:
                raise _mm_error(path, lineno, "entry must be 'i j value'")
            try:
                i, j = int(parts[0]), int(parts[1])
                val = float(parts[2])
            except ValueError:
                raise _mm_error(path, lineno, f"cannot parse entry '{line}'") from None
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise _mm_error(path, lineno, f"index ({i}, {j}) out of range for {nrows}x{ncols}")
            if sym == "symmetric" and j > i:
                raise _mm_error(path, lineno, "symmetric storage requires lower-triangle entries")
            out[i - 1, j - 1] += val
        if sym == "symmetric":
            out = out + np.tril(out, -1).T
    else:
        values = []
        for lineno, line in body[1:]:
            for tok in line.split():
                try:
                    values.append(float(tok))
                except ValueError:
                    raise _mm_error(path, lineno, f"cannot parse value '{tok}'") from None
        if sym == "general":
            expected = nrows * ncols
            if len(values) != expected:
                raise _mm_error(path, size_lineno, f"expected {expected} values, found {len(values)}")
            out = np.array(values).reshape((ncols, nrows)).T
        else:
            if nrows != ncols:
                raise _mm_error(path, size_lineno, "symmetric matrix must be square")
            expected = nrows * (nrows + 1) // 2
            if len(values) != expected:
                raise _mm_error(path, size_lineno, f"expected {expected} values, found {len(values)}")
            pos = 0
            for j in range(ncols):
                for i in range(j, nrows):
                    out[i, j] = values[pos]
                    pos += 1
            out = out + np.tril(out, -1).T
    return out


def save_matrix_market(path: str, m: np.ndarray, fmt: str = "array") -> None:
    """Write a dense matrix; symmetric storage is used automatically.

    Values are printed with 17 significant digits, so a write/read round trip
    reproduces IEEE doubles exactly.
    """
    m = np.asarray(m, dtype=float)
    nrows, ncols = m.shape
    symmetric = nrows == ncols and np.array_equal(m, m.T)
    sym = "symmetric" if symmetric else "general"
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix {fmt} real {sym}\n")
        if fmt == "array":
            fh.write(f"{nrows} {ncols}\n")
            if symmetric:
                for j in range(ncols):
                    for i in range(j, nrows):
                        fh.write(f"{m[i, j]:.17g}\n")
            else:
                for j in range(ncols):
                    for i in range(nrows):
                        fh.write(f"{m[i, j]:.17g}\n")
        elif fmt == "coordinate":
            mask = m != 0.0
            if symmetric:
                mask &= np.tril(np.ones_like(mask))
            rows, cols = np.nonzero(mask)
            fh.write(f"{nrows} {ncols} {len(rows)}\n")
            for i, j in zip(rows, cols):
                fh.write(f"{i + 1} {j + 1} {m[i, j]:.17g}\n")
        else:
            raise ValueError(f"unknown format '{fmt}'")


# ---------------------------------------------------------------------------
# Synthetic pencils


def _spectrum_from_spec(spec: SyntheticSpectrumSpec, rng: np.random.Generator):
    """Eigenvalues laid out cluster by cluster, with a jittered even spacing."""
    values = []
    labels = []
    for idx, cluster in enumerate(spec.clusters):
        if cluster.count == 1:
            pts = np.array([cluster.center])
        else:
            pts = cluster.center + cluster.half_width * np.linspace(-1.0, 1.0, cluster.count)
            if cluster.count > 2 and cluster.half_width > 0:
                spacing = 2.0 * cluster.half_width / (cluster.count - 1)
                jitter = rng.uniform(-0.25, 0.25, cluster.count - 2) * spacing
                pts[1:-1] += jitter
        values.append(pts)
        labels.append(np.full(cluster.count, idx))
    return np.concatenate(values), np.concatenate(labels)


def _random_b(n: int, cond_target: float, rng: np.random.Generator) -> np.ndarray:
    # B = I + t * W W^T with t chosen so cond(B) hits the target exactly.
    w = rng.standard_normal((n, n)) / np.sqrt(n)
    g = w @ w.T
    gvals = np.linalg.eigvalsh(g)
    gmin, gmax = gvals[0], gvals[-1]
    denom = gmax - cond_target * gmin
    t = (cond_target - 1.0) / denom if denom > 0 else 1.0
    return np.eye(n) + t * g


def synth_pencil(
    spec: SyntheticSpectrumSpec | np.ndarray,
    seed: int = 0,
    n: int | None = None,
) -> tuple[MatrixPencil, np.ndarray, np.ndarray]:
    """Build one pencil with the requested generalized spectrum.

    Returns (pencil, eigenvalues, eigenvectors); the eigenvalues are exact by
    construction (A = (LQ) diag(lam) (LQ)^T with B = L L^T), sorted ascending,
    and the eigenvectors satisfy X^T B X = I.
    """
    rng = np.random.default_rng(seed)
    if isinstance(spec, SyntheticSpectrumSpec):
        if n is not None and spec.total_count() != n:
            raise ValueError(f"cluster counts sum to {spec.total_count()}, expected {n}")
        lam, _ = _spectrum_from_spec(spec, rng)
        b_mode = spec.b_mode
    else:
        lam = np.asarray(spec, dtype=float)
        b_mode = "identity"
    size = len(lam)

    q, _ = np.linalg.qr(rng.standard_normal((size, size)))
    if b_mode == "identity":
        b = None
        lower = np.eye(size)
    else:
        b = _random_b(size, float(b_mode), rng)
        lower = np.linalg.cholesky(b)

    order = np.argsort(lam)
    lam_sorted = lam[order]
    basis = lower @ q
    a = (basis * lam) @ basis.T
    a = (a + a.T) / 2.0
    vecs = scipy.linalg.solve_triangular(lower, q, lower=True, trans="T")[:, order]
    return MatrixPencil(a, b), lam_sorted, vecs


def synth_sequence(
    spec: SyntheticSpectrumSpec,
    n_iters: int,
    seed: int = 0,
) -> PencilSequence:
    """Build a pencil sequence whose spectra drift toward a fixed limit."""
    rng = np.random.default_rng(seed)
    lam_final, labels = _spectrum_from_spec(spec, rng)
    size = len(lam_final)

    q, _ = np.linalg.qr(rng.standard_normal((size, size)))
    if spec.b_mode == "identity":
        b = None
        lower = np.eye(size)
    else:
        b = _random_b(size, float(spec.b_mode), rng)
        lower = np.linalg.cholesky(b)

    delta = rng.uniform(-1.0, 1.0, size) * spec.perturbation_amplitude
    rot_rng = np.random.default_rng(spec.basis_rotation_seed)
    s = rot_rng.standard_normal((size, size))
    s = s - s.T
    norm = np.linalg.norm(s, 2)
    if norm > 0:
        s *= spec.perturbation_amplitude / norm

    a_list = []
    spectra = []
    for i in range(n_iters):
        factor = spec.decay**i
        lam_i = lam_final + factor * delta
        if spec.jump_at is not None and i >= spec.jump_at:
            lam_i = lam_i + spec.jump_amplitude * (labels == spec.jump_cluster)
        rot = scipy.linalg.expm(factor * s) if norm > 0 else np.eye(size)
        basis = lower @ q @ rot
        a = (basis * lam_i) @ basis.T
        a_list.append((a + a.T) / 2.0)
        spectra.append(np.sort(lam_i))
    return PencilSequence(a_list, b, spectra)


def residual_norms(pencil: MatrixPencil, vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Column-wise 2-norms of A x - lambda B x."""
    res = pencil.a @ vecs - pencil.b_mult(vecs) * np.asarray(vals)
    return np.linalg.norm(res, axis=0)


# ---------------------------------------------------------------------------
# Sequence manifests


def load_manifest(path: str) -> PencilSequence:
    """Load a pencil sequence description.

    Two forms are accepted: explicit files
    ``{"b_path": "b.mtx" | null, "a_paths": ["a0.mtx", ...]}``
    with paths resolved relative to the manifest, or a synthetic recipe
    ``{"synthetic": {...}, "iters": I, "seed": S}``.
    """
    with open(path, "r") as fh:
        data = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))

    if "synthetic" in data:
        spec = SyntheticSpectrumSpec.from_dict(data["synthetic"])
        return synth_sequence(spec, int(data["iters"]), int(data.get("seed", 0)))

    if "a_paths" not in data:
        raise ValueError(f"{path}: manifest needs either 'a_paths' or 'synthetic'")
    a_list = [load_matrix_market(os.path.join(base, p)) for p in data["a_paths"]]
    b_path = data.get("b_path")
    b = load_matrix_market(os.path.join(base, b_path)) if b_path else None
    if b is not None and a_list and b.shape != a_list[0].shape:
        raise ValueError(f"{path}: B is {b.shape} but A is {a_list[0].shape}")
    return PencilSequence(a_list, b)
