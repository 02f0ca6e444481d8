"""Slice validation by inertia counts.

Between adjacent shifts, candidates are claimed by the tau ownership rule:
each probe keeps only its Ritz values on its own side of the split point, so
cross-probe duplicates disappear without comparing any vectors.  Slice
occupancy is then checked against the exact eigenvalue count given by the
inertia difference of the bounding factorizations, which the probes already
computed at their shifts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .probe import SpectralProbe

__all__ = [
    "VALIDATED",
    "MISSING",
    "PRUNED",
    "Candidate",
    "Slice",
    "SliceVerdict",
    "ValidationReport",
    "ShiftOrderingError",
    "OutstandingMissing",
    "build_slices",
    "select_candidates",
    "exact_count",
    "validate_slice",
    "validate_probes",
    "assemble_validated",
    "materialize_vectors",
    "validation_table",
]

VALIDATED = "validated"
MISSING = "missing"
PRUNED = "pruned"


class ShiftOrderingError(Exception):
    """Inertia decreased left to right; the shift ordering is corrupt."""


class OutstandingMissing(Exception):
    """Assembly attempted while slices still miss eigenvalues."""

    def __init__(self, slice_indices):
        self.slice_indices = list(slice_indices)
        super().__init__(f"slices still missing eigenvalues: {self.slice_indices}")


@dataclass(frozen=True)
class Candidate:
    value: float
    residual: float
    source_probe: int
    source_sigma: float
    vector_col: int


@dataclass(frozen=True)
class Slice:
    """Spectral interval between two adjacent shifts or a shift and an edge."""

    index: int
    lower: float
    upper: float
    tau: float
    left_probe: int | None
    right_probe: int | None

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"slice {self.index}: bounds [{self.lower}, {self.upper}] inverted")
        if not self.lower <= self.tau <= self.upper:
            raise ValueError(f"slice {self.index}: tau {self.tau} outside bounds")


@dataclass
class SliceVerdict:
    slice_index: int
    lower: float
    upper: float
    n_exact: int
    n_cand: int
    status: str
    kept: list[Candidate]

    @property
    def n_missing(self) -> int:
        return self.n_exact - self.n_cand if self.status == MISSING else 0


@dataclass
class ValidationReport:
    values: np.ndarray
    residuals: np.ndarray
    source_probes: np.ndarray
    vector_cols: np.ndarray
    verdicts: list[SliceVerdict]

    @property
    def n_total(self) -> int:
        return len(self.values)


def build_slices(
    shifts: np.ndarray,
    window: tuple[float, float],
    probe_ids: list[int] | None = None,
) -> list[Slice]:
    """Cut the window into n_s + 1 slices bounded by shifts and window edges.

    Interior slices split ownership at the midpoint of their bounding shifts;
    each end slice belongs entirely to its single bounding probe.
    """
    shifts = np.asarray(shifts, dtype=float)
    lo, hi = float(window[0]), float(window[1])
    if np.any(np.diff(shifts) <= 0):
        raise ShiftOrderingError("shifts must be strictly ascending")
    if shifts[0] <= lo or shifts[-1] >= hi:
        raise ValueError("shifts must lie strictly inside the window")
    ids = list(probe_ids) if probe_ids is not None else list(range(len(shifts)))

    slices = [Slice(0, lo, float(shifts[0]), lo, None, ids[0])]
    for j in range(1, len(shifts)):
        a, b = float(shifts[j - 1]), float(shifts[j])
        slices.append(Slice(j, a, b, (a + b) / 2.0, ids[j - 1], ids[j]))
    slices.append(Slice(len(shifts), float(shifts[-1]), hi, hi, ids[-1], None))
    return slices


def _claim(probe: SpectralProbe, mask: np.ndarray) -> list[Candidate]:
    return [
        Candidate(
            value=float(probe.values[col]),
            residual=float(probe.residuals[col]),
            source_probe=probe.probe_id,
            source_sigma=probe.sigma,
            vector_col=int(col),
        )
        for col in np.flatnonzero(mask)
    ]


def select_candidates(
    left: SpectralProbe | None,
    right: SpectralProbe | None,
    slc: Slice,
) -> list[Candidate]:
    """Ritz values owned by this slice; a value exactly at tau goes left."""
    out: list[Candidate] = []
    if left is not None:
        out.extend(_claim(left, (left.values > slc.lower) & (left.values <= slc.tau)))
    if right is not None:
        if left is None:
            # leftmost slice: the window edge is inclusive
            mask = (right.values >= slc.lower) & (right.values <= slc.upper)
        else:
            mask = (right.values > slc.tau) & (right.values <= slc.upper)
        out.extend(_claim(right, mask))
    out.sort(key=lambda c: c.value)
    return out


def exact_count(left_inertia_neg: int, right_inertia_neg: int) -> int:
    """Exact number of eigenvalues between two shifts, by Sylvester's law."""
    diff = right_inertia_neg - left_inertia_neg
    if diff < 0:
        raise ShiftOrderingError(
            f"inertia decreased across a slice ({left_inertia_neg} -> {right_inertia_neg})"
        )
    return diff


def validate_slice(slc: Slice, candidates: list[Candidate], n_exact: int) -> SliceVerdict:
    """Compare slice occupancy with the exact count.

    Exactly filled slices validate as-is.  Underfilled slices report how many
    eigenvalues are missing; their candidates are kept for restart seeding.
    Overfilled slices keep the n_exact candidates with the smallest residual
    norms, ties broken by proximity to the source shift.
    """
    n_cand = len(candidates)
    if n_cand == n_exact:
        status, kept = VALIDATED, sorted(candidates, key=lambda c: c.value)
    elif n_cand < n_exact:
        status, kept = MISSING, sorted(candidates, key=lambda c: c.value)
    else:
        ranked = sorted(candidates, key=lambda c: (c.residual, abs(c.value - c.source_sigma)))
        status, kept = PRUNED, ranked[:n_exact]
    return SliceVerdict(
        slice_index=slc.index,
        lower=slc.lower,
        upper=slc.upper,
        n_exact=n_exact,
        n_cand=n_cand,
        status=status,
        kept=kept,
    )


def validate_probes(
    probes: list[SpectralProbe],
    window: tuple[float, float],
    edge_neg_lo: int,
    edge_neg_hi: int,
) -> list[SliceVerdict]:
    """Validate every slice cut by the probes' shifts.

    Boundary inertia counts come from the probes themselves plus the two
    window-edge counts the caller computed once for this outer iteration.
    """
    ordered = sorted(probes, key=lambda p: p.sigma)
    sigmas = np.array([p.sigma for p in ordered])
    slices = build_slices(sigmas, window, [p.probe_id for p in ordered])
    negs = [edge_neg_lo] + [p.inertia_neg for p in ordered] + [edge_neg_hi]

    by_pos = [None] + list(ordered) + [None]
    verdicts = []
    for slc in slices:
        n_exact = exact_count(negs[slc.index], negs[slc.index + 1])
        cands = select_candidates(by_pos[slc.index], by_pos[slc.index + 1], slc)
        verdicts.append(validate_slice(slc, cands, n_exact))
    return verdicts


def assemble_validated(verdicts: list[SliceVerdict]) -> ValidationReport:
    """Merge validated slices into one ascending spectrum.

    Vectors stay behind (probe, column) references until materialized.
    """
    missing = [v.slice_index for v in verdicts if v.status == MISSING]
    if missing:
        raise OutstandingMissing(missing)
    kept = [c for v in verdicts for c in v.kept]
    kept.sort(key=lambda c: c.value)
    return ValidationReport(
        values=np.array([c.value for c in kept]),
        residuals=np.array([c.residual for c in kept]),
        source_probes=np.array([c.source_probe for c in kept], dtype=int),
        vector_cols=np.array([c.vector_col for c in kept], dtype=int),
        verdicts=verdicts,
    )


def materialize_vectors(
    report: ValidationReport,
    probes_by_id: dict[int, SpectralProbe],
) -> np.ndarray:
    if report.n_total == 0:
        raise ValueError("no validated eigenpairs to materialize")
    n = next(iter(probes_by_id.values())).vectors.shape[0]
    out = np.empty((n, report.n_total))
    for j, (pid, col) in enumerate(zip(report.source_probes, report.vector_cols)):
        out[:, j] = probes_by_id[int(pid)].vectors[:, int(col)]
    return out


def validation_table(verdicts: list[SliceVerdict]) -> str:
    lines = [f"{'slice':>5} {'lower':>14} {'upper':>14} {'exact':>6} {'cand':>5}  status"]
    for v in verdicts:
        tag = v.status + (f"({v.n_missing})" if v.status == MISSING else "")
        lines.append(
            f"{v.slice_index:>5} {v.lower:>14.6g} {v.upper:>14.6g} "
            f"{v.n_exact:>6} {v.n_cand:>5}  {tag}"
        )
    return "\n".join(lines)
