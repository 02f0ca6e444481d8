"""Shift migration between outer iterations.

Validated Ritz values are clustered with 1-D k-means; clusters map back to
probes by source-count overlap.  Probes nobody mapped to are deleted and
replacements are cut from the largest clusters with 2-means splits, keeping
the probe count constant.  A partial-trace comparison decides whether the
pencil changed too much for warm starts, and missing eigenvalues trigger a
targeted DOS re-estimation inside the affected slices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dos import estimate_dos
from .partition import dos_cluster, enforce_shift_count, place_shifts
from .pencil import MatrixPencil
from .validate import MISSING, SliceVerdict

__all__ = [
    "Clustering",
    "Insertion",
    "MigrationPlan",
    "TraceComparison",
    "kmeans_pp_init",
    "kmeans_1d",
    "map_clusters_to_probes",
    "build_migration_plan",
    "trace_similarity",
    "recover_missing",
]

TRACE_REL_TOL = 0.05
RECOVERY_PER_PROBE = 10


@dataclass
class Clustering:
    centroids: np.ndarray
    assignment: np.ndarray
    inertia_objective: float

    @property
    def k(self) -> int:
        return len(self.centroids)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == j)


@dataclass(frozen=True)
class Insertion:
    new_probe_id: int
    sigma: float
    donor_probe_id: int
    donor_vector_cols: tuple[int, ...]


@dataclass
class MigrationPlan:
    shift_updates: dict[int, float]
    deletions: list[int]
    insertions: list[Insertion]
    notes: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class TraceComparison:
    eta_prev: float
    eta_cur: float
    dissimilar: bool


def kmeans_pp_init(
    values: np.ndarray,
    k: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, bool]:
    """D-squared seeding: each next centroid is drawn with weight dist^2.

    Returns (centroids ascending, short) where short flags fewer distinct
    values than requested centroids.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot seed centroids from an empty value set")
    chosen = [float(values[rng.integers(values.size)])]
    while len(chosen) < k:
        d2 = np.min((values[:, None] - np.array(chosen)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total == 0.0:
            return np.array(sorted(set(chosen))), True
        idx = rng.choice(values.size, p=d2 / total)
        chosen.append(float(values[idx]))
    return np.sort(np.array(chosen)), False


def kmeans_1d(values: np.ndarray, k: int, init: np.ndarray) -> Clustering:
    """Lloyd iteration on a line.

    Stops when centroid movement falls below 1e-12 of the value spread or
    after 100 rounds.  An empty cluster is repaired by stealing the farthest
    member of the largest cluster; Lloyd monotonicity is asserted on rounds
    without repairs (a repair round may transiently raise the objective).
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    cents = np.sort(np.asarray(init, dtype=float))
    if cents.size != k:
        raise ValueError(f"init has {cents.size} centroids, expected {k}")
    tol = 1e-12 * float(np.ptp(values))

    prev_obj = math.inf

    def assign_and_repair(cents):
        assign = np.argmin(np.abs(values[:, None] - cents[None, :]), axis=1)
        repaired = False
        counts = np.bincount(assign, minlength=k)
        while np.any(counts == 0):
            repaired = True
            empty = int(np.flatnonzero(counts == 0)[0])
            largest = int(np.argmax(counts))
            members = np.flatnonzero(assign == largest)
            far = members[np.argmax(np.abs(values[members] - cents[largest]))]
            assign[far] = empty
            counts = np.bincount(assign, minlength=k)
        return assign, repaired

    for _ in range(100):
        assign, repaired = assign_and_repair(cents)
        new_cents = np.array([values[assign == j].mean() for j in range(k)])
        obj = float(np.sum((values - new_cents[assign]) ** 2))
        if not repaired:
            assert obj <= prev_obj + 1e-9 * max(obj, 1.0)
        prev_obj = obj
        moved = float(np.max(np.abs(np.sort(new_cents) - cents)))
        cents = np.sort(new_cents)
        if moved <= tol:
            break

    assign, _ = assign_and_repair(cents)
    obj = float(np.sum((values - cents[assign]) ** 2))
    return Clustering(centroids=cents, assignment=assign, inertia_objective=obj)


def map_clusters_to_probes(
    clustering: Clustering,
    source_probes: np.ndarray,
    probe_sigmas: dict[int, float],
) -> dict[int, int]:
    """Map each cluster to the probe that sourced most of its members.

    Ties go to the probe whose shift is nearer the cluster centroid, then to
    the lower probe id.  Probes that sourced nothing are absent from the
    image and will be deleted by the plan builder.
    """
    source_probes = np.asarray(source_probes, dtype=int)
    mapping: dict[int, int] = {}
    for j in range(clustering.k):
        members = clustering.members(j)
        pids, counts = np.unique(source_probes[members], return_counts=True)
        centroid = float(clustering.centroids[j])
        best = min(
            zip(pids, counts),
            key=lambda pc: (-pc[1], abs(probe_sigmas[int(pc[0])] - centroid), int(pc[0])),
        )
        mapping[j] = int(best[0])
    return mapping


def _split_two_means(vals: np.ndarray) -> Clustering:
    # deterministic init at the extremes; exact enough for 1-D splits
    return kmeans_1d(vals, 2, np.array([vals.min(), vals.max()]))


def build_migration_plan(
    clustering: Clustering,
    mapping: dict[int, int],
    values: np.ndarray,
    source_probes: np.ndarray,
    vector_cols: np.ndarray,
    live_probe_ids: list[int],
    n_s: int,
) -> MigrationPlan:
    """Turn a clustering into shift updates, deletions, and insertions.

    Clusters mapped to the same probe merge (the probe moves to the merged
    centroid).  Unmapped probes are deleted; while the group count is below
    n_s the largest group is split in two, the donor keeping the lower half
    and a new probe taking the upper half together with the donor's vectors
    for it.  Deleted ids are reused for insertions, smallest first.
    """
    values = np.asarray(values, dtype=float)
    source_probes = np.asarray(source_probes, dtype=int)
    vector_cols = np.asarray(vector_cols, dtype=int)
    notes: list[str] = []

    groups: dict[int, list[int]] = {}
    for j in sorted(range(clustering.k), key=lambda j: clustering.centroids[j]):
        pid = mapping[j]
        if pid in groups:
            notes.append(f"cluster {j} merged into probe {pid}")
        groups.setdefault(pid, []).extend(clustering.members(j).tolist())

    deletions = sorted(pid for pid in live_probe_ids if pid not in groups)
    for pid in deletions:
        notes.append(f"probe {pid} unmapped, deleted")

    def centroid(pid):
        return float(values[groups[pid]].mean())

    # post-recovery a round can start with more probes than shifts
    while len(groups) > n_s:
        lightest = min(groups, key=lambda pid: (len(groups[pid]), pid))
        rest = [pid for pid in groups if pid != lightest]
        target = min(rest, key=lambda pid: (abs(centroid(pid) - centroid(lightest)), pid))
        groups[target].extend(groups.pop(lightest))
        deletions.append(lightest)
        notes.append(f"probe {lightest} merged into {target} to restore probe count")
    deletions.sort()

    free_ids = list(deletions)
    next_id = max(list(live_probe_ids) + [-1]) + 1
    insertions: list[Insertion] = []
    while len(groups) < n_s:
        splittable = [pid for pid in groups if len(groups[pid]) >= 2]
        if not splittable:
            raise ValueError("not enough validated eigenvalues to populate every probe")
        donor = min(splittable, key=lambda pid: (-len(groups[pid]), pid))
        idx = np.array(sorted(groups[donor], key=lambda i: values[i]))
        sub = _split_two_means(values[idx])
        lower = idx[sub.assignment == 0].tolist()
        upper = idx[sub.assignment == 1].tolist()

        if free_ids:
            new_id = free_ids.pop(0)
        else:
            new_id, next_id = next_id, next_id + 1
        donor_cols = tuple(
            int(vector_cols[i]) for i in upper if source_probes[i] == donor
        )
        insertions.append(
            Insertion(
                new_probe_id=new_id,
                sigma=float(sub.centroids[1]),
                donor_probe_id=donor,
                donor_vector_cols=donor_cols,
            )
        )
        groups[donor] = lower
        groups[new_id] = upper
        notes.append(f"probe {donor} split, new probe {new_id} takes the upper half")

    shift_updates = {pid: centroid(pid) for pid in sorted(groups)}
    assert len(live_probe_ids) - len(deletions) + len(insertions) == n_s
    return MigrationPlan(
        shift_updates=shift_updates,
        deletions=deletions,
        insertions=insertions,
        notes=notes,
    )


def trace_similarity(
    x_prev: np.ndarray,
    a_prev: np.ndarray,
    a_cur: np.ndarray,
    rel_tol: float = TRACE_REL_TOL,
) -> TraceComparison:
    """Partial-trace comparison of consecutive pencils over the same basis.

    eta(V, A) = Tr(V^T A V); a relative change beyond rel_tol (floored at an
    absolute scale of 1) marks the pencils as spectrally dissimilar.
    """
    eta_prev = float(np.einsum("ij,ij->", x_prev, a_prev @ x_prev))
    eta_cur = float(np.einsum("ij,ij->", x_prev, a_cur @ x_prev))
    dissimilar = abs(eta_cur - eta_prev) > rel_tol * max(abs(eta_prev), 1.0)
    return TraceComparison(eta_prev=eta_prev, eta_cur=eta_cur, dissimilar=dissimilar)


def recover_missing(
    pencil: MatrixPencil,
    verdicts: list[SliceVerdict],
    lanczos_steps: int,
    seed: int,
    per_probe_cap: int = RECOVERY_PER_PROBE,
    scheme: str = "expectation",
) -> list[tuple[int, np.ndarray]]:
    """Place fresh shifts inside every slice that reported missing eigenvalues.

    One new DOS estimate of the current pencil is reused for all affected
    slices; each gets between one and ceil(n_missing / per_probe_cap) shifts
    from the cluster-and-place pipeline restricted to its interval.
    """
    missing = [v for v in verdicts if v.status == MISSING]
    if not missing:
        return []
    model = estimate_dos(pencil, lanczos_steps, seed=seed)
    additions: list[tuple[int, np.ndarray]] = []
    for v in missing:
        n_new = max(1, math.ceil(v.n_missing / per_probe_cap))
        window = (v.lower, v.upper)
        intervals = dos_cluster(model, window, n_omega=max(50, 20 * n_new))
        intervals, _ = enforce_shift_count(model, intervals, n_new, window)
        shift_set = place_shifts(model, intervals, scheme=scheme, window=window,
                                 provenance="recovery")
        additions.append((v.slice_index, shift_set.shifts))
    return additions
