"""Window partitioning and shift placement on top of a density model.

Two partitioning styles feed the solver.  For featureless spectra the window
is cut at cumulative-density levels so every slice holds about the same number
of eigenvalues.  For clustered spectra the density curve itself is segmented:
local maxima mark clusters, the minima between them become interval
boundaries, and a refinement loop merges near-empty intervals and re-searches
overly heavy ones at higher resolution.  Either way the caller ends up with
exactly n_s intervals carrying one shift each.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dos import DosModel, cdos_eval, count, dos_eval, expected_shift

__all__ = [
    "SpectralInterval",
    "ShiftSet",
    "cdos_root",
    "cdos_uniform_partition",
    "dos_cluster",
    "refine_clusters",
    "enforce_shift_count",
    "place_shifts",
    "partition_report",
]

ROOT_TOL = 1e-6
NEWTON_MIN_SLOPE = 1e-12
MERGE_BELOW = 2.0
REFINE_ABOVE = 50.0
MAX_REFINE_ROUNDS = 20
TIE_PERTURBATION = 1e-12


@dataclass
class SpectralInterval:
    lo: float
    hi: float
    gamma: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass
class ShiftSet:
    """Strictly ascending shifts inside a window, with their source intervals."""

    shifts: np.ndarray
    window: tuple[float, float]
    provenance: str
    intervals: list[SpectralInterval] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        lo, hi = self.window
        if np.any(np.diff(self.shifts) <= 0):
            raise ValueError("shifts must be strictly ascending")
        if len(self.shifts) and (self.shifts[0] < lo or self.shifts[-1] > hi):
            raise ValueError("shifts must lie inside the window")


def cdos_root(model: DosModel, target: float, lo: float, hi: float) -> float:
    """Solve Phi(omega) = target on [lo, hi] to |Phi - target| <= 1e-6.

    Newton steps are used while the local density is above NEWTON_MIN_SLOPE
    and the iterate stays bracketed; otherwise the step falls back to
    bisection.  The returned point is the midpoint of the plateau on which
    |Phi - target| <= tol, so roots crossing flat stretches of the cumulative
    density land in the middle of the gap.
    """
    a, b = float(lo), float(hi)
    fa = cdos_eval(model, a) - target
    fb = cdos_eval(model, b) - target
    if fa > ROOT_TOL or fb < -ROOT_TOL:
        raise ValueError(f"target {target} not bracketed by [{lo}, {hi}]")

    x = 0.5 * (a + b)
    for _ in range(300):
        f = cdos_eval(model, x) - target
        if abs(f) <= ROOT_TOL:
            break
        slope = dos_eval(model, x)
        took_newton = False
        if slope >= NEWTON_MIN_SLOPE:
            step = x - f / slope
            if a < step < b:
                x_new = step
                took_newton = True
        if not took_newton:
            x_new = 0.5 * (a + b)
        if f > 0:
            b = min(b, x)
        else:
            a = max(a, x)
        x = x_new
        if b - a <= 1e-15 * max(1.0, abs(lo), abs(hi)):
            break

    def edge(inner: float, outer: float) -> float:
        # largest excursion from inner toward outer keeping |Phi - target| <= tol
        ein, eout = inner, outer
        if abs(cdos_eval(model, eout) - target) <= ROOT_TOL:
            return eout
        for _ in range(80):
            mid = 0.5 * (ein + eout)
            if abs(cdos_eval(model, mid) - target) <= ROOT_TOL:
                ein = mid
            else:
                eout = mid
        return ein

    return 0.5 * (edge(x, float(lo)) + edge(x, float(hi)))


def cdos_uniform_partition(
    model: DosModel, window: tuple[float, float], per_slice: float
) -> list[SpectralInterval]:
    """Cut the window at cumulative-density levels Phi(a) + per_slice * j."""
    a, b = window
    if per_slice <= 0:
        raise ValueError("per_slice must be positive")
    total = count(model, a, b).gamma
    n_int = max(int(np.ceil(total / per_slice)), 1)
    base = cdos_eval(model, a)
    bounds = [a]
    for j in range(1, n_int):
        bounds.append(cdos_root(model, base + per_slice * j, bounds[-1], b))
    bounds.append(b)
    return [
        SpectralInterval(lo, hi, count(model, lo, hi).gamma)
        for lo, hi in zip(bounds[:-1], bounds[1:])
    ]


def _plateau_runs(values: np.ndarray) -> list[tuple[int, int]]:
    runs = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] != values[start]:
            runs.append((start, i - 1))
            start = i
    return runs


def dos_cluster(
    model: DosModel,
    window: tuple[float, float],
    n_omega: int,
    ritz_values: np.ndarray | None = None,
) -> list[SpectralInterval]:
    """Segment the window at density minima between local density maxima.

    The density is sampled on a uniform grid of n_omega points.  Interior
    strict local maxima (plateau runs count once, at their midpoint) mark
    clusters; the minimizer between consecutive maxima becomes a boundary.
    Intervals containing none of the Ritz values (the model's centers, unless
    a restricted set is passed) are dropped.  Fewer than two maxima mean the
    window is returned whole.
    """
    a, b = window
    if ritz_values is None:
        ritz_values = model.centers
    n_omega = max(int(n_omega), 3)
    grid = np.linspace(a, b, n_omega)
    phi = dos_eval(model, grid)

    maxima = []
    for start, end in _plateau_runs(phi):
        if start == 0 or end == n_omega - 1:
            continue
        if phi[start - 1] < phi[start] and phi[end + 1] < phi[end]:
            maxima.append((start + end) // 2)

    if len(maxima) <= 1:
        return [SpectralInterval(a, b, count(model, a, b).gamma)]

    bounds = [a]
    for left, right in zip(maxima[:-1], maxima[1:]):
        segment = phi[left : right + 1]
        lowest = np.nonzero(segment == segment.min())[0]
        bounds.append(grid[left + lowest[len(lowest) // 2]])
    bounds.append(b)

    intervals = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        inside = (ritz_values >= lo) & (ritz_values <= hi)
        if not np.any(inside):
            continue
        intervals.append(SpectralInterval(lo, hi, count(model, lo, hi).gamma))
    return intervals


def refine_clusters(
    model: DosModel,
    window: tuple[float, float],
    n_omega: int | None = None,
) -> list[SpectralInterval]:
    """Cluster the window and iterate the merge / re-search rules to a fixed point.

    Starts from dos_cluster on a grid of 10 points per Ritz triple.  Each round
    merges intervals with fewer than MERGE_BELOW estimated eigenvalues into
    their lighter neighbor, then re-segments intervals holding more than
    REFINE_ABOVE at resolution scaled by twice their share of the total count.
    Capped at MAX_REFINE_ROUNDS rounds.
    """
    if n_omega is None:
        n_omega = 10 * len(model.centers)
    intervals = dos_cluster(model, window, n_omega)
    total_c = max(count(model, *window).c, 1)

    for _ in range(MAX_REFINE_ROUNDS):
        changed = False

        while len(intervals) > 1:
            light = min(range(len(intervals)), key=lambda i: intervals[i].gamma)
            if intervals[light].gamma >= MERGE_BELOW:
                break
            neighbors = [i for i in (light - 1, light + 1) if 0 <= i < len(intervals)]
            partner = min(neighbors, key=lambda i: intervals[i].gamma)
            lo = min(intervals[light].lo, intervals[partner].lo)
            hi = max(intervals[light].hi, intervals[partner].hi)
            merged = SpectralInterval(lo, hi, count(model, lo, hi).gamma)
            intervals[min(light, partner)] = merged
            del intervals[max(light, partner)]
            changed = True

        refined: list[SpectralInterval] = []
        for interval in intervals:
            if interval.gamma <= REFINE_ABOVE:
                refined.append(interval)
                continue
            share = count(model, interval.lo, interval.hi).c / total_c
            sub_n = max(int(round(2.0 * share * n_omega)), 3)
            subs = dos_cluster(model, (interval.lo, interval.hi), sub_n)
            if len(subs) > 1:
                refined.extend(subs)
                changed = True
            else:
                refined.append(interval)
        intervals = refined

        if not changed:
            break
    return intervals


def enforce_shift_count(
    model: DosModel,
    intervals: list[SpectralInterval],
    n_s: int,
    window: tuple[float, float],
) -> tuple[list[SpectralInterval], list[str]]:
    """Split or merge intervals until exactly n_s remain.

    Splitting cuts the heaviest interval at its internal cumulative-density
    median.  Merging joins the lightest interval with its lighter neighbor,
    refusing to bridge gaps wider than three median interval widths unless no
    guarded merge exists anywhere (that forced merge is reported in the notes).
    """
    if n_s < 1:
        raise ValueError("need at least one shift")
    work = [SpectralInterval(iv.lo, iv.hi, iv.gamma) for iv in intervals]
    if not work:
        a, b = window
        work = [SpectralInterval(a, b, count(model, a, b).gamma)]
    work.sort(key=lambda iv: iv.lo)
    notes: list[str] = []

    while len(work) < n_s:
        heavy = max(range(len(work)), key=lambda i: work[i].gamma)
        iv = work[heavy]
        target = 0.5 * (cdos_eval(model, iv.lo) + cdos_eval(model, iv.hi))
        cut = cdos_root(model, target, iv.lo, iv.hi)
        if not (iv.lo < cut < iv.hi):
            cut = iv.midpoint()
        work[heavy : heavy + 1] = [
            SpectralInterval(iv.lo, cut, count(model, iv.lo, cut).gamma),
            SpectralInterval(cut, iv.hi, count(model, cut, iv.hi).gamma),
        ]

    while len(work) > n_s:
        guard = 3.0 * float(np.median([iv.width for iv in work]))
        order = sorted(range(len(work)), key=lambda i: work[i].gamma)
        merged = False
        for light in order:
            neighbors = []
            if light > 0 and work[light].lo - work[light - 1].hi <= guard:
                neighbors.append(light - 1)
            if light + 1 < len(work) and work[light + 1].lo - work[light].hi <= guard:
                neighbors.append(light + 1)
            if not neighbors:
                continue
            partner = min(neighbors, key=lambda i: work[i].gamma)
            lo = min(work[light].lo, work[partner].lo)
            hi = max(work[light].hi, work[partner].hi)
            work[min(light, partner)] = SpectralInterval(lo, hi, count(model, lo, hi).gamma)
            del work[max(light, partner)]
            merged = True
            break
        if not merged:
            # every candidate merge spans an oversized gap; take the smallest
            gaps = [work[i + 1].lo - work[i].hi for i in range(len(work) - 1)]
            i = int(np.argmin(gaps))
            notes.append(
                f"forced merge across gap {gaps[i]:.3e} (guard {guard:.3e})"
            )
            lo, hi = work[i].lo, work[i + 1].hi
            work[i : i + 2] = [SpectralInterval(lo, hi, count(model, lo, hi).gamma)]
    return work, notes


def place_shifts(
    model: DosModel,
    intervals: list[SpectralInterval],
    scheme: str = "midpoint",
    window: tuple[float, float] | None = None,
    provenance: str = "dos",
) -> ShiftSet:
    """One shift per interval: interval midpoint or density-weighted mean.

    Exact ties between consecutive shifts are separated by 1e-12 of the window
    width so downstream slice boundaries stay well defined.
    """
    if scheme not in ("midpoint", "expectation"):
        raise ValueError(f"unknown shift scheme '{scheme}'")
    if window is None:
        window = (intervals[0].lo, intervals[-1].hi)
    notes = []
    shifts = []
    for j, iv in enumerate(intervals):
        if scheme == "expectation":
            sigma, fallback = expected_shift(model, iv.lo, iv.hi)
            if fallback:
                notes.append(f"interval {j}: empty density mass, midpoint fallback")
        else:
            sigma = iv.midpoint()
        shifts.append(sigma)

    eps = TIE_PERTURBATION * (window[1] - window[0])
    for j in range(1, len(shifts)):
        if shifts[j] <= shifts[j - 1]:
            shifts[j] = shifts[j - 1] + eps
    shifts = np.minimum(np.asarray(shifts, dtype=float), window[1])
    return ShiftSet(shifts, window, provenance, intervals=list(intervals), notes=notes)


def partition_report(model: DosModel, shift_set: ShiftSet) -> str:
    """Human-readable partition summary for the --explain path."""
    a, b = shift_set.window
    lines = [
        f"window [{a:.6g}, {b:.6g}]  estimated count {count(model, a, b).gamma:.2f}",
        f"shift provenance: {shift_set.provenance}",
        f"{'#':>3} {'interval':>28} {'est count':>10} {'shift':>14}",
    ]
    for j, (iv, sigma) in enumerate(zip(shift_set.intervals, shift_set.shifts)):
        lines.append(
            f"{j:>3} [{iv.lo:>12.6g}, {iv.hi:>12.6g}] {iv.gamma:>10.2f} {sigma:>14.6g}"
        )
    for note in shift_set.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines)
