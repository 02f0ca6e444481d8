"""Outer solver loop and artifact output.

One iteration runs: place shifts (DOS pipeline on the first pass, k-means
migration afterwards, fresh DOS when the pencil changed too much), compute
every probe, validate slices against inertia counts, recover missing
eigenvalues with targeted re-estimation, and assemble the validated set.
Workers are logical: probes execute sequentially but are assigned round-robin
and all inter-worker traffic a distributed run would need is accounted, so
determinism and communication bounds are testable in-process.
"""

from __future__ import annotations

import json
import math
import os
import struct
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .dos import DosModel, cdos_eval, count, dos_eval, estimate_dos
from .linalg import SingularPivot, factor_ldlt
from .migrate import (
    TRACE_REL_TOL,
    build_migration_plan,
    kmeans_1d,
    kmeans_pp_init,
    map_clusters_to_probes,
    recover_missing,
    trace_similarity,
)
from .partition import ShiftSet, cdos_root, enforce_shift_count, place_shifts, refine_clusters
from .pencil import MatrixPencil, PencilSequence
from .probe import ProbeConfig, SpectralProbe, seed_block, si_subspace_iteration
from .validate import (
    MISSING,
    ValidationReport,
    assemble_validated,
    materialize_vectors,
    validate_probes,
)

__all__ = [
    "SolverConfig",
    "ScfState",
    "ResultSet",
    "CommLog",
    "WorkerSchedule",
    "RecoveryExhausted",
    "schedule_probes",
    "gather_summaries",
    "scf_solve",
    "emit_results",
    "read_vectors",
]

SISV_MAGIC = b"SISV"
RECOVERY_ROUNDS = 3
COLLISION_NUDGE_FRACTION = 1e-8


class RecoveryExhausted(Exception):
    """Recovery rounds used up with eigenvalues still unaccounted for."""

    def __init__(self, deficits: dict[int, int]):
        self.deficits = dict(deficits)
        pretty = ", ".join(f"slice {j}: {m}" for j, m in sorted(deficits.items()))
        super().__init__(f"missing eigenvalues after {RECOVERY_ROUNDS} recovery rounds ({pretty})")


@dataclass
class SolverConfig:
    window: tuple[float, float] | None = None
    n_lowest: int | None = None
    n_shifts: int = 4
    probe_dim: int = 0  # 0 selects ~10 eigenpairs' headroom per expected slice member
    subspace_iters: int = 4
    tol: float = 1e-13
    lanczos_steps: int = 100
    shift_scheme: str = "expectation"
    width_rule: str = "max_gap"
    kmeans: bool = True
    worker_count: int = 1
    global_seed: int = 0
    max_outer_iters: int = 50
    trace_rel_tol: float = TRACE_REL_TOL
    initial_shifts: np.ndarray | None = None
    explain: bool = False

    def check(self) -> None:
        if (self.window is None) == (self.n_lowest is None):
            raise ValueError("exactly one of window or n_lowest must be set")
        if self.window is not None and not self.window[0] < self.window[1]:
            raise ValueError("window bounds inverted")
        if self.n_lowest is not None and self.n_lowest < 1:
            raise ValueError("n_lowest must be positive")
        if self.n_shifts < 1:
            raise ValueError("need at least one shift")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.worker_count < 1:
            raise ValueError("worker_count must be positive")
        if self.subspace_iters < 1:
            raise ValueError("subspace_iters must be positive")


@dataclass
class CommLog:
    """What a distributed run would exchange, counted per outer iteration."""

    gather_reals: list[int] = field(default_factory=list)
    gather_ints: list[int] = field(default_factory=list)
    transfer_reals: list[int] = field(default_factory=list)
    final_gather_reals: int = 0

    def start_iteration(self) -> None:
        self.gather_reals.append(0)
        self.gather_ints.append(0)
        self.transfer_reals.append(0)


@dataclass
class HistoryRow:
    iteration: int
    max_residual: float
    n_validated: int
    n_missing: int
    shift_max_move: float
    dissimilar: bool
    provenance: str


@dataclass
class WorkerSchedule:
    assignment: dict[int, int]
    loads: list[int]
    notes: list[str] = field(default_factory=list)

    def add_least_loaded(self, probe_id: int) -> int:
        worker = int(np.argmin(self.loads))
        self.assignment[probe_id] = worker
        self.loads[worker] += 1
        return worker


@dataclass
class ScfState:
    iteration: int
    shifts: np.ndarray
    probes: list[SpectralProbe]
    report: ValidationReport | None
    history: list[HistoryRow]
    converged: bool


@dataclass
class ResultSet:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    eigenvectors: np.ndarray
    source_probes: np.ndarray
    window: tuple[float, float]
    probe_dim: int
    iterations: int
    converged: bool
    status: str
    history: list[HistoryRow]
    comm: CommLog
    timings: dict[str, float]
    slices: list[dict]
    shifts: np.ndarray
    dos_model: DosModel | None
    verdicts: list = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def schedule_probes(probe_ids: list[int], worker_count: int) -> WorkerSchedule:
    """Round-robin probes over workers by position: probe j to worker j mod W."""
    assignment = {pid: j % worker_count for j, pid in enumerate(probe_ids)}
    loads = [0] * worker_count
    for w in assignment.values():
        loads[w] += 1
    notes = []
    if len(probe_ids) % worker_count != 0:
        notes.append(f"{len(probe_ids)} probes over {worker_count} workers: not load balanced")
    return WorkerSchedule(assignment=assignment, loads=loads, notes=notes)


def gather_summaries(probes: list[SpectralProbe]) -> tuple[dict, int, int]:
    """Global summary table every worker would hold after the all-gather.

    Returns (table, reals, ints) where reals/ints count the gathered payload:
    per probe its shift plus k Ritz values and k residual norms, and two
    integers (probe id, inertia count).  Vectors never travel here.
    """
    ordered = sorted(probes, key=lambda p: p.sigma)
    table = {
        "probe_id": np.array([p.probe_id for p in ordered], dtype=int),
        "sigma": np.array([p.sigma for p in ordered]),
        "inertia_neg": np.array([p.inertia_neg for p in ordered], dtype=int),
        "values": np.vstack([p.values for p in ordered]),
        "residuals": np.vstack([p.residuals for p in ordered]),
    }
    reals = sum(1 + p.values.size + p.residuals.size for p in ordered)
    ints = 2 * len(ordered)
    return table, reals, ints


def _edge_inertias(
    pencil: MatrixPencil,
    window: tuple[float, float],
    nudge: float,
) -> tuple[int, int]:
    counts = []
    for edge, direction in ((window[0], -1.0), (window[1], 1.0)):
        sigma = edge
        for _ in range(3):
            try:
                inertia = factor_ldlt(pencil.shifted(sigma)).inertia()
                if inertia.n_zero == 0:
                    counts.append(inertia.n_neg)
                    break
            except SingularPivot:
                pass
            # an eigenvalue sits on the edge: step outward, keeping the count
            sigma += direction * nudge
        else:
            raise SingularPivot(f"window edge {edge} keeps hitting eigenvalues")
    return counts[0], counts[1]


def _dos_shifts(model: DosModel, window: tuple[float, float], cfg: SolverConfig) -> ShiftSet:
    intervals = refine_clusters(model, window)
    intervals, notes = enforce_shift_count(model, intervals, cfg.n_shifts, window)
    shift_set = place_shifts(model, intervals, scheme=cfg.shift_scheme, window=window)
    shift_set.notes.extend(notes)
    return shift_set


def resolve_window(
    pencil: MatrixPencil,
    model: DosModel,
    n_lowest: int,
) -> tuple[float, float]:
    """Bracket the n_lowest eigenvalues: DOS guess verified by inertia counts."""
    theta_lo = float(model.centers.min())
    theta_hi = float(model.centers.max())
    span = max(theta_hi - theta_lo, 1e-3 * max(abs(theta_lo), 1.0))

    lam_min = theta_lo - 0.01 * span
    for _ in range(100):
        try:
            inertia = factor_ldlt(pencil.shifted(lam_min)).inertia()
            if inertia.n_zero == 0 and inertia.n_neg == 0:
                break
        except SingularPivot:
            pass
        lam_min -= 0.05 * span
    else:
        raise ValueError("could not bracket the spectrum from below")

    if n_lowest >= pencil.n:
        lam_max = theta_hi + 0.01 * span
    else:
        hi = theta_hi + 0.01 * span
        target = n_lowest + 0.5
        for _ in range(60):
            if cdos_eval(model, hi) > target:
                break
            hi += 0.05 * span
        lam_max = cdos_root(model, target, lam_min, hi)

    for _ in range(200):
        try:
            inertia = factor_ldlt(pencil.shifted(lam_max)).inertia()
            if inertia.n_zero == 0 and inertia.n_neg >= n_lowest:
                break
        except SingularPivot:
            pass
        lam_max += 0.02 * span
    else:
        raise ValueError(f"could not bracket the lowest {n_lowest} eigenvalues from above")
    return lam_min, lam_max


def _auto_probe_dim(n: int, n_e_est: int, n_shifts: int) -> int:
    return int(min(n, max(10, math.ceil(10.0 * max(n_e_est, 1) / n_shifts))))


def _strictly_ascending(shifts: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    lo, hi = window
    eps = 1e-12 * (hi - lo)
    out = np.clip(np.sort(np.asarray(shifts, dtype=float)), lo + eps, hi - eps)
    for j in range(1, len(out)):
        if out[j] <= out[j - 1]:
            out[j] = out[j - 1] + eps
    return out


def scf_solve(seq: PencilSequence, cfg: SolverConfig) -> ResultSet:
    """Run the outer loop over a pencil sequence (or one pencil to tolerance)."""
    cfg.check()
    timings: dict[str, float] = {}

    @contextmanager
    def phase(name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0

    fixed_mode = len(seq) == 1
    pencil = seq.pencil(0)
    n = pencil.n
    notes: list[str] = []

    with phase("dos"):
        model = estimate_dos(
            pencil, cfg.lanczos_steps, seed=[cfg.global_seed, 101], width_rule=cfg.width_rule
        )
        if cfg.n_lowest is not None:
            window = resolve_window(pencil, model, cfg.n_lowest)
        else:
            window = (float(cfg.window[0]), float(cfg.window[1]))
    width = window[1] - window[0]
    nudge = COLLISION_NUDGE_FRACTION * width

    n_e_est = count(model, *window).c
    k = cfg.probe_dim or _auto_probe_dim(n, n_e_est, cfg.n_shifts)
    probe_cfg = ProbeConfig(dim=k, iters=cfg.subspace_iters, collision_nudge=nudge)

    comm = CommLog()
    history: list[HistoryRow] = []
    last_slices: list[dict] = []
    last_verdicts: list = []

    shifts = np.empty(0)
    shift_provenance = "dos"
    probe_sigmas: dict[int, float] = {}
    seeds: dict[int, np.ndarray | None] = {}
    prev_probes: dict[int, SpectralProbe] = {}
    report: ValidationReport | None = None
    prev_x: np.ndarray | None = None
    prev_a: np.ndarray | None = None
    edge_cache: dict[int, tuple[int, int]] = {}
    schedule = WorkerSchedule({}, [0] * cfg.worker_count)

    converged = False
    status = "max_iterations"
    n_iterations = 0
    max_iters = cfg.max_outer_iters if fixed_mode else min(cfg.max_outer_iters, len(seq))

    for i in range(max_iters):
        pencil_index = 0 if fixed_mode else i
        pencil = seq.pencil(pencil_index)
        scale = float(np.linalg.norm(pencil.a, "fro"))
        dissimilar = False
        old_shifts = shifts.copy()
        comm.start_iteration()

        with phase("migrate"):
            if i == 0:
                if cfg.initial_shifts is not None:
                    shifts = _strictly_ascending(np.asarray(cfg.initial_shifts), window)
                    shift_provenance = "initial"
                else:
                    shifts = _dos_shifts(model, window, cfg).shifts
                    shift_provenance = "dos"
                probe_sigmas = {pid: float(s) for pid, s in enumerate(shifts)}
                seeds = {pid: None for pid in probe_sigmas}
                schedule = schedule_probes(sorted(probe_sigmas), cfg.worker_count)
            else:
                if not fixed_mode and prev_x is not None and prev_x.size:
                    cmp = trace_similarity(prev_x, prev_a, pencil.a, cfg.trace_rel_tol)
                    dissimilar = cmp.dissimilar
                if dissimilar:
                    with phase("dos"):
                        model = estimate_dos(
                            pencil, cfg.lanczos_steps,
                            seed=[cfg.global_seed, 101, i], width_rule=cfg.width_rule,
                        )
                        shifts = _dos_shifts(model, window, cfg).shifts
                    shift_provenance = "dos"
                    old = sorted(prev_probes.values(), key=lambda p: p.sigma)
                    probe_sigmas = {pid: float(s) for pid, s in enumerate(shifts)}
                    seeds = {}
                    for pid, s in probe_sigmas.items():
                        nearest = min(old, key=lambda p: abs(p.sigma - s))
                        seeds[pid] = nearest.vectors
                    schedule = schedule_probes(sorted(probe_sigmas), cfg.worker_count)
                    notes.append(f"iteration {i}: pencil dissimilar, shifts re-estimated")
                elif cfg.kmeans and report is not None and report.n_total >= cfg.n_shifts:
                    live = sorted(probe_sigmas)
                    if shift_provenance == "kmeans" and shifts.size == cfg.n_shifts:
                        init = shifts.copy()
                    else:
                        rng = np.random.default_rng([cfg.global_seed, 303, i])
                        init, short = kmeans_pp_init(report.values, cfg.n_shifts, rng)
                        if short:
                            qs = (np.arange(cfg.n_shifts) + 0.5) / cfg.n_shifts
                            init = np.quantile(report.values, qs)
                    clustering = kmeans_1d(report.values, cfg.n_shifts, init)
                    mapping = map_clusters_to_probes(
                        clustering, report.source_probes, probe_sigmas
                    )
                    plan = build_migration_plan(
                        clustering, mapping, report.values, report.source_probes,
                        report.vector_cols, live, cfg.n_shifts,
                    )
                    new_sigmas = dict(plan.shift_updates)
                    seeds = {
                        pid: prev_probes[pid].vectors
                        for pid in new_sigmas if pid in prev_probes
                    }
                    for pid in plan.deletions:
                        worker = schedule.assignment.pop(pid, None)
                        if worker is not None:
                            schedule.loads[worker] -= 1
                    for ins in plan.insertions:
                        donor = prev_probes[ins.donor_probe_id]
                        cols = list(ins.donor_vector_cols)
                        seeds[ins.new_probe_id] = donor.vectors[:, cols] if cols else None
                        worker = schedule.add_least_loaded(ins.new_probe_id)
                        if cols and worker != schedule.assignment.get(ins.donor_probe_id):
                            comm.transfer_reals[-1] += n * len(cols)
                    by_sigma = sorted(new_sigmas, key=new_sigmas.get)
                    ordered = _strictly_ascending(
                        np.array([new_sigmas[p] for p in by_sigma]), window
                    )
                    for pid, s in zip(by_sigma, ordered):
                        new_sigmas[pid] = float(s)
                    probe_sigmas = new_sigmas
                    shift_provenance = "kmeans"
                    notes.extend(f"iteration {i}: {note}" for note in plan.notes)
                else:
                    # shifts stay put; probes warm-start from their own blocks
                    seeds = {pid: prev_probes[pid].vectors for pid in probe_sigmas}
            shifts = np.sort(np.array(list(probe_sigmas.values())))
            if i == 0:
                shift_move = 0.0
            elif old_shifts.size == shifts.size:
                shift_move = float(np.max(np.abs(shifts - old_shifts)))
            else:
                shift_move = math.inf

        if pencil_index not in edge_cache:
            with phase("validate"):
                edge_cache[pencil_index] = _edge_inertias(pencil, window, nudge)
        edge_lo, edge_hi = edge_cache[pencil_index]

        probes: list[SpectralProbe] = []
        pending = sorted(probe_sigmas, key=lambda pid: probe_sigmas[pid])
        first_pass_missing = 0
        recovery_round = 0
        while True:
            with phase("probe"):
                for pid in pending:
                    rng = np.random.default_rng([cfg.global_seed, pid, i])
                    v0 = seed_block(seeds.get(pid), n, k, rng)
                    probes.append(
                        si_subspace_iteration(
                            pencil, probe_sigmas[pid], v0, probe_cfg, probe_id=pid, rng=rng
                        )
                    )
            pending = []
            _, reals, ints = gather_summaries(probes)
            comm.gather_reals[-1] += reals
            comm.gather_ints[-1] += ints

            with phase("validate"):
                verdicts = validate_probes(probes, window, edge_lo, edge_hi)
            missing = [v for v in verdicts if v.status == MISSING]
            if recovery_round == 0:
                first_pass_missing = sum(v.n_missing for v in missing)
            if not missing:
                break
            if recovery_round >= RECOVERY_ROUNDS:
                raise RecoveryExhausted({v.slice_index: v.n_missing for v in missing})
            with phase("dos"):
                additions = recover_missing(
                    pencil, verdicts, cfg.lanczos_steps,
                    seed=[cfg.global_seed, 505, i, recovery_round],
                    scheme=cfg.shift_scheme,
                )
            next_id = max(probe_sigmas) + 1
            taken = np.array(sorted(probe_sigmas.values()))
            for slice_index, new_shifts in additions:
                for s in new_shifts:
                    s = float(s)
                    while taken.size and np.min(np.abs(taken - s)) < 1e-9 * width:
                        s += 1e-6 * width
                    probe_sigmas[next_id] = s
                    seeds[next_id] = None
                    schedule.add_least_loaded(next_id)
                    pending.append(next_id)
                    taken = np.append(taken, s)
                    notes.append(
                        f"iteration {i}: recovery shift {s:.6g} added in slice {slice_index}"
                    )
                    next_id += 1
            recovery_round += 1

        with phase("assemble"):
            report = assemble_validated(verdicts)
            probes_by_id = {p.probe_id: p for p in probes}
            x = materialize_vectors(report, probes_by_id) if report.n_total else np.zeros((n, 0))

        max_res = float(report.residuals.max()) if report.n_total else math.inf
        # post-recovery the probe census may exceed n_shifts until migration
        shifts = np.sort(np.array(list(probe_sigmas.values())))
        history.append(
            HistoryRow(
                iteration=i,
                max_residual=max_res,
                n_validated=report.n_total,
                n_missing=first_pass_missing,
                shift_max_move=shift_move,
                dissimilar=dissimilar,
                provenance=shift_provenance,
            )
        )
        last_verdicts = verdicts
        last_slices = [
            {
                "index": v.slice_index,
                "lower": v.lower,
                "upper": v.upper,
                "n_exact": v.n_exact,
                "n_cand": v.n_cand,
                "status": v.status,
            }
            for v in verdicts
        ]

        prev_probes = probes_by_id
        prev_x = x
        prev_a = pencil.a
        n_iterations = i + 1

        if fixed_mode and max_res < cfg.tol * scale:
            converged = True
            status = "converged"
            break
    else:
        if not fixed_mode and max_iters == len(seq):
            converged = True
            status = "sequence_end"

    comm.final_gather_reals = int(prev_x.shape[0] * prev_x.shape[1]) if prev_x is not None else 0

    eigenvalues = report.values
    residuals = report.residuals
    sources = report.source_probes
    vectors = prev_x
    if cfg.n_lowest is not None and report.n_total > cfg.n_lowest:
        keep = slice(0, cfg.n_lowest)
        eigenvalues = eigenvalues[keep]
        residuals = residuals[keep]
        sources = sources[keep]
        vectors = vectors[:, keep]

    return ResultSet(
        eigenvalues=eigenvalues,
        residuals=residuals,
        eigenvectors=vectors,
        source_probes=sources,
        window=window,
        probe_dim=k,
        iterations=n_iterations,
        converged=converged,
        status=status,
        history=history,
        comm=comm,
        timings=timings,
        slices=last_slices,
        shifts=shifts,
        dos_model=model,
        verdicts=last_verdicts,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Artifact output


def _write_vectors(path: str, vectors: np.ndarray) -> None:
    n, k = vectors.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", SISV_MAGIC, n, k, 0))
        fh.write(np.ascontiguousarray(vectors, dtype="<f8").tobytes())


def read_vectors(path: str) -> np.ndarray:
    """Read a dense eigenvector block written by emit_results."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError(f"{path}: truncated header")
        magic, n, k, reserved = struct.unpack("<4sIII", header)
        if magic != SISV_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if reserved != 0:
            raise ValueError(f"{path}: nonzero reserved field")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * k:
        raise ValueError(f"{path}: expected {n * k} values, found {data.size}")
    return data.reshape(n, k).copy()


def _write_history_csv(path: str, history: list[HistoryRow]) -> None:
    with open(path, "w") as fh:
        fh.write("iter,max_residual,n_validated,n_missing\n")
        for row in history:
            fh.write(f"{row.iteration},{row.max_residual:.17g},{row.n_validated},{row.n_missing}\n")


def _render_history_figure(path: str, history: list[HistoryRow]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    iters = [row.iteration for row in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(iters, [max(row.max_residual, 1e-300) for row in history], "o-")
    for row in history:
        if row.dissimilar:
            ax.axvline(row.iteration, color="tab:red", alpha=0.4, linestyle="--")
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("max residual norm")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_dos_figure(
    path: str,
    model: DosModel,
    window: tuple[float, float],
    shifts: np.ndarray | None = None,
) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    omega = np.linspace(window[0], window[1], 800)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(omega, dos_eval(model, omega), label="density")
    ax.set_xlabel("omega")
    ax.set_ylabel("estimated density")
    ax2 = ax.twinx()
    ax2.plot(omega, cdos_eval(model, omega), color="tab:orange", label="cumulative")
    ax2.set_ylabel("estimated count")
    if shifts is not None:
        for s in shifts:
            ax.axvline(s, color="tab:green", alpha=0.4, linewidth=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_results(
    result: ResultSet,
    prefix: str,
    write_vectors: bool = True,
    figures: bool = True,
) -> dict[str, str]:
    """Write result artifacts under a path prefix; returns the paths written."""
    parent = os.path.dirname(os.path.abspath(prefix))
    os.makedirs(parent, exist_ok=True)
    paths: dict[str, str] = {}

    payload = {
        "window": list(result.window),
        "probe_dim": result.probe_dim,
        "iterations": result.iterations,
        "converged": result.converged,
        "status": result.status,
        "shifts": result.shifts.tolist(),
        "eigenvalues": result.eigenvalues.tolist(),
        "residual_norms": result.residuals.tolist(),
        "source_probes": result.source_probes.tolist(),
        "slices": result.slices,
        "timings": result.timings,
        "communication": {
            "gather_reals": result.comm.gather_reals,
            "gather_ints": result.comm.gather_ints,
            "transfer_reals": result.comm.transfer_reals,
            "final_gather_reals": result.comm.final_gather_reals,
        },
        "history": [
            {
                "iteration": row.iteration,
                "max_residual": row.max_residual,
                "n_validated": row.n_validated,
                "n_missing": row.n_missing,
                "dissimilar": row.dissimilar,
                "provenance": row.provenance,
            }
            for row in result.history
        ],
        "notes": result.notes,
    }
    json_path = f"{prefix}.json"
    try:
        with open(json_path, "w") as fh:
            json.dump(payload, fh, indent=2)
    except OSError as err:
        raise OSError(f"writing {json_path}: {err}") from err
    paths["json"] = json_path

    if write_vectors and result.eigenvectors.size:
        vec_path = f"{prefix}.sisv"
        _write_vectors(vec_path, result.eigenvectors)
        paths["vectors"] = vec_path

    hist_path = f"{prefix}_history.csv"
    _write_history_csv(hist_path, result.history)
    paths["history"] = hist_path

    if figures:
        fig_path = f"{prefix}_history.png"
        _render_history_figure(fig_path, result.history)
        paths["history_figure"] = fig_path
        if result.dos_model is not None:
            dos_fig = f"{prefix}_dos.png"
            render_dos_figure(dos_fig, result.dos_model, result.window, result.shifts)
            paths["dos_figure"] = dos_fig

    return paths
