"""Command line front end.

Four subcommands: ``solve`` runs one pencil to tolerance, ``scf`` walks a
pencil sequence from a manifest, ``dos`` tabulates the estimated spectral
density, ``synth`` generates a synthetic sequence on disk.  Exit codes:
0 success, 2 the solver stopped at the iteration cap, 3 recovery could not
account for every eigenvalue, 4 bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .dos import count, estimate_dos, write_dos_csv
from .driver import (
    RecoveryExhausted,
    ResultSet,
    SolverConfig,
    emit_results,
    render_dos_figure,
    scf_solve,
)
from .partition import ShiftSet, SpectralInterval, partition_report
from .pencil import (
    MatrixMarketError,
    MatrixPencil,
    PencilSequence,
    SyntheticSpectrumSpec,
    load_manifest,
    load_matrix_market,
    save_matrix_market,
    synth_sequence,
)
from .validate import validation_table

EXIT_OK = 0
EXIT_NO_CONVERGENCE = 2
EXIT_RECOVERY = 3
EXIT_INPUT = 4


def _add_pencil_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--matrix-a", required=True, help="symmetric A in Matrix Market format")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--matrix-b", help="symmetric positive definite B in Matrix Market format")
    g.add_argument("--b-identity", action="store_true", help="take B as the identity")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"),
                   help="eigenvalue window (LO, HI]")
    g.add_argument("--nev", type=int, metavar="K", help="compute the K lowest eigenpairs")
    p.add_argument("--shifts", type=int, required=True, metavar="NS",
                   help="number of spectral probes")
    p.add_argument("--probe-dim", type=int, default=0, metavar="K",
                   help="columns per probe (default: sized from the density estimate)")
    p.add_argument("--iters", type=int, default=4, metavar="M",
                   help="inner subspace iterations per probe per outer pass")
    p.add_argument("--tol", type=float, default=1e-13,
                   help="relative residual tolerance (fixed-pencil mode)")
    p.add_argument("--lanczos-steps", type=int, default=100, metavar="L")
    p.add_argument("--shift-scheme", choices=("midpoint", "expectation"),
                   default="expectation")
    p.add_argument("--no-kmeans", action="store_true",
                   help="keep shifts fixed between outer iterations")
    p.add_argument("--workers", type=int, default=1, metavar="W")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--max-outer", type=int, default=50, metavar="I",
                   help="outer iteration cap")
    p.add_argument("--out", metavar="PREFIX",
                   help="write results (JSON, vectors, history CSV, figures) under PREFIX")
    p.add_argument("--explain", action="store_true",
                   help="print the partition and slice validation tables")


def _load_pencil(args) -> MatrixPencil:
    a = load_matrix_market(args.matrix_a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{args.matrix_a}: A must be square, got {a.shape}")
    b = None
    if args.matrix_b:
        b = load_matrix_market(args.matrix_b)
        if b.shape != a.shape:
            raise ValueError(f"B has shape {b.shape}, A has shape {a.shape}")
    return MatrixPencil(a, b)


def _config_from_args(args) -> SolverConfig:
    return SolverConfig(
        window=tuple(args.range) if args.range else None,
        n_lowest=args.nev,
        n_shifts=args.shifts,
        probe_dim=args.probe_dim,
        subspace_iters=args.iters,
        tol=args.tol,
        lanczos_steps=args.lanczos_steps,
        shift_scheme=args.shift_scheme,
        kmeans=not args.no_kmeans,
        worker_count=args.workers,
        global_seed=args.seed,
        max_outer_iters=args.max_outer,
        explain=args.explain,
    )


def _explain_text(result: ResultSet) -> str:
    # shifts own Voronoi cells of the window; estimated counts come from the
    # density model so the table stays meaningful after k-means moves
    s = result.shifts
    lo, hi = result.window
    edges = np.concatenate(([lo], 0.5 * (s[:-1] + s[1:]), [hi]))
    intervals = [
        SpectralInterval(float(edges[j]), float(edges[j + 1]),
                         count(result.dos_model, float(edges[j]), float(edges[j + 1])).gamma)
        for j in range(len(s))
    ]
    provenance = result.history[-1].provenance if result.history else "dos"
    shift_set = ShiftSet(shifts=s, window=result.window, provenance=provenance,
                         intervals=intervals, notes=list(result.notes))
    parts = [partition_report(result.dos_model, shift_set)]
    if result.verdicts:
        parts.append(validation_table(result.verdicts))
    return "\n".join(parts)


def _report(result: ResultSet, args) -> int:
    print(f"status: {result.status} after {result.iterations} outer iteration(s)")
    print(f"window [{result.window[0]:.6g}, {result.window[1]:.6g}]  "
          f"shifts {result.shifts.size}  probe dim {result.probe_dim}")
    if result.eigenvalues.size:
        print(f"eigenvalues: {result.eigenvalues.size}  "
              f"max residual norm {result.residuals.max():.3e}")
    else:
        print("eigenvalues: none found in window")
    if args.explain:
        print(_explain_text(result))
    if args.out:
        paths = emit_results(result, args.out)
        print("wrote:", " ".join(sorted(paths.values())))
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def _cmd_solve(args) -> int:
    pencil = _load_pencil(args)
    seq = PencilSequence(a_list=[pencil.a], b=pencil.b)
    return _report(scf_solve(seq, _config_from_args(args)), args)


def _cmd_scf(args) -> int:
    seq = load_manifest(args.manifest)
    return _report(scf_solve(seq, _config_from_args(args)), args)


def _cmd_dos(args) -> int:
    pencil = _load_pencil(args)
    model = estimate_dos(pencil, args.lanczos_steps, seed=[args.seed, 101])
    if args.range:
        lo, hi = args.range
    else:
        span = float(model.centers.max() - model.centers.min()) or 1.0
        lo = float(model.centers.min()) - 0.05 * span
        hi = float(model.centers.max()) + 0.05 * span
    if not lo < hi:
        raise ValueError("empty density range")
    write_dos_csv(args.out, model, lo, hi, args.grid)
    fig_path = os.path.splitext(args.out)[0] + ".png"
    render_dos_figure(fig_path, model, (lo, hi))
    print(f"wrote: {args.out} {fig_path}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    with open(args.spec) as fh:
        spec = SyntheticSpectrumSpec.from_dict(json.load(fh))
    if args.n is not None and spec.total_count() != args.n:
        raise ValueError(f"cluster counts sum to {spec.total_count()}, expected {args.n}")
    seq = synth_sequence(spec, args.iters, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)

    b_path = None
    if seq.b is not None:
        b_path = "b.mtx"
        save_matrix_market(os.path.join(args.out_dir, b_path), seq.b)
    a_paths = []
    for i, a in enumerate(seq.a_list):
        name = f"a_{i:03d}.mtx"
        save_matrix_market(os.path.join(args.out_dir, name), a)
        a_paths.append(name)
    with open(os.path.join(args.out_dir, "manifest.json"), "w") as fh:
        json.dump({"b_path": b_path, "a_paths": a_paths}, fh, indent=2)
    with open(os.path.join(args.out_dir, "spectra.csv"), "w") as fh:
        for lam in seq.true_spectra:
            fh.write(",".join(f"{v:.17g}" for v in lam) + "\n")
    print(f"wrote {len(a_paths)} pencil(s) under {args.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specslice",
        description="spectrum-sliced symmetric generalized eigensolver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one pencil to tolerance")
    _add_pencil_flags(p_solve)
    _add_solver_flags(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_scf = sub.add_parser("scf", help="track eigenpairs along a pencil sequence")
    p_scf.add_argument("--manifest", required=True,
                       help="sequence manifest (file list or synthetic recipe)")
    _add_solver_flags(p_scf)
    p_scf.set_defaults(func=_cmd_scf)

    p_dos = sub.add_parser("dos", help="tabulate the estimated spectral density")
    _add_pencil_flags(p_dos)
    p_dos.add_argument("--grid", type=int, default=200, metavar="NPTS")
    p_dos.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))
    p_dos.add_argument("--lanczos-steps", type=int, default=100, metavar="L")
    p_dos.add_argument("--seed", type=int, default=0, metavar="S")
    p_dos.add_argument("--out", required=True, metavar="CSV")
    p_dos.set_defaults(func=_cmd_dos)

    p_synth = sub.add_parser("synth", help="generate a synthetic pencil sequence")
    p_synth.add_argument("--spec", required=True, help="spectrum recipe JSON")
    p_synth.add_argument("--n", type=int, help="expected matrix order (checked)")
    p_synth.add_argument("--iters", type=int, default=1)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out-dir", required=True)
    p_synth.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RecoveryExhausted as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RECOVERY
    except (MatrixMarketError, ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
