"""Spectrum-slicing eigensolver for sequences of symmetric definite pencils."""

from .dos import DosModel, count, estimate_dos
from .driver import (
    CommLog,
    RecoveryExhausted,
    ResultSet,
    SolverConfig,
    emit_results,
    read_vectors,
    scf_solve,
)
from .linalg import NotPositiveDefinite, SingularPivot, factor_ldlt, solve_ldlt
from .pencil import (
    MatrixMarketError,
    MatrixPencil,
    PencilSequence,
    SpectrumCluster,
    SyntheticSpectrumSpec,
    load_manifest,
    load_matrix_market,
    save_matrix_market,
    synth_pencil,
    synth_sequence,
)
from .probe import ProbeConfig, SpectralProbe, si_subspace_iteration
from .validate import OutstandingMissing, ValidationReport, validate_probes

__version__ = "0.1.0"

__all__ = [
    "CommLog",
    "DosModel",
    "MatrixMarketError",
    "MatrixPencil",
    "NotPositiveDefinite",
    "OutstandingMissing",
    "PencilSequence",
    "ProbeConfig",
    "RecoveryExhausted",
    "ResultSet",
    "SingularPivot",
    "SolverConfig",
    "SpectralProbe",
    "SpectrumCluster",
    "SyntheticSpectrumSpec",
    "ValidationReport",
    "count",
    "emit_results",
    "estimate_dos",
    "factor_ldlt",
    "load_manifest",
    "load_matrix_market",
    "read_vectors",
    "save_matrix_market",
    "scf_solve",
    "si_subspace_iteration",
    "solve_ldlt",
    "synth_pencil",
    "synth_sequence",
    "validate_probes",
]
