"""Coherence restoring over a dephasing-damped spin chain.

The package models an XXZ chain with all-node dipole couplings whose first two
sites carry a sender state and whose last two sites are read out as a
receiver.  Piecewise-constant site-local dephasing rates act as controls; the
library builds the single-excitation propagator, extracts the sender-to-
receiver transfer map, and solves for rate schedules that null the map's
cross-talk entries so the receiver ends in a scaled copy of the sender's
coherences.
"""

from .chain import (
    ChainSpec,
    HamiltonianBlocks,
    InvalidChainError,
    InvalidRateError,
    build_blocks,
    build_couplings,
    build_generator,
)
from .optimize import (
    BranchResult,
    ScanRecord,
    ScanResult,
    SolveOptions,
    make_grid,
    multistart,
    read_scan_csv,
    scan,
    solve_lsq,
    two_stage_solve,
    write_peaks_json,
    write_scan_csv,
)
from .oracle import (
    ORACLE_MAX_SITES,
    OracleScaleError,
    build_full_hamiltonian,
    certify,
    lindblad_rhs,
    make_sender_state,
    receiver_coherences,
    reduced_receiver_coherences,
    rk4_evolve,
)
from .propagator import (
    PropagatorSet,
    Schedule,
    ScheduleError,
    expm,
    is_centrally_symmetric,
    load_schedule_json,
    read_heatmap_csv,
    reversal_permutation,
    save_schedule_json,
    total_propagator,
    write_heatmap_csv,
)
from .restoring import (
    ACCEPTANCE_THRESHOLD,
    MODES,
    BoundViolationError,
    NoSolutionsError,
    RestoreProblem,
    TransferMap,
    load_transfer_map_json,
    quality,
    residuals,
    save_transfer_map_json,
    transfer_map,
)

__version__ = "0.1.0"

__all__ = [
    "ACCEPTANCE_THRESHOLD",
    "MODES",
    "ORACLE_MAX_SITES",
    "BoundViolationError",
    "BranchResult",
    "ChainSpec",
    "HamiltonianBlocks",
    "InvalidChainError",
    "InvalidRateError",
    "NoSolutionsError",
    "OracleScaleError",
    "PropagatorSet",
    "RestoreProblem",
    "ScanRecord",
    "ScanResult",
    "Schedule",
    "ScheduleError",
    "SolveOptions",
    "TransferMap",
    "build_blocks",
    "build_couplings",
    "build_full_hamiltonian",
    "build_generator",
    "certify",
    "expm",
    "is_centrally_symmetric",
    "lindblad_rhs",
    "load_schedule_json",
    "load_transfer_map_json",
    "make_grid",
    "make_sender_state",
    "multistart",
    "quality",
    "read_heatmap_csv",
    "read_scan_csv",
    "receiver_coherences",
    "reduced_receiver_coherences",
    "residuals",
    "reversal_permutation",
    "rk4_evolve",
    "save_schedule_json",
    "save_transfer_map_json",
    "scan",
    "solve_lsq",
    "total_propagator",
    "transfer_map",
    "two_stage_solve",
    "write_heatmap_csv",
    "write_peaks_json",
    "write_scan_csv",
    "__version__",
]
