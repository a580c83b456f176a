"""Two-stage regularized least squares, multistart branch search, and time scans.

The restoring system is solved in two stages: a regularized stage that pulls
the preserved channels toward 1 while nulling the cross channels, then an
unregularized polish from the stage-one point.  A branch counts as solved only
if the polished cross-channel residual is at acceptance level.  Scans repeat
the multistart search on a time grid and report peaks of the quality curve.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import csv
import json
from pathlib import Path

import numpy as np
import scipy.optimize
import scipy.signal

from .chain import ChainSpec, build_blocks, build_generator
from .propagator import Schedule, expm, total_propagator
from .restoring import (
    ACCEPTANCE_THRESHOLD,
    NoSolutionsError,
    RestoreProblem,
    TransferMap,
    quality,
    residuals,
    transfer_map,
)
from .textfmt import bool_str, fmt9, parse_bool

DEFAULT_TAU_STEP = 1.0 / 32.0
PEAK_PROMINENCE = 1e-3
SCAN_RESTARTS = 16
DEDUP_TOLERANCE = 1e-4


@dataclass(frozen=True)
class SolveOptions:
    """Solver knobs: regularization, tolerances, restart budget, seeding.

    ``restarts=None`` resolves per mode: 64 for the two-parameter template,
    32 for the high-dimensional modes.  ``max_iterations`` caps solver
    iterations per stage (each iteration costs about ``2*dim + 1`` residual
    evaluations with central-difference Jacobians).
    """

    mu: float = 1e-6
    max_iterations: int = 100
    gradient_tolerance: float = 1e-12
    residual_tolerance: float = ACCEPTANCE_THRESHOLD
    jacobian_step: float = 1e-7
    restarts: int | None = None
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.gradient_tolerance <= 0 or self.residual_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.restarts is not None and self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    def resolved_restarts(self, mode: str) -> int:
        if self.restarts is not None:
            return self.restarts
        return 64 if mode == "edges_center" else 32


@dataclass(frozen=True, eq=False)
class BranchResult:
    """One solved (or attempted) branch of the restoring system."""

    params: np.ndarray
    schedule: Schedule
    tmap: TransferMap
    residual_norm: float
    converged: bool


def finite_difference_jacobian(fn, x: np.ndarray, step: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of a vector function at ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        shift = np.zeros_like(x)
        shift[i] = step
        cols.append((np.asarray(fn(x + shift)) - np.asarray(fn(x - shift))) / (2.0 * step))
    return np.column_stack(cols)


def solve_lsq(
    residual_fn,
    initial: np.ndarray,
    bounds: tuple[float, float],
    opts: SolveOptions,
    tolerance: float | None = None,
) -> tuple[np.ndarray, float, bool]:
    """Bounded least squares from one starting point.

    Trust-region iteration with central-difference Jacobians; the squared
    residual norm never increases across accepted steps.  Returns the final
    point, its residual norm, and whether a convergence test fired (hitting
    the iteration cap reports ``converged=False``).
    """
    initial = np.asarray(initial, dtype=float)
    first = np.asarray(residual_fn(initial))
    if not np.all(np.isfinite(first)):
        raise ValueError("residual function is not finite at the initial point")
    tol = opts.gradient_tolerance if tolerance is None else tolerance
    dim = initial.size
    result = scipy.optimize.least_squares(
        residual_fn,
        initial,
        bounds=(np.full(dim, bounds[0]), np.full(dim, bounds[1])),
        method="trf",
        jac="3-point",
        diff_step=opts.jacobian_step,
        xtol=tol,
        ftol=tol,
        gtol=tol,
        max_nfev=opts.max_iterations * (2 * dim + 1),
    )
    return result.x, float(np.linalg.norm(result.fun)), bool(result.status > 0)


def _residual_evaluator(problem: RestoreProblem):
    """Residual closure with per-subinterval propagator caching.

    Each parameter perturbs at most one subinterval's rate column, so caching
    the per-column exponentials makes finite-difference sweeps cost roughly one
    exponential per evaluation instead of ``k_gamma``.
    """
    blocks = build_blocks(problem.spec)
    n = problem.spec.n_sites
    cache: dict = {}

    def tmap_of(params: np.ndarray) -> TransferMap:
        schedule = problem.expand(params)
        if len(cache) > 65536:
            cache.clear()
        total = np.eye(n, dtype=complex)
        for j, span in enumerate(schedule.interval_lengths):
            column = schedule.amplitudes[:, j]
            key = (j, column.tobytes())
            step = cache.get(key)
            if step is None:
                step = expm(build_generator(blocks, column) * span)
                cache[key] = step
            total = total @ step
        pset_like = _TotalOnly(total=total, tau_reg=schedule.tau_reg)
        return transfer_map(pset_like, problem.spec)

    def fn(params: np.ndarray, mu: float) -> np.ndarray:
        return residuals(tmap_of(params), mode=problem.mode, mu=mu)

    fn.tmap_of = tmap_of
    return fn


@dataclass(frozen=True, eq=False)
class _TotalOnly:
    """Duck-typed propagator carrying just the assembled product."""

    total: np.ndarray
    tau_reg: float


def two_stage_solve(
    problem: RestoreProblem, initial: np.ndarray, opts: SolveOptions | None = None
) -> BranchResult:
    """Regularized solve followed by an unregularized polish.

    Acceptance requires the polished cross-channel residual (plus the
    channel-equality components in ``equal_lambda`` mode) to be at most the
    acceptance threshold.  Accepted branches re-derive their transfer map from
    a fresh propagator assembly, independent of solver-side caching.
    """
    opts = opts or SolveOptions()
    evaluator = _residual_evaluator(problem)
    stage1_x, _, _ = solve_lsq(
        lambda p: evaluator(p, opts.mu), initial, problem.bounds, opts
    )
    stage2_x, norm, _ = solve_lsq(
        lambda p: evaluator(p, 0.0), stage1_x, problem.bounds, opts, tolerance=1e-14
    )
    accepted = norm <= opts.residual_tolerance
    schedule = problem.expand(stage2_x)
    if accepted:
        # why: acceptance must hold for an independent recomputation, not the
        # solver's cached factors
        pset = total_propagator(build_blocks(problem.spec), schedule)
        tmap = transfer_map(pset, problem.spec)
        norm = float(np.linalg.norm(residuals(tmap, mode=problem.mode, mu=0.0)))
        accepted = norm <= opts.residual_tolerance
    else:
        tmap = evaluator.tmap_of(stage2_x)
    return BranchResult(
        params=stage2_x,
        schedule=schedule,
        tmap=tmap,
        residual_norm=norm,
        converged=accepted,
    )


def _multistart_detailed(
    problem: RestoreProblem, opts: SolveOptions
) -> tuple[list[BranchResult], float]:
    rng = np.random.default_rng([opts.rng_seed, 0x5EED])
    lo, hi = problem.bounds
    branches: list[BranchResult] = []
    best_norm = np.inf
    for _ in range(opts.resolved_restarts(problem.mode)):
        start = rng.uniform(lo, hi, problem.parameter_dim)
        if rng.random() < 0.5:
            # why: the brightest restoring patterns are sparse (damping on a
            # through-path site attenuates the transferred coherence), so half
            # the starts are drawn near the minimal-damping corner of the box
            start[rng.random(problem.parameter_dim) < 0.75] = lo
        branch = two_stage_solve(problem, start, opts)
        best_norm = min(best_norm, branch.residual_norm)
        if not branch.converged:
            continue
        duplicate = any(
            np.max(np.abs(branch.schedule.amplitudes - kept.schedule.amplitudes))
            < DEDUP_TOLERANCE
            for kept in branches
        )
        if not duplicate:
            branches.append(branch)
    return branches, best_norm


def multistart(problem: RestoreProblem, opts: SolveOptions | None = None) -> list[BranchResult]:
    """Seeded multistart search; returns distinct accepted branches in restart order."""
    return _multistart_detailed(problem, opts or SolveOptions())[0]


# --- scanning ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScanRecord:
    """Best accepted branch (if any) at one grid time."""

    tau_reg: float
    best_lambda: float
    lambda01: complex
    lambda10: complex
    residual_norm: float
    converged: bool
    schedule: Schedule | None


@dataclass(frozen=True, eq=False)
class ScanResult:
    """Quality curve over the time grid plus peak bookkeeping."""

    grid: tuple[float, ...]
    records: tuple[ScanRecord, ...]
    peaks: tuple[int, ...]


def make_grid(tau_min: float, tau_max: float, tau_step: float = DEFAULT_TAU_STEP) -> list[float]:
    if tau_step <= 0:
        raise ValueError("tau_step must be positive")
    if tau_max < tau_min:
        raise ValueError("empty scan range")
    count = int(np.floor((tau_max - tau_min) / tau_step + 1e-9)) + 1
    return [tau_min + i * tau_step for i in range(count)]


def scan(
    spec: ChainSpec,
    mode: str,
    tau_min: float,
    tau_max: float,
    tau_step: float = DEFAULT_TAU_STEP,
    opts: SolveOptions | None = None,
    jobs: int = 1,
    mu: float = 1e-6,
    bounds: tuple[float, float] = (0.0, 1.0),
    k_gamma: int = 3,
) -> ScanResult:
    """Multistart search on an inclusive time grid, with peak detection.

    Unsolved grid points are recorded with quality 0 and ``converged=False``.
    Grid points are independent tasks; with ``jobs > 1`` they are distributed
    over processes and merged by grid index, so results do not depend on the
    parallel split.  Per-point restarts default to a scan-specific budget
    (templates have few, well-separated branches; pass ``opts.restarts`` to
    override).
    """
    opts = opts or SolveOptions()
    grid = make_grid(tau_min, tau_max, tau_step)
    payloads = [
        (spec, mode, mu, bounds, k_gamma, tau, index, opts)
        for index, tau in enumerate(grid)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            indexed = list(pool.map(_scan_point_task, payloads, chunksize=8))
    else:
        indexed = [_scan_point_task(p) for p in payloads]
    records = [rec for _, rec in sorted(indexed, key=lambda item: item[0])]
    heights = np.array([r.best_lambda for r in records])
    peak_idx, _ = scipy.signal.find_peaks(heights, prominence=PEAK_PROMINENCE)
    ordered = sorted(peak_idx.tolist(), key=lambda i: -heights[i])
    return ScanResult(grid=tuple(grid), records=tuple(records), peaks=tuple(ordered))


def _scan_point_task(payload) -> tuple[int, ScanRecord]:
    spec, mode, mu, bounds, k_gamma, tau, index, opts = payload
    if tau <= 0.0:
        # why: grids may legitimately start at 0, where no admissible
        # schedule exists; report the point as unsolved instead of failing
        record = ScanRecord(
            tau_reg=tau,
            best_lambda=0.0,
            lambda01=0j,
            lambda10=0j,
            residual_norm=float("nan"),
            converged=False,
            schedule=None,
        )
        return index, record
    problem = RestoreProblem(
        spec=spec, tau_reg=tau, mode=mode, mu=mu, bounds=bounds, k_gamma=k_gamma
    )
    point_opts = SolveOptions(
        mu=opts.mu,
        max_iterations=opts.max_iterations,
        gradient_tolerance=opts.gradient_tolerance,
        residual_tolerance=opts.residual_tolerance,
        jacobian_step=opts.jacobian_step,
        restarts=opts.restarts if opts.restarts is not None else SCAN_RESTARTS,
        rng_seed=_point_seed(opts.rng_seed, index),
    )
    branches, best_norm = _multistart_detailed(problem, point_opts)
    if not branches:
        record = ScanRecord(
            tau_reg=tau,
            best_lambda=0.0,
            lambda01=0j,
            lambda10=0j,
            residual_norm=best_norm if np.isfinite(best_norm) else float("nan"),
            converged=False,
            schedule=None,
        )
        return index, record
    lam, best = quality([b.tmap for b in branches], mode=mode)
    chosen = branches[best]
    record = ScanRecord(
        tau_reg=tau,
        best_lambda=lam,
        lambda01=chosen.tmap.lambda01,
        lambda10=chosen.tmap.lambda10,
        residual_norm=chosen.residual_norm,
        converged=True,
        schedule=chosen.schedule,
    )
    return index, record


def _point_seed(base_seed: int, index: int) -> int:
    # why: a documented, stable derivation so scans are reproducible across runs
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


# --- file output -------------------------------------------------------------

SCAN_CSV_HEADER = ["tau_reg", "lambda", "abs_lambda01", "abs_lambda10", "residual_norm", "converged"]


def write_scan_csv(result: ScanResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCAN_CSV_HEADER)
        for rec in result.records:
            writer.writerow(
                [
                    fmt9(rec.tau_reg),
                    fmt9(rec.best_lambda),
                    fmt9(abs(rec.lambda01)),
                    fmt9(abs(rec.lambda10)),
                    fmt9(rec.residual_norm),
                    bool_str(rec.converged),
                ]
            )


def read_scan_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SCAN_CSV_HEADER:
            raise ValueError(f"{path} is not a scan CSV")
        rows = []
        for row in reader:
            rows.append(
                {
                    "tau_reg": float(row[0]),
                    "lambda": float(row[1]),
                    "abs_lambda01": float(row[2]),
                    "abs_lambda10": float(row[3]),
                    "residual_norm": float(row[4]),
                    "converged": parse_bool(row[5]),
                }
            )
    return rows


def write_peaks_json(result: ScanResult, path: str | Path) -> None:
    entries = []
    for rank, idx in enumerate(result.peaks, start=1):
        rec = result.records[idx]
        entries.append(
            {
                "rank": rank,
                "grid_index": idx,
                "tau_reg": rec.tau_reg,
                "lambda": rec.best_lambda,
            }
        )
    Path(path).write_text(json.dumps(entries, indent=2) + "\n")


def read_peaks_json(path: str | Path) -> list[dict]:
    return json.loads(Path(path).read_text())
