"""Piecewise-constant damping schedules and the coherence-row propagator.

A schedule splits the registration window into an optional control-free lead-in
followed by ``k_gamma`` subintervals; each site holds a constant damping rate
within each subinterval.  The total propagator is the time-ordered product of
one matrix exponential per segment, composed left-to-right so that the
coherence row multiplies it from the right.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .chain import HamiltonianBlocks, build_generator
from .textfmt import fmt9


class ScheduleError(ValueError):
    """Raised for schedules that violate the admissibility rules."""


AMPLITUDE_LOW = 0.0
AMPLITUDE_HIGH = 1.0


@dataclass(frozen=True, eq=False)
class Schedule:
    """Admissible piecewise-constant control: amplitudes[site, subinterval].

    ``interval_lengths`` are the positive durations of the control
    subintervals; ``free_interval`` is the control-free lead-in, so the total
    registration time is ``free_interval + sum(interval_lengths)``.
    Amplitudes are bounded to [0, 1] and must vanish outside
    ``controlled_sites`` (default: every site may be controlled).
    """

    n_sites: int
    k_gamma: int
    interval_lengths: tuple[float, ...]
    amplitudes: np.ndarray
    free_interval: float = 0.0
    controlled_sites: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.k_gamma < 1:
            raise ScheduleError(f"k_gamma must be >= 1, got {self.k_gamma}")
        lengths = tuple(float(x) for x in self.interval_lengths)
        if len(lengths) != self.k_gamma:
            raise ScheduleError(f"expected {self.k_gamma} interval lengths, got {len(lengths)}")
        if any(x <= 0.0 for x in lengths):
            raise ScheduleError("interval lengths must be positive")
        if self.free_interval < 0.0:
            raise ScheduleError("free interval must be nonnegative")
        amp = np.array(self.amplitudes, dtype=float)
        if amp.shape != (self.n_sites, self.k_gamma):
            raise ScheduleError(
                f"amplitudes shape {amp.shape} does not match (n_sites, k_gamma) = "
                f"({self.n_sites}, {self.k_gamma})"
            )
        if np.any(amp < AMPLITUDE_LOW) or np.any(amp > AMPLITUDE_HIGH):
            raise ScheduleError("amplitudes must lie in [0, 1]")
        if self.controlled_sites is not None:
            allowed = set(self.controlled_sites)
            if not allowed <= set(range(1, self.n_sites + 1)):
                raise ScheduleError("controlled_sites outside 1..n_sites")
            free_rows = [k for k in range(1, self.n_sites + 1) if k not in allowed]
            if free_rows and np.any(amp[np.array(free_rows) - 1, :] != 0.0):
                raise ScheduleError("nonzero amplitude on a site outside controlled_sites")
        amp.flags.writeable = False
        object.__setattr__(self, "interval_lengths", lengths)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "free_interval", float(self.free_interval))

    @property
    def tau_reg(self) -> float:
        return self.free_interval + float(sum(self.interval_lengths))

    @classmethod
    def equal_intervals(
        cls,
        n_sites: int,
        tau_reg: float,
        amplitudes: np.ndarray,
        k_gamma: int = 3,
        free_interval: float = 0.0,
    ) -> "Schedule":
        """Schedule with the control window split into equal subintervals."""
        if tau_reg <= free_interval:
            raise ScheduleError("tau_reg must exceed the free interval")
        span = (tau_reg - free_interval) / k_gamma
        return cls(
            n_sites=n_sites,
            k_gamma=k_gamma,
            interval_lengths=(span,) * k_gamma,
            amplitudes=amplitudes,
            free_interval=free_interval,
        )


def eval_schedule(schedule: Schedule, site: int, tau: float) -> float:
    """Damping rate on ``site`` (1-based) at time ``tau``.

    Subintervals are right-closed: the boundary instant belongs to the earlier
    subinterval.  Times inside the control-free lead-in report rate 0.
    """
    if not 1 <= site <= schedule.n_sites:
        raise ScheduleError(f"site {site} outside 1..{schedule.n_sites}")
    if tau < 0.0 or tau > schedule.tau_reg:
        raise ScheduleError(f"time {tau} outside [0, {schedule.tau_reg}]")
    if tau <= schedule.free_interval:
        return 0.0
    edge = schedule.free_interval
    for j, span in enumerate(schedule.interval_lengths):
        edge += span
        if tau <= edge:
            return float(schedule.amplitudes[site - 1, j])
    return float(schedule.amplitudes[site - 1, -1])


def expm(matrix: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade, via scipy).

    Thin wrapper that enforces a square, finite input; kept as the single
    exponential entry point so every propagator factor goes through one code
    path.
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix exponential needs a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix exponential needs finite entries")
    return scipy.linalg.expm(m)


@dataclass(frozen=True, eq=False)
class PropagatorSet:
    """Per-segment propagators and their time-ordered product."""

    free_propagator: np.ndarray
    step_propagators: tuple[np.ndarray, ...]
    total: np.ndarray
    tau_reg: float


def total_propagator(blocks: HamiltonianBlocks, schedule: Schedule) -> PropagatorSet:
    """Time-ordered propagator of the coherence row over the whole window.

    The free lead-in factor comes first, then one factor per control
    subinterval; the row picks the factors up from the right, so the product
    is assembled left-to-right in chronological order.
    """
    n = schedule.n_sites
    if blocks.h1.shape[0] != n:
        raise ScheduleError(
            f"blocks built for {blocks.h1.shape[0]} sites, schedule has {n}"
        )
    zero = np.zeros(n)
    if schedule.free_interval > 0.0:
        free = expm(build_generator(blocks, zero) * schedule.free_interval)
    else:
        free = np.eye(n, dtype=complex)
    steps = []
    total = free.copy()
    for j, span in enumerate(schedule.interval_lengths):
        gen = build_generator(blocks, schedule.amplitudes[:, j])
        step = expm(gen * span)
        steps.append(step)
        total = total @ step
    return PropagatorSet(
        free_propagator=free,
        step_propagators=tuple(steps),
        total=total,
        tau_reg=schedule.tau_reg,
    )


def reversal_permutation(n_sites: int) -> np.ndarray:
    """Permutation matrix J that reverses site order (site k <-> site N+1-k)."""
    return np.eye(n_sites)[::-1].copy()


def is_centrally_symmetric(schedule: Schedule, tol: float = 0.0) -> bool:
    """True if the pattern is invariant under reversing sites and subintervals.

    Central symmetry requires a[k, j] == a[N+1-k, K+1-j] for all cells and a
    reversal-symmetric list of interval lengths.
    """
    amp = schedule.amplitudes
    lengths = np.asarray(schedule.interval_lengths)
    amp_ok = np.max(np.abs(amp - amp[::-1, ::-1])) <= tol
    len_ok = np.max(np.abs(lengths - lengths[::-1])) <= tol
    return bool(amp_ok and len_ok)


# --- serialization ---------------------------------------------------------


def schedule_to_dict(schedule: Schedule) -> dict:
    return {
        "n_sites": schedule.n_sites,
        "k_gamma": schedule.k_gamma,
        "interval_lengths": list(schedule.interval_lengths),
        "amplitudes": schedule.amplitudes.tolist(),
        "free_interval": schedule.free_interval,
    }


def schedule_from_dict(data: dict) -> Schedule:
    return Schedule(
        n_sites=int(data["n_sites"]),
        k_gamma=int(data["k_gamma"]),
        interval_lengths=tuple(float(x) for x in data["interval_lengths"]),
        amplitudes=np.asarray(data["amplitudes"], dtype=float),
        free_interval=float(data.get("free_interval", 0.0)),
    )


def save_schedule_json(schedule: Schedule, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schedule_to_dict(schedule), indent=2) + "\n")


def load_schedule_json(path: str | Path) -> Schedule:
    return schedule_from_dict(json.loads(Path(path).read_text()))


def write_heatmap_csv(schedule: Schedule, path: str | Path) -> None:
    """Amplitude table as CSV: rows are sites top-to-bottom, columns subintervals."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site"] + [f"subinterval_{j + 1}" for j in range(schedule.k_gamma)])
        for k in range(schedule.n_sites):
            writer.writerow([k + 1] + [fmt9(v) for v in schedule.amplitudes[k]])


def read_heatmap_csv(path: str | Path) -> np.ndarray:
    """Parse a heatmap CSV back into the amplitude matrix."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "site":
        raise ScheduleError(f"{path} is not a schedule heatmap CSV")
    return np.array([[float(v) for v in row[1:]] for row in rows[1:]], dtype=float)
