"""Transfer map, restoring residuals, transmission quality, and control templates.

The coherence row starts with excitations on the two sender sites (1 and 2) and
is read out on the two receiver sites (N-1 and N).  Two-qubit labels on each
segment are read from that segment's outer chain end inward, so label ``01``
means "excitation on the inner site" for the sender (site 2) and for the
receiver alike (site N-1), while ``10`` means the outer site (sender site 1,
receiver site N).  The preserved channels therefore connect every sender site
with its mirror image:

    lambda01: site 2 -> site N-1        lambda10: site 1 -> site N

and the restoring conditions null the two cross channels:

    delta1:   site 1 -> site N-1        delta2:   site 2 -> site N

For mirror-symmetric control patterns the propagator obeys J U J = U^T (J the
site-reversal permutation), which forces delta1 == delta2 exactly; the cross
channels then cost a single complex condition, which is why the two-parameter
template below admits isolated exact solutions, while lambda01 and lambda10
remain independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chain import ChainSpec, InvalidChainError
from .propagator import PropagatorSet, Schedule

MODES = ("full", "symmetric", "edges_center", "equal_lambda")


class NoSolutionsError(LookupError):
    """Raised when a quality value is requested from an empty solution list."""


class BoundViolationError(ValueError):
    """Raised when template parameters leave the amplitude box."""


ACCEPTANCE_THRESHOLD = 1e-8


@dataclass(frozen=True)
class TransferMap:
    """The four propagator entries that decide restoring at time ``tau_reg``."""

    lambda01: complex
    lambda10: complex
    delta1: complex
    delta2: complex
    tau_reg: float

    @property
    def residual_norm(self) -> float:
        return math.sqrt(abs(self.delta1) ** 2 + abs(self.delta2) ** 2)

    @property
    def min_modulus(self) -> float:
        return min(abs(self.lambda01), abs(self.lambda10))

    @property
    def max_modulus(self) -> float:
        return max(abs(self.lambda01), abs(self.lambda10))


def transfer_map(pset: PropagatorSet, spec: ChainSpec) -> TransferMap:
    """Extract the preserved and cross channels from a total propagator."""
    if spec.sender_sites is None or spec.receiver_sites is None:
        raise InvalidChainError("transfer map needs sender and receiver pairs (N >= 4)")
    if set(spec.sender_sites) & set(spec.receiver_sites):
        raise InvalidChainError("sender and receiver sites overlap")
    n = spec.n_sites
    total = pset.total
    return TransferMap(
        lambda01=complex(total[1, n - 2]),
        lambda10=complex(total[0, n - 1]),
        delta1=complex(total[0, n - 2]),
        delta2=complex(total[1, n - 1]),
        tau_reg=pset.tau_reg,
    )


def residuals(tmap: TransferMap, mode: str = "full", mu: float = 0.0) -> np.ndarray:
    """Real residual vector whose squared norm is the solver objective.

    Always starts with the four cross-channel components.  A positive ``mu``
    appends regularization components pulling both preserved channels toward 1;
    ``equal_lambda`` mode appends the channel-difference components.
    """
    if mu < 0.0:
        raise ValueError("mu must be nonnegative")
    parts = [
        tmap.delta1.real,
        tmap.delta1.imag,
        tmap.delta2.real,
        tmap.delta2.imag,
    ]
    if mu > 0.0:
        root = math.sqrt(mu)
        parts.extend(
            [
                root * (1.0 - tmap.lambda01).real,
                root * (1.0 - tmap.lambda01).imag,
                root * (1.0 - tmap.lambda10).real,
                root * (1.0 - tmap.lambda10).imag,
            ]
        )
    if mode == "equal_lambda":
        diff = tmap.lambda01 - tmap.lambda10
        parts.extend([diff.real, diff.imag])
    return np.array(parts)


def quality(tmaps: list[TransferMap], mode: str = "full") -> tuple[float, int]:
    """Transmission quality over accepted solution branches.

    Returns ``(lambda, best_index)`` where lambda maximises the smaller
    preserved-channel modulus across branches; in ``equal_lambda`` mode the two
    moduli agree by construction, so the first channel's modulus is maximised.
    """
    if not tmaps:
        raise NoSolutionsError("no accepted solution branches")
    if mode == "equal_lambda":
        scores = [abs(t.lambda01) for t in tmaps]
    else:
        scores = [t.min_modulus for t in tmaps]
    best = int(np.argmax(scores))
    return scores[best], best


def center_sites(n_sites: int) -> tuple[int, ...]:
    """The one or two middle sites of the chain (1-based)."""
    if n_sites % 2 == 1:
        return ((n_sites + 1) // 2,)
    return (n_sites // 2, n_sites // 2 + 1)


def symmetry_orbits(n_sites: int, k_gamma: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Cell orbits under simultaneous site and subinterval reversal.

    Each orbit is a pair of (site, subinterval) cells (0-based); self-paired
    cells appear with both members equal.  Orbits are listed row-major by their
    representative cell.
    """
    orbits = []
    seen = set()
    for k in range(n_sites):
        for j in range(k_gamma):
            if (k, j) in seen:
                continue
            mirror = (n_sites - 1 - k, k_gamma - 1 - j)
            seen.add((k, j))
            seen.add(mirror)
            orbits.append(((k, j), mirror))
    return orbits


@dataclass(frozen=True, eq=False)
class RestoreProblem:
    """A restoring task: chain, readout time, template mode, and solver box."""

    spec: ChainSpec
    tau_reg: float
    mode: str = "full"
    mu: float = 1e-6
    bounds: tuple[float, float] = (0.0, 1.0)
    k_gamma: int = 3

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.tau_reg <= 0.0:
            raise ValueError("tau_reg must be positive")
        if self.bounds[0] >= self.bounds[1]:
            raise ValueError("lower bound must be below upper bound")

    @property
    def parameter_dim(self) -> int:
        n, k = self.spec.n_sites, self.k_gamma
        if self.mode in ("full", "equal_lambda"):
            return n * k
        if self.mode == "symmetric":
            return math.ceil(n * k / 2)
        return 2  # edges_center

    def expand(self, params: np.ndarray) -> Schedule:
        """Turn a parameter vector into an admissible equal-interval schedule."""
        params = np.asarray(params, dtype=float)
        if params.shape != (self.parameter_dim,):
            raise BoundViolationError(
                f"expected {self.parameter_dim} parameters, got shape {params.shape}"
            )
        lo, hi = self.bounds
        if np.any(params < lo) or np.any(params > hi):
            raise BoundViolationError("parameters outside the bound box")
        n, k = self.spec.n_sites, self.k_gamma
        amps = np.zeros((n, k))
        if self.mode in ("full", "equal_lambda"):
            amps[:] = params.reshape(n, k)
        elif self.mode == "symmetric":
            for value, (cell, mirror) in zip(params, symmetry_orbits(n, k)):
                amps[cell] = value
                amps[mirror] = value
        else:  # edges_center
            edge_rate, center_rate = params
            if k < 3:
                raise BoundViolationError("edges_center template needs k_gamma >= 3")
            amps[[n - 2, n - 1], 0] = edge_rate
            for site in center_sites(n):
                amps[site - 1, 1] = center_rate
            amps[[0, 1], k - 1] = edge_rate
        return Schedule.equal_intervals(
            n_sites=n, tau_reg=self.tau_reg, amplitudes=amps, k_gamma=k
        )


# --- serialization ---------------------------------------------------------


def transfer_map_to_dict(tmap: TransferMap) -> dict:
    return {
        "tau_reg": tmap.tau_reg,
        "lambda01": [tmap.lambda01.real, tmap.lambda01.imag],
        "lambda10": [tmap.lambda10.real, tmap.lambda10.imag],
        "delta1": [tmap.delta1.real, tmap.delta1.imag],
        "delta2": [tmap.delta2.real, tmap.delta2.imag],
        "residual_norm": tmap.residual_norm,
    }


def transfer_map_from_dict(data: dict) -> TransferMap:
    def as_complex(pair: list[float]) -> complex:
        return complex(pair[0], pair[1])

    return TransferMap(
        lambda01=as_complex(data["lambda01"]),
        lambda10=as_complex(data["lambda10"]),
        delta1=as_complex(data["delta1"]),
        delta2=as_complex(data["delta2"]),
        tau_reg=float(data["tau_reg"]),
    )


def save_transfer_map_json(tmap: TransferMap, path: str | Path) -> None:
    Path(path).write_text(json.dumps(transfer_map_to_dict(tmap), indent=2) + "\n")


def load_transfer_map_json(path: str | Path) -> TransferMap:
    return transfer_map_from_dict(json.loads(Path(path).read_text()))
