"""Brute-force validator: full-space dissipative dynamics on small chains.

Everything here works with dense 2^N x 2^N operators and fixed-step
integration, deliberately avoiding the excitation-block shortcut used by the
production pipeline, so the two paths can certify each other end to end:
the sender's coherences are planted in a full product state, evolved under the
complete master equation, and read back off the receiver pair by partial
trace.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .chain import ChainSpec, HamiltonianBlocks, build_blocks
from .propagator import Schedule, total_propagator

ORACLE_MAX_SITES = 8


class OracleScaleError(ValueError):
    """Raised when a full-space computation is requested beyond the size cap."""


def pauli_halves() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Halved Pauli matrices (spin-1/2 operators) as dense complex arrays."""
    x = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)
    y = np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex)
    z = np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex)
    return x, y, z


def embed(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Lift a single-site operator to the full space; site 1 is the most
    significant tensor factor."""
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} outside 1..{n_sites}")
    eye = np.eye(2, dtype=complex)
    out = np.array([[1.0 + 0j]])
    for k in range(1, n_sites + 1):
        out = np.kron(out, op if k == site else eye)
    return out


def build_full_hamiltonian(spec: ChainSpec) -> np.ndarray:
    """Dense interaction Hamiltonian over all site pairs."""
    n = spec.n_sites
    if n > ORACLE_MAX_SITES:
        raise OracleScaleError(f"full-space oracle capped at {ORACLE_MAX_SITES} sites, got {n}")
    x, y, z = pauli_halves()
    dim = 2**n
    ham = np.zeros((dim, dim), dtype=complex)
    xs = [embed(x, k, n) for k in range(1, n + 1)]
    ys = [embed(y, k, n) for k in range(1, n + 1)]
    zs = [embed(z, k, n) for k in range(1, n + 1)]
    for i in range(n):
        for j in range(i + 1, n):
            d = spec.coupling[i, j]
            ham += d * (xs[i] @ xs[j] + ys[i] @ ys[j] - 2.0 * zs[i] @ zs[j])
    return ham


def z_diagonal_values(n_sites: int) -> np.ndarray:
    """Diagonal of each site's halved Z in the computational basis: (n, 2^n)."""
    dim = 2**n_sites
    basis = np.arange(dim)
    values = np.empty((n_sites, dim))
    for site in range(1, n_sites + 1):
        bits = (basis >> (n_sites - site)) & 1
        values[site - 1] = 0.5 - bits
    return values


def lindblad_rhs(
    rho: np.ndarray,
    ham: np.ndarray,
    rates: np.ndarray,
    zdiag: np.ndarray | None = None,
) -> np.ndarray:
    """Right side of the master equation with site-selective dephasing.

    The dephasing part is sum_i gamma_i (Z_i rho Z_i - rho/4); because every
    Z_i is diagonal, it reduces to an entrywise mask on rho.
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0.0):
        raise ValueError("damping rates must be nonnegative")
    n = rates.size
    if zdiag is None:
        zdiag = z_diagonal_values(n)
    mask = (zdiag.T * rates) @ zdiag - rates.sum() / 4.0
    return -1j * (ham @ rho - rho @ ham) + rho * mask


def rk4_evolve(
    rho0: np.ndarray,
    ham: np.ndarray,
    schedule: Schedule,
    t_final: float | None = None,
    step: float = 1e-3,
) -> np.ndarray:
    """Classical fixed-step integration with rate changes at segment edges.

    Within each schedule segment the step is shrunk to divide the segment
    exactly (never enlarged), so rate switches land on step boundaries.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    tau_reg = schedule.tau_reg
    t_final = tau_reg if t_final is None else t_final
    if t_final < 0 or t_final > tau_reg + 1e-12:
        raise ValueError(f"t_final {t_final} outside [0, {tau_reg}]")
    n = schedule.n_sites
    zdiag = z_diagonal_values(n)
    segments = [(schedule.free_interval, np.zeros(n))]
    for j, span in enumerate(schedule.interval_lengths):
        segments.append((span, schedule.amplitudes[:, j]))
    rho = np.array(rho0, dtype=complex)
    elapsed = 0.0
    for span, rates in segments:
        if span <= 0.0:
            continue
        remaining = t_final - elapsed
        if remaining <= 1e-15:
            break
        seg = min(span, remaining)
        mask = (zdiag.T * np.asarray(rates, dtype=float)) @ zdiag - float(np.sum(rates)) / 4.0
        count = max(1, math.ceil(seg / step - 1e-12))
        h = seg / count
        for _ in range(count):
            k1 = -1j * (ham @ rho - rho @ ham) + rho * mask
            r2 = rho + (0.5 * h) * k1
            k2 = -1j * (ham @ r2 - r2 @ ham) + r2 * mask
            r3 = rho + (0.5 * h) * k2
            k3 = -1j * (ham @ r3 - r3 @ ham) + r3 * mask
            r4 = rho + h * k3
            k4 = -1j * (ham @ r4 - r4 @ ham) + r4 * mask
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        elapsed += seg
    return rho


def receiver_coherences(rho: np.ndarray, spec: ChainSpec) -> tuple[complex, complex]:
    """Partial-trace the state down to the receiver pair and read its
    ground-to-one-excitation coherences.

    Returns (c01, c10) where the two-bit receiver label is (site N-1, site N);
    c01 is the coherence to the state with site N flipped, c10 with site N-1
    flipped.
    """
    n = spec.n_sites
    rest = 2 ** (n - 2)
    reduced = np.trace(rho.reshape(rest, 4, rest, 4), axis1=0, axis2=2)
    return complex(reduced[0, 1]), complex(reduced[0, 2])


def make_sender_state(c01: complex, c10: complex) -> np.ndarray:
    """A valid two-qubit sender density matrix carrying given coherences.

    The coherences sit between the ground component and the two one-excitation
    components; magnitudes up to 0.1 keep the matrix positive semidefinite by a
    Schur-complement margin.
    """
    if abs(c01) > 0.1 + 1e-12 or abs(c10) > 0.1 + 1e-12:
        raise ValueError("coherence amplitudes above 0.1 are not certified positive")
    state = np.zeros((4, 4), dtype=complex)
    state[0, 0] = 0.4
    state[1, 1] = 0.3
    state[2, 2] = 0.3
    state[0, 1] = c01
    state[1, 0] = np.conj(c01)
    state[0, 2] = c10
    state[2, 0] = np.conj(c10)
    return state


def initial_full_state(spec: ChainSpec, sender_state: np.ndarray) -> np.ndarray:
    """Sender state on sites 1-2, everything else in the ground state."""
    rest = 2 ** (spec.n_sites - 2)
    tail = np.zeros((rest, rest), dtype=complex)
    tail[0, 0] = 1.0
    return np.kron(sender_state, tail)


def reduced_receiver_coherences(
    blocks: HamiltonianBlocks, schedule: Schedule, sender_state: np.ndarray
) -> tuple[complex, complex]:
    """Receiver coherences predicted by the excitation-block pipeline.

    The coherence row starts with the sender state's two one-excitation
    coherences (site 1 then site 2) and zeros elsewhere; after applying the
    total propagator, the last two entries are the receiver coherences.
    """
    n = schedule.n_sites
    row = np.zeros(n, dtype=complex)
    row[0] = sender_state[0, 2]
    row[1] = sender_state[0, 1]
    out = row @ total_propagator(blocks, schedule).total
    return complex(out[n - 1]), complex(out[n - 2])


def extract_blocks_from_full(ham: np.ndarray, n_sites: int) -> tuple[float, np.ndarray]:
    """Restrict a full Hamiltonian to its 0- and 1-excitation blocks."""
    flips = [2 ** (n_sites - k) for k in range(1, n_sites + 1)]
    h0 = float(ham[0, 0].real)
    h1 = np.array([[ham[a, b] for b in flips] for a in flips])
    return h0, h1.real


def certify(
    n_sites: int,
    seeds: list[int],
    step: float = 1e-3,
    tau_range: tuple[float, float] = (1.0, 10.0),
    k_gamma: int = 3,
    coherence: float = 0.1,
    tolerance: float = 1e-6,
) -> list[dict]:
    """Cross-validate the block pipeline against full-space integration.

    One randomized case per seed: random amplitudes in [0, 1], random
    subinterval lengths, random readout time, random sender coherence phases.
    Each report entry carries the largest receiver-coherence discrepancy.
    """
    if n_sites > ORACLE_MAX_SITES:
        raise OracleScaleError(f"full-space oracle capped at {ORACLE_MAX_SITES} sites, got {n_sites}")
    spec = ChainSpec.uniform(n_sites)
    blocks = build_blocks(spec)
    ham = build_full_hamiltonian(spec)
    report = []
    for seed in seeds:
        rng = np.random.default_rng([int(seed), n_sites])
        tau = rng.uniform(*tau_range)
        lengths = rng.dirichlet(np.ones(k_gamma)) * tau
        amplitudes = rng.uniform(0.0, 1.0, size=(n_sites, k_gamma))
        schedule = Schedule(
            n_sites=n_sites,
            k_gamma=k_gamma,
            interval_lengths=tuple(lengths),
            amplitudes=amplitudes,
        )
        phases = rng.uniform(0.0, 2.0 * np.pi, size=2)
        sender = make_sender_state(
            coherence * np.exp(1j * phases[0]), coherence * np.exp(1j * phases[1])
        )
        full = rk4_evolve(initial_full_state(spec, sender), ham, schedule, step=step)
        got = receiver_coherences(full, spec)
        want = reduced_receiver_coherences(blocks, schedule, sender)
        err = float(max(abs(got[0] - want[0]), abs(got[1] - want[1])))
        report.append(
            {
                "N": n_sites,
                "seed": int(seed),
                "max_abs_error": err,
                "pass": bool(err <= tolerance),
            }
        )
    return report


def write_certify_json(report: list[dict], path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=2) + "\n")


def read_certify_json(path: str | Path) -> list[dict]:
    return json.loads(Path(path).read_text())
