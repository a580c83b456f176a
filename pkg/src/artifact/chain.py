"""Spin-chain model: dipolar couplings, excitation blocks, and the damped coherence generator.

The chain is a line of spin-1/2 sites with inverse-cube couplings normalised so
that the nearest-neighbour coupling is 1 (which also fixes the dimensionless
time unit).  Because the Hamiltonian conserves the number of flipped spins, the
dynamics of a single flipped spin closes on an N-dimensional block; everything
downstream works inside that block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidChainError(ValueError):
    """Raised for chain descriptions that cannot represent a valid line."""


class InvalidRateError(ValueError):
    """Raised when a damping rate is negative."""


def build_couplings(n_sites: int) -> np.ndarray:
    """Return the symmetric coupling matrix D with D[i, j] = 1/|i-j|^3.

    The diagonal is zero and the nearest-neighbour coupling is exactly 1.
    """
    if n_sites < 2:
        raise InvalidChainError(f"need at least 2 sites, got {n_sites}")
    idx = np.arange(n_sites)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
    with np.errstate(divide="ignore"):
        coupling = 1.0 / dist**3
    np.fill_diagonal(coupling, 0.0)
    return coupling


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Immutable description of the chain: length, end segments, couplings.

    ``sender_sites`` and ``receiver_sites`` are 1-based site pairs at the two
    ends of the line; they are ``None`` for chains too short to carry both
    (fewer than 4 sites), which is enough for block-construction tests.
    """

    n_sites: int
    sender_sites: tuple[int, int] | None
    receiver_sites: tuple[int, int] | None
    coupling: np.ndarray

    def __post_init__(self) -> None:
        if self.n_sites < 2:
            raise InvalidChainError(f"need at least 2 sites, got {self.n_sites}")
        c = np.asarray(self.coupling, dtype=float)
        if c.shape != (self.n_sites, self.n_sites):
            raise InvalidChainError(f"coupling shape {c.shape} does not match n_sites={self.n_sites}")
        if not np.allclose(c, c.T):
            raise InvalidChainError("coupling matrix must be symmetric")
        if np.any(np.diag(c) != 0.0):
            raise InvalidChainError("coupling diagonal must be zero")
        off = c[~np.eye(self.n_sites, dtype=bool)]
        if np.any(off <= 0.0):
            raise InvalidChainError("couplings must be positive off the diagonal")
        for pair in (self.sender_sites, self.receiver_sites):
            if pair is not None:
                if len(pair) != 2 or not all(1 <= s <= self.n_sites for s in pair):
                    raise InvalidChainError(f"site pair {pair} outside 1..{self.n_sites}")
        if self.sender_sites is not None and self.receiver_sites is not None:
            if set(self.sender_sites) & set(self.receiver_sites):
                raise InvalidChainError("sender and receiver sites must be disjoint")
        object.__setattr__(self, "coupling", _frozen(c))

    @classmethod
    def uniform(cls, n_sites: int) -> "ChainSpec":
        """Standard chain: inverse-cube couplings, sender {1,2}, receiver {N-1,N}."""
        coupling = build_couplings(n_sites)
        if n_sites >= 4:
            sender: tuple[int, int] | None = (1, 2)
            receiver: tuple[int, int] | None = (n_sites - 1, n_sites)
        else:
            sender = receiver = None
        return cls(n_sites=n_sites, sender_sites=sender, receiver_sites=receiver, coupling=coupling)


@dataclass(frozen=True, eq=False)
class HamiltonianBlocks:
    """Zero- and one-excitation blocks of the chain Hamiltonian.

    ``h0`` is the scalar energy of the no-flip state; ``h1`` is the real
    symmetric N x N block acting on single-flip states.
    """

    h0: float
    h1: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "h1", _frozen(np.asarray(self.h1, dtype=float)))


def build_blocks(spec: ChainSpec) -> HamiltonianBlocks:
    """Project the full interaction onto the 0- and 1-flip subspaces.

    With X/Y/Z denoting halved Pauli operators and the interaction
    sum_{j>i} D_ij (X_i X_j + Y_i Y_j - 2 Z_i Z_j):

    * the no-flip state has energy h0 = -(1/2) * sum_{j>i} D_ij;
    * flipping site k and l are coupled with amplitude D_kl / 2;
    * the diagonal entry for a flip at site k is h0 + sum_{i != k} D_ik,
      because the flip changes the sign of every ZZ bond touching site k.
    """
    coupling = spec.coupling
    n = spec.n_sites
    h0 = -0.5 * float(np.sum(np.triu(coupling, 1)))
    h1 = coupling / 2.0
    h1[np.diag_indices(n)] = h0 + coupling.sum(axis=1)
    return HamiltonianBlocks(h0=h0, h1=h1)


def build_generator(blocks: HamiltonianBlocks, rates: np.ndarray) -> np.ndarray:
    """Generator of the coherence row between the 0-flip and 1-flip sectors.

    The row evolves as rho1(t) = rho1(t0) @ expm(u * (t - t0)), i.e. the row is
    multiplied by propagators from the right.  Site-selective dephasing at rate
    a_k damps the k-th row entry at rate a_k / 2 without mixing entries:

        u = -i (h0 * I - h1) - (1/2) diag(rates)
    """
    n = blocks.h1.shape[0]
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (n,):
        raise InvalidRateError(f"expected {n} rates, got shape {rates.shape}")
    if np.any(rates < 0.0):
        raise InvalidRateError("damping rates must be nonnegative")
    return -1j * (blocks.h0 * np.eye(n) - blocks.h1) - 0.5 * np.diag(rates)
