"""
Brute-force reference dynamics for small discrete baths.

The system is coupled to a finite set of bath modes,

    H_tot = H + sum omega_l b_l^dagger b_l
              + sum (conj(g_l) L_j b_l^dagger + g_l L_j^dagger b_l),

the joint state starts as ``psi0 (x) |vacuum>`` and is propagated exactly;
the bath is then traced out. Fermionic ladder operators carry
Jordan-Wigner parity strings over the preceding bath modes, so they
anticommute among themselves while commuting with every system operator.
Bosonic modes are truncated at ``n_max`` quanta.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from .bcf import Mode, discrete_bath_modes
from .core import Statistics, SystemSpec, TimeGrid, validate_system

MAX_TOTAL_DIM = 1 << 22
DENSE_LIMIT = 2048
FOCK_CONVERGENCE_TOL = 1e-8


class DimensionGuard(ValueError):
    pass


class FockNotConverged(ArithmeticError):
    pass


@dataclass(frozen=True)
class DiscreteBathSpec:
    """Discrete bath; ``couplings[j]`` and ``frequencies[j]`` list the modes of channel ``j``."""

    couplings: tuple[tuple[complex, ...], ...]
    frequencies: tuple[tuple[float, ...], ...]
    statistics: Statistics = Statistics.FERMIONIC
    n_max: int = 1

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(tuple(complex(g) for g in c) for c in self.couplings))
        object.__setattr__(self, "frequencies", tuple(tuple(float(w) for w in f) for f in self.frequencies))
        object.__setattr__(self, "statistics", Statistics.parse(self.statistics))
        if len(self.couplings) != len(self.frequencies):
            raise ValueError("couplings and frequencies need one entry per channel")
        for c, f in zip(self.couplings, self.frequencies):
            if len(c) != len(f):
                raise ValueError("each channel needs as many frequencies as couplings")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")

    @property
    def n_channels(self) -> int:
        return len(self.couplings)

    @property
    def n_modes(self) -> int:
        return sum(len(c) for c in self.couplings)

    @property
    def levels(self) -> int:
        return 2 if self.statistics is Statistics.FERMIONIC else self.n_max + 1

    def flat(self) -> list[tuple[int, complex, float]]:
        """``(channel, g, omega)`` for every mode in a fixed order."""
        return [
            (j, g, w)
            for j, (cs, ws) in enumerate(zip(self.couplings, self.frequencies))
            for g, w in zip(cs, ws)
        ]

    def hierarchy_modes(self) -> list[list[Mode]]:
        """One single-exponential channel per bath mode (see :func:`per_mode_channels`)."""
        return [[m] for m in sum(bath_to_modes(self), [])]

    def with_cutoff(self, n_max: int) -> "DiscreteBathSpec":
        return DiscreteBathSpec(self.couplings, self.frequencies, self.statistics, n_max)


def bath_to_modes(bath: DiscreteBathSpec) -> list[list[Mode]]:
    """Per-channel BCF modes ``|g|^2 exp(-i omega t)``."""
    return [discrete_bath_modes(c, f) for c, f in zip(bath.couplings, bath.frequencies)]


def per_mode_channels(spec: SystemSpec, bath: DiscreteBathSpec) -> tuple[SystemSpec, list[list[Mode]]]:
    """Split every bath mode into its own channel (same coupling operator).

    Hierarchies need exponential BCFs; a discrete mode gives one undamped
    exponential, so a channel with ``M`` modes becomes ``M`` channels.
    """
    flat = bath.flat()
    couplings = tuple(spec.couplings[j] for j, _, _ in flat)
    split = SystemSpec(spec.hamiltonian, couplings, bath.statistics, spec.psi0)
    return split, bath.hierarchy_modes()


def ladder_operators(n_modes: int, statistics: Statistics, n_max: int = 1) -> list[sparse.csr_matrix]:
    """Annihilators ``b_l`` on the bath space, mode 0 being the most significant factor."""
    statistics = Statistics.parse(statistics)
    if statistics is Statistics.FERMIONIC:
        a = sparse.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
        z = sparse.csr_matrix(np.diag([1.0, -1.0]))
        eye = sparse.identity(2, format="csr")
        ops = []
        for lam in range(n_modes):
            factors = [z] * lam + [a] + [eye] * (n_modes - lam - 1)
            ops.append(reduce(lambda x, y: sparse.kron(x, y, format="csr"), factors, sparse.identity(1, format="csr")))
        return ops
    a = sparse.csr_matrix(np.diag(np.sqrt(np.arange(1, n_max + 1)), 1))
    eye = sparse.identity(n_max + 1, format="csr")
    ops = []
    for lam in range(n_modes):
        factors = [eye] * lam + [a] + [eye] * (n_modes - lam - 1)
        ops.append(reduce(lambda x, y: sparse.kron(x, y, format="csr"), factors, sparse.identity(1, format="csr")))
    return ops


def total_hamiltonian(spec: SystemSpec, bath: DiscreteBathSpec) -> sparse.csr_matrix:
    if bath.n_channels != spec.n_channels:
        raise ValueError(f"bath has {bath.n_channels} channels, system has {spec.n_channels}")
    D = spec.dim
    n = bath.n_modes
    total = D * bath.levels**n
    if total > MAX_TOTAL_DIM:
        raise DimensionGuard(f"total dimension {total} exceeds {MAX_TOTAL_DIM}")
    b = ladder_operators(n, bath.statistics, bath.n_max)
    bath_dim = bath.levels**n
    eye_s = sparse.identity(D, format="csr")
    eye_b = sparse.identity(bath_dim, format="csr")
    H = sparse.kron(sparse.csr_matrix(spec.hamiltonian), eye_b, format="csr")
    for lam, (j, g, w) in enumerate(bath.flat()):
        L = sparse.csr_matrix(spec.couplings[j])
        bd = b[lam].conj().T
        H = H + w * sparse.kron(eye_s, bd @ b[lam], format="csr")
        H = H + np.conj(g) * sparse.kron(L, bd, format="csr") + g * sparse.kron(L.conj().T, b[lam], format="csr")
    return H.tocsr()


def partial_trace(states: np.ndarray, D: int) -> np.ndarray:
    """``Tr_env |Psi><Psi|`` for states of shape ``(..., D * bath_dim)``."""
    psi = states.reshape(states.shape[:-1] + (D, -1))
    return np.einsum("...ab,...cb->...ac", psi, psi.conj())


@dataclass
class OracleResult:
    times: np.ndarray
    rho: np.ndarray  # (n_t, D, D)
    norm: np.ndarray  # |Psi_t|
    total_dim: int


def exact_propagate(spec: SystemSpec, bath: DiscreteBathSpec, grid: TimeGrid | Sequence[float]) -> OracleResult:
    """Exact reduced dynamics on the grid (or at the given times)."""
    validate_system(spec)
    times = grid.times if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    H = total_hamiltonian(spec, bath)
    n_tot = H.shape[0]
    psi0 = np.zeros(n_tot, dtype=complex)
    psi0.reshape(spec.dim, -1)[:, 0] = spec.initial_state()
    if n_tot <= DENSE_LIMIT:
        evals, evecs = np.linalg.eigh(H.toarray())
        c = evecs.conj().T @ psi0
        states = (np.exp(-1j * np.outer(times - times[0], evals)) * c) @ evecs.T
    else:
        states = np.empty((len(times), n_tot), dtype=complex)
        states[0] = psi0
        A = (-1j * H).tocsc()
        for i in range(1, len(times)):
            states[i] = expm_multiply(A * (times[i] - times[i - 1]), states[i - 1])
    return OracleResult(times, partial_trace(states, spec.dim), np.linalg.norm(states, axis=1), n_tot)


def converged_bosonic(
    spec: SystemSpec, bath: DiscreteBathSpec, grid, tol: float = FOCK_CONVERGENCE_TOL, max_n: int = 40
) -> tuple[OracleResult, int]:
    """Raise the Fock cutoff until one more quantum changes rho by less than ``tol``."""
    if bath.statistics is not Statistics.BOSONIC:
        raise ValueError("Fock cutoff convergence only applies to bosonic baths")
    n = bath.n_max
    prev = exact_propagate(spec, bath.with_cutoff(n), grid)
    while n < max_n:
        cur = exact_propagate(spec, bath.with_cutoff(n + 1), grid)
        if np.max(np.abs(cur.rho - prev.rho)) < tol:
            return prev, n
        prev, n = cur, n + 1
    raise FockNotConverged(f"Fock cutoff not converged up to n_max={max_n}")


__all__ = [
    "DiscreteBathSpec",
    "bath_to_modes",
    "per_mode_channels",
    "ladder_operators",
    "total_hamiltonian",
    "partial_trace",
    "exact_propagate",
    "converged_bosonic",
    "OracleResult",
    "DimensionGuard",
    "FockNotConverged",
]
