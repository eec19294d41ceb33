"""
Deterministic hierarchies of auxiliary density operators.

Auxiliary operators ``rho^(m,n)`` are indexed by pairs stored as one
length-``2J`` index (``m`` first). The right-hand side is a sum of terms of
the form ``coef * A rho^(q) B`` coupling position ``q`` to position ``p``;
the same term list drives both the direct evaluation (:func:`master_rhs`)
and the assembled sparse generator used for propagation.

Fermionic hierarchy (binary ``m``, ``n``)::

    d rho = -i[H, rho] - (m.w + n.conj(w)) rho
          + sum_j  s(m, j) g_j L_j rho^(m-e_j, n) + s(n, j) conj(g_j) rho^(m, n-e_j) L_j^+
          - sum_j [s(m, j) L_j^+ rho^(m+e_j, n) - (-1)^|n| o(m, j) rho^(m+e_j, n) L_j^+]
          + sum_j [(-1)^|m| o(n, j) L_j rho^(m, n+e_j) - s(n, j) rho^(m, n+e_j) L_j]

with ``s(k, j) = (-1)^(k_{j+1} + ... + k_J)`` and the ordering sign
``o(k, j) = (-1)^(k_1 + ... + k_{j-1})``. The ordering sign comes from
moving the derivation operator of channel ``j`` past the lower channels
when a Novikov average is converted back into an auxiliary operator; with
``ordering_sign=False`` it is replaced by one (only correct for a single
hierarchy dimension, kept for comparison).

Bosonic hierarchy::

    d rho = -i[H, rho] - (m.w + n.conj(w)) rho
          + sum_j m_j g_j L_j rho^(m-e_j, n) + n_j conj(g_j) rho^(m, n-e_j) L_j^+
          - sum_j [L_j^+, rho^(m+e_j, n)] + sum_j [L_j, rho^(m, n+e_j)]
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .core import (
    Method,
    Statistics,
    SystemSpec,
    TimeGrid,
    hierarchy_dimensions,
    integrate,
    validate_system,
)
from .indexset import IndexSpace, Truncation, pair_space, sign_tables, split_pair


@dataclass(frozen=True)
class _Term:
    out: np.ndarray
    src: np.ndarray
    coef: np.ndarray
    left: Optional[np.ndarray]
    right: Optional[np.ndarray]


@dataclass
class MasterModel:
    """A pair space together with its coupling terms."""

    space: IndexSpace
    dim: int
    terms: list[_Term]
    swap: np.ndarray  # position of (n, m) for each (m, n)

    @property
    def size(self) -> int:
        return len(self.space)

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        """Apply the hierarchy to an ``(n, D, D)`` stack of operators."""
        out = np.zeros_like(rho)
        for term in self.terms:
            x = rho[term.src]
            if term.left is not None:
                x = term.left @ x
            if term.right is not None:
                x = x @ term.right
            out[term.out] += term.coef[:, None, None] * x
        return out

    def generator(self) -> sparse.csr_matrix:
        """Sparse matrix acting on the row-major flattening of the stack."""
        D = self.dim
        n = self.size
        eye = sparse.identity(D, format="csr", dtype=complex)
        total = sparse.csr_matrix((n * D * D, n * D * D), dtype=complex)
        for term in self.terms:
            P = sparse.csr_matrix((term.coef, (term.out, term.src)), shape=(n, n))
            A = sparse.csr_matrix(term.left) if term.left is not None else eye
            B = sparse.csr_matrix(term.right.T) if term.right is not None else eye
            total = total + sparse.kron(P, sparse.kron(A, B), format="csr")
        return total.tocsr()

    def pairing_residual(self, rho: np.ndarray) -> float:
        """``max || rho^(m,n)^dagger - rho^(n,m) ||`` over the stack."""
        return float(np.max(np.abs(np.conj(np.swapaxes(rho, 1, 2)) - rho[self.swap])))

    def initial(self, psi0: np.ndarray) -> np.ndarray:
        rho = np.zeros((self.size, self.dim, self.dim), dtype=complex)
        rho[0] = np.outer(psi0, np.conj(psi0))
        return rho


def _swap_table(space: IndexSpace) -> np.ndarray:
    J = space.n_channels // 2
    swap = np.empty(len(space), dtype=np.int64)
    for p, k in enumerate(space.indices.tolist()):
        q = space.position(k[J:] + k[:J])
        if q is None:
            raise ValueError("pair space is not closed under (m, n) -> (n, m)")
        swap[p] = q
    return swap


def build_master(
    spec: SystemSpec,
    modes: Sequence[Sequence],
    truncation: Optional[Truncation] = None,
    statistics: Statistics | str | None = None,
    ordering_sign: bool = True,
) -> MasterModel:
    """Assemble the term list of the density-operator hierarchy.

    ``modes[j]`` lists the exponentials of channel ``j``; each one is a
    hierarchy dimension. Fermionic models default to the full space,
    bosonic ones require a truncation.
    """
    validate_system(spec)
    statistics = Statistics.parse(statistics if statistics is not None else spec.statistics)
    g, w, L = hierarchy_dimensions(spec, modes)
    J = len(g)
    if truncation is None:
        truncation = Truncation.Full()
    if truncation.weights is not None and len(truncation.weights) == J:
        pass
    elif truncation.weights is not None:
        raise ValueError("energy weights must have one entry per hierarchy dimension")
    space = pair_space(J, statistics, truncation)
    m_idx, n_idx = split_pair(space)
    H = spec.hamiltonian
    Ld = np.conj(np.swapaxes(L, 1, 2))
    n = len(space)
    allpos = np.arange(n)
    terms: list[_Term] = []

    decay = -(m_idx @ w + n_idx @ np.conj(w))
    terms.append(_Term(allpos, allpos, np.full(n, -1j), H, None))
    terms.append(_Term(allpos, allpos, np.full(n, 1j), None, H))
    terms.append(_Term(allpos, allpos, decay.astype(complex), None, None))

    fermionic = statistics is Statistics.FERMIONIC
    if fermionic:
        sm_tot, sm_part, sm_before = sign_tables(m_idx)
        sn_tot, sn_part, sn_before = sign_tables(n_idx)
        if not ordering_sign:
            sm_before = np.ones_like(sm_before)
            sn_before = np.ones_like(sn_before)

    def add(mask, src, coef, left, right):
        sel = np.nonzero(mask)[0]
        if sel.size:
            terms.append(_Term(sel, src[sel], np.asarray(coef, dtype=complex)[sel], left, right))

    for j in range(J):
        dn_m = space.down[:, j]
        dn_n = space.down[:, J + j]
        up_m = space.up[:, j]
        up_n = space.up[:, J + j]
        if fermionic:
            add(dn_m >= 0, dn_m, sm_part[:, j] * g[j], L[j], None)
            add(dn_n >= 0, dn_n, sn_part[:, j] * np.conj(g[j]), None, Ld[j])
            add(up_m >= 0, up_m, -sm_part[:, j], Ld[j], None)
            add(up_m >= 0, up_m, sn_tot * sm_before[:, j], None, Ld[j])
            add(up_n >= 0, up_n, sm_tot * sn_before[:, j], L[j], None)
            add(up_n >= 0, up_n, -sn_part[:, j], None, L[j])
        else:
            add(dn_m >= 0, dn_m, m_idx[:, j] * g[j], L[j], None)
            add(dn_n >= 0, dn_n, n_idx[:, j] * np.conj(g[j]), None, Ld[j])
            add(up_m >= 0, up_m, np.full(n, -1.0), Ld[j], None)
            add(up_m >= 0, up_m, np.full(n, 1.0), None, Ld[j])
            add(up_n >= 0, up_n, np.full(n, 1.0), L[j], None)
            add(up_n >= 0, up_n, np.full(n, -1.0), None, L[j])
    return MasterModel(space, spec.dim, terms, _swap_table(space))


def master_fermion_rhs(rho: np.ndarray, model: MasterModel) -> np.ndarray:
    if model.space.statistics is not Statistics.FERMIONIC:
        raise ValueError("model is not fermionic")
    return model.rhs(rho)


def master_boson_rhs(rho: np.ndarray, model: MasterModel) -> np.ndarray:
    if model.space.statistics is not Statistics.BOSONIC:
        raise ValueError("model is not bosonic")
    return model.rhs(rho)


@dataclass
class MasterResult:
    times: np.ndarray
    rho: np.ndarray  # (n_t, D, D): rho^(0,0)
    trace: np.ndarray  # (n_t,) complex
    pairing_residual: np.ndarray  # (n_t,)
    space_size: int
    wall_time: float
    aux: Optional[np.ndarray] = None  # (n_t, n, D, D) when requested

    @property
    def trace_drift(self) -> float:
        return float(np.max(np.abs(self.trace - 1.0)))

    @property
    def max_pairing_residual(self) -> float:
        return float(np.max(self.pairing_residual))


def propagate_master(
    spec: SystemSpec,
    modes: Sequence[Sequence],
    grid: TimeGrid,
    truncation: Optional[Truncation] = None,
    statistics: Statistics | str | None = None,
    method: Method | str = Method.RK4,
    tol: float = 1e-9,
    every: int = 1,
    keep_aux: bool = False,
    ordering_sign: bool = True,
    hermitian_storage: bool = False,
) -> MasterResult:
    """Propagate ``rho^(0,0)`` and report trace and pairing diagnostics.

    ``hermitian_storage`` keeps only one member of every pair
    ``(m, n), (n, m)`` and rebuilds the other by taking the adjoint; the
    pairing residual then only measures round-off on the self-paired
    entries ``(m, m)``.
    """
    start = time.perf_counter()
    model = build_master(spec, modes, truncation, statistics, ordering_sign)
    D, n = model.dim, model.size
    rho0 = model.initial(spec.initial_state())

    if hermitian_storage:
        kept = np.nonzero(np.arange(n) <= model.swap)[0]
        partner = model.swap

        def expand(y):
            part = y.reshape(len(kept), D, D)
            full = np.empty((n, D, D), dtype=complex)
            full[kept] = part
            full[partner[kept]] = np.conj(np.swapaxes(part, 1, 2))
            return full

        def rhs(t, y):
            return model.rhs(expand(y))[kept].reshape(-1)

        def record(y):
            full = expand(y)
            return _summary(full, model, keep_aux)

        y0 = rho0[kept].reshape(-1)
    else:
        G = model.generator()

        def rhs(t, y):
            return G @ y

        def record(y):
            return _summary(y.reshape(n, D, D), model, keep_aux)

        y0 = rho0.reshape(-1)

    out = integrate(rhs, y0, grid, method, tol=tol, every=every, record=record)
    rho = out[:, : D * D].reshape(-1, D, D)
    residual = out[:, D * D].real
    aux = out[:, D * D + 1 :].reshape(-1, n, D, D) if keep_aux else None
    return MasterResult(
        times=grid.times[::every],
        rho=rho,
        trace=np.trace(rho, axis1=1, axis2=2),
        pairing_residual=residual,
        space_size=n,
        wall_time=time.perf_counter() - start,
        aux=aux,
    )


def _summary(full: np.ndarray, model: MasterModel, keep_aux: bool) -> np.ndarray:
    parts = [full[0].ravel(), np.array([model.pairing_residual(full)], dtype=complex)]
    if keep_aux:
        parts.append(full.ravel())
    return np.concatenate(parts)


__all__ = [
    "MasterModel",
    "MasterResult",
    "build_master",
    "master_fermion_rhs",
    "master_boson_rhs",
    "propagate_master",
]
