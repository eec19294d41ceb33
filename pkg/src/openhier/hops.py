"""
Stochastic hierarchy of pure states for bosonic environments.

For one noise realisation the auxiliary states obey

    d psi^(k) = (-iH - k.w + sum_j conj(Z_j(t)) L_j) psi^(k)
                + sum_d k_d g_d L_d psi^(k - e_d) - sum_d L_d^dagger psi^(k + e_d)

where ``Z_j`` is the complex Gaussian process of channel ``j`` with
``E[Z_j(t) conj(Z_j(s))] = alpha_j(t - s)`` and ``d`` runs over the
exponentials of all channels. The reduced state is the ensemble mean of
``|psi^(0)><psi^(0)|`` (the equation is linear, so trajectories are not
normalised).

Trajectories are propagated in fixed-size batches; the batch layout and
the reduction order depend only on the seed list, so results do not depend
on the number of worker threads.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .bcf import Mode
from .core import Method, Statistics, SystemSpec, TimeGrid, hierarchy_dimensions, integrate, validate_system
from .indexset import IndexSpace, Truncation, build_index_space
from .noise import sample_values, spectral_weights

BATCH_SIZE = 256
THREADS_ENV = "OPENHIER_THREADS"


class InsufficientTrajectories(ValueError):
    pass


@dataclass(frozen=True)
class HopsRun:
    spec: SystemSpec
    modes: tuple[tuple[Mode, ...], ...]
    grid: TimeGrid
    truncation: Truncation = Truncation.Depth(4)
    terminator: bool = False
    method: Method = Method.RK4
    tol: float = 1e-9
    every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(tuple(ch) for ch in self.modes))
        object.__setattr__(self, "method", Method.parse(self.method))
        validate_system(self.spec)
        if self.spec.statistics is not Statistics.BOSONIC:
            raise ValueError("the stochastic hierarchy needs a bosonic environment")
        if len(self.modes) != self.spec.n_channels:
            raise ValueError(f"{len(self.modes)} mode lists for {self.spec.n_channels} channels")


@dataclass
class HopsModel:
    """Index space and precomputed coupling tables of a run."""

    space: IndexSpace
    g: np.ndarray
    w: np.ndarray
    L: np.ndarray  # (n_dims, D, D)
    channel_L: np.ndarray  # (n_channels, D, D)
    H: np.ndarray
    kw: np.ndarray
    terminator: Optional[list] = None

    @property
    def size(self) -> int:
        return len(self.space)


def build_model(run: HopsRun) -> HopsModel:
    spec = run.spec
    g, w, L = hierarchy_dimensions(spec, run.modes)
    truncation = run.truncation
    space = build_index_space(len(g), Statistics.BOSONIC, truncation)
    model = HopsModel(
        space=space,
        g=g,
        w=w,
        L=L,
        channel_L=np.array(spec.couplings),
        H=spec.hamiltonian,
        kw=space.indices @ w,
    )
    if run.terminator:
        model.terminator = _terminator_tables(model)
    return model


def _terminator_tables(model: HopsModel) -> list:
    """Static closure for states just outside the space.

    Setting the derivative of a missing state ``psi^(k')`` to zero and
    dropping its noise and upward coupling gives
    ``psi^(k') = -(-iH - k'.w)^{-1} sum_i k'_i g_i L_i psi^(k' - e_i)``.
    Each entry is ``(p, d, M, [(i, q), ...])`` for position ``p`` whose
    upward neighbour along ``d`` is missing.
    """
    space = model.space
    D = model.H.shape[0]
    out = []
    for p, k in enumerate(space.indices.tolist()):
        for d in range(space.n_channels):
            if space.up[p, d] >= 0:
                continue
            kp = list(k)
            kp[d] += 1
            A = -1j * model.H - np.dot(kp, model.w) * np.eye(D)
            M = -np.linalg.inv(A)
            sources = []
            for i in range(space.n_channels):
                if kp[i] == 0:
                    continue
                km = list(kp)
                km[i] -= 1
                q = space.position(km)
                if q is not None:
                    sources.append((i, q, kp[i] * model.g[i]))
            out.append((p, d, M, sources))
    return out


def hops_rhs(psi: np.ndarray, zbar: np.ndarray, model: HopsModel) -> np.ndarray:
    """Time derivative of a batch of hierarchies.

    ``psi`` has shape ``(B, n, D)`` (or ``(n, D)`` for one trajectory) and
    ``zbar`` holds the conjugated noise values ``(B, n_channels)``.
    """
    single = psi.ndim == 2
    if single:
        psi = psi[None]
        zbar = np.asarray(zbar)[None]
    space = model.space
    out = psi @ (-1j * model.H).T - model.kw[None, :, None] * psi
    for j, Lj in enumerate(model.channel_L):
        out += zbar[:, j, None, None] * (psi @ Lj.T)
    for d in range(space.n_channels):
        dn = space.down[:, d]
        sel = np.nonzero(dn >= 0)[0]
        if sel.size:
            coef = space.indices[sel, d] * model.g[d]
            out[:, sel] += coef[None, :, None] * (psi[:, dn[sel]] @ model.L[d].T)
        up = space.up[:, d]
        sel = np.nonzero(up >= 0)[0]
        if sel.size:
            out[:, sel] -= psi[:, up[sel]] @ np.conj(model.L[d])
    if model.terminator:
        for p, d, M, sources in model.terminator:
            acc = np.zeros_like(psi[:, 0])
            for i, q, c in sources:
                acc += c * (psi[:, q] @ model.L[i].T)
            cut = acc @ M.T
            out[:, p] -= cut @ np.conj(model.L[d])
    return out[0] if single else out


@dataclass
class NoiseTable:
    """Conjugated noise of a batch on the half-step grid, with a spline for other times."""

    times: np.ndarray
    values: np.ndarray  # (n_half, B, n_channels)
    dt_half: float
    t0: float
    _spline: Optional[CubicSpline] = None

    def at(self, t: float) -> np.ndarray:
        x = (t - self.t0) / self.dt_half
        i = int(round(x))
        if abs(x - i) < 1e-9 and 0 <= i < len(self.times):
            return self.values[i]
        if self._spline is None:
            self._spline = CubicSpline(self.times, self.values, axis=0)
        return self._spline(t)


def _noise_table(run: HopsRun, seeds: Sequence[int], weights) -> NoiseTable:
    fine = run.grid.refined(2)
    cols = []
    for j, channel in enumerate(run.modes):
        if weights[j] is None:
            cols.append(np.zeros((len(seeds), len(fine)), dtype=complex))
        else:
            cols.append(sample_values(channel, fine, seeds, j, weights[j]))
    values = np.conj(np.stack(cols, axis=-1)).transpose(1, 0, 2)
    return NoiseTable(fine.times, np.ascontiguousarray(values), fine.dt, fine.t0)


def _channel_weights(run: HopsRun):
    fine = run.grid.refined(2)
    out = []
    for channel in run.modes:
        if all(m.g == 0 for m in channel):
            out.append(None)
        else:
            out.append(spectral_weights(channel, fine))
    return out


def _propagate_batch(run: HopsRun, model: HopsModel, seeds: Sequence[int], weights, keep_aux: bool):
    B = len(seeds)
    D = run.spec.dim
    n = model.size
    noise = _noise_table(run, seeds, weights)

    def rhs(t, y):
        return hops_rhs(y.reshape(B, n, D), noise.at(t), model).reshape(-1)

    if keep_aux:
        record = lambda y: y.copy()
    else:
        record = lambda y: y.reshape(B, n, D)[:, 0].reshape(-1).copy()
    y0 = np.zeros((B, n, D), dtype=complex)
    y0[:, 0] = run.spec.initial_state()
    out = integrate(rhs, y0.reshape(-1), run.grid, run.method, tol=run.tol, every=run.every, record=record)
    if keep_aux:
        return out.reshape(len(out), B, n, D).transpose(1, 0, 2, 3)
    return out.reshape(len(out), B, D).transpose(1, 0, 2)


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit value first, then the environment variable, then 1."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


@dataclass
class TrajectorySet:
    times: np.ndarray
    psi: np.ndarray  # (N, n_t, D) or (N, n_t, n, D) with aux states
    seeds: tuple[int, ...]
    wall_time: float = 0.0


def propagate_trajectories(
    run: HopsRun,
    seeds: Sequence[int],
    threads: Optional[int] = None,
    keep_aux: bool = False,
    batch_size: int = BATCH_SIZE,
) -> TrajectorySet:
    """Propagate one trajectory per seed; output is in seed order."""
    start = time.perf_counter()
    seeds = [int(s) for s in seeds]
    model = build_model(run)
    weights = _channel_weights(run)
    chunks = [seeds[i : i + batch_size] for i in range(0, len(seeds), batch_size)]
    work = lambda chunk: _propagate_batch(run, model, chunk, weights, keep_aux)
    n_threads = resolve_threads(threads)
    if n_threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    psi = np.concatenate(parts) if parts else np.zeros((0, len(run.grid.times[:: run.every]), run.spec.dim), complex)
    return TrajectorySet(run.grid.times[:: run.every], psi, tuple(seeds), time.perf_counter() - start)


def propagate_trajectory(run: HopsRun, seed: int, keep_aux: bool = False) -> np.ndarray:
    """``psi^(0)(t)`` for one seed (all auxiliary states with ``keep_aux``)."""
    return propagate_trajectories(run, [seed], keep_aux=keep_aux).psi[0]


@dataclass
class EnsembleDensity:
    times: np.ndarray
    rho: np.ndarray  # (n_t, D, D)
    se: np.ndarray  # (n_t, D, D); real part: SE of Re rho, imaginary part: SE of Im rho
    n_trajectories: int


def ensemble_density(trajectories: TrajectorySet | np.ndarray, times: Optional[np.ndarray] = None) -> EnsembleDensity:
    """Sample mean of ``|psi><psi|`` with element-wise standard errors."""
    if isinstance(trajectories, TrajectorySet):
        times = trajectories.times
        psi = trajectories.psi
    else:
        psi = np.asarray(trajectories)
    if psi.ndim == 4:
        psi = psi[:, :, 0]
    N = psi.shape[0]
    if N < 2:
        raise InsufficientTrajectories("at least two trajectories are needed")
    dyads = np.einsum("kta,ktb->ktab", psi, np.conj(psi))
    rho = dyads.mean(axis=0)
    se = (dyads.real.std(axis=0, ddof=1) + 1j * dyads.imag.std(axis=0, ddof=1)) / math.sqrt(N)
    if times is None:
        times = np.arange(psi.shape[1], dtype=float)
    return EnsembleDensity(np.asarray(times), rho, se, N)


__all__ = [
    "HopsRun",
    "HopsModel",
    "build_model",
    "hops_rhs",
    "propagate_trajectory",
    "propagate_trajectories",
    "ensemble_density",
    "EnsembleDensity",
    "TrajectorySet",
    "InsufficientTrajectories",
    "resolve_threads",
]
