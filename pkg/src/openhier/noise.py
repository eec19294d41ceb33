"""
Stationary complex Gaussian noise with a prescribed correlation function.

The process obeys ``E[Z(t) Z(s)] = 0`` and ``E[Z(t) conj(Z(s))] = alpha(t - s)``.
Sampling embeds the sampled correlation into a circulant of length ``N``
(with zero-padding time of at least five decay times), diagonalises it by
FFT, and draws one complex normal number per frequency. Only the random
numbers themselves (never their conjugates) enter the path, which makes the
pseudo-correlation vanish by construction.

Random numbers come from a counter-based Philox generator keyed by
``(seed, channel)``, so a path depends on nothing but its key.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import fft as sfft

from .bcf import Mode, eval_modes
from .core import TimeGrid

NEGATIVE_SPECTRUM_RTOL = 1e-6
PADDING_DECAY_TIMES = 5.0


class NoiseError(ValueError):
    pass


class SpectrumSignificantlyNegative(NoiseError):
    pass


class GridMismatch(NoiseError):
    pass


@dataclass(frozen=True)
class SpectralWeights:
    weights: np.ndarray  # clipped eigenvalues of the circulant, length n_fft
    n_fft: int
    dt: float
    min_before_clip: float

    @property
    def frequencies(self) -> np.ndarray:
        return 2 * np.pi * sfft.fftfreq(self.n_fft, d=self.dt)


def _circulant_size(modes: Sequence[Mode], grid: TimeGrid, padding: float | None) -> int:
    gammas = [m.w.real for m in modes if m.g != 0]
    if padding is None:
        if not gammas:
            padding = 0.0
        elif min(gammas) <= 0:
            raise NoiseError("undamped mode (Re w = 0): pass an explicit padding time")
        else:
            padding = PADDING_DECAY_TIMES / min(gammas)
    pad_steps = int(math.ceil(padding / grid.dt))
    return sfft.next_fast_len(2 * (grid.steps + 1 + pad_steps))


def spectral_weights(
    modes: Sequence[Mode], grid: TimeGrid, padding: float | None = None
) -> SpectralWeights:
    """Eigenvalues of the circulant embedding of ``alpha`` on ``grid``.

    ``weights[k] * dt`` approximates the power spectrum
    ``int alpha(tau) exp(i omega_k tau) d tau``. Small negative values caused
    by periodisation are clipped; a minimum below ``-1e-6`` of the maximum
    means the mode list is not a valid correlation function.
    """
    modes = list(modes)
    n = _circulant_size(modes, grid, padding)
    half = n // 2
    lags = grid.dt * np.arange(half + 1)
    a = np.asarray(eval_modes(modes, lags)) if modes else np.zeros(half + 1, complex)
    c = np.empty(n, dtype=complex)
    c[: half + 1] = a
    c[half + 1 :] = np.conj(a[1 : n - half][::-1])
    if n % 2 == 0:
        c[half] = a[half].real
    lam = (n * sfft.ifft(c)).real
    top = float(np.max(lam)) if lam.size else 0.0
    low = float(np.min(lam)) if lam.size else 0.0
    if low < -NEGATIVE_SPECTRUM_RTOL * max(top, 0.0) and low < 0:
        raise SpectrumSignificantlyNegative(
            f"spectrum minimum {low:.3e} vs maximum {top:.3e}: not a valid correlation function"
        )
    return SpectralWeights(np.clip(lam, 0.0, None), n, grid.dt, low)


@dataclass(frozen=True)
class NoisePath:
    channel: int
    grid: TimeGrid
    values: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.values) != len(self.grid):
            raise ValueError("values length must equal the number of grid points")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re_z", "im_z"])
            for t, z in zip(self.grid.times, self.values):
                w.writerow([repr(float(t)), repr(float(z.real)), repr(float(z.imag))])


def _generator(seed: int, channel: int) -> np.random.Generator:
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(channel)])
    return np.random.Generator(np.random.Philox(key))


def _standard_complex(seed: int, channel: int, n: int) -> np.ndarray:
    xy = _generator(seed, channel).standard_normal((n, 2))
    return (xy[:, 0] + 1j * xy[:, 1]) / math.sqrt(2.0)


def sample_values(
    modes: Sequence[Mode],
    grid: TimeGrid,
    seeds: Sequence[int],
    channel: int = 0,
    weights: SpectralWeights | None = None,
) -> np.ndarray:
    """Sample many paths at once; returns an array ``(len(seeds), len(grid))``."""
    sw = weights if weights is not None else spectral_weights(modes, grid)
    amp = np.sqrt(sw.weights / sw.n_fft)
    xi = np.stack([_standard_complex(s, channel, sw.n_fft) for s in seeds]) if len(seeds) else np.zeros((0, sw.n_fft), complex)
    z = sfft.fft(amp * xi, axis=-1)
    return z[:, : len(grid)]


def sample(modes: Sequence[Mode], grid: TimeGrid, seed: int, channel: int = 0) -> NoisePath:
    """One path ``Z(t_i) = sum_k sqrt(lambda_k / N) xi_k exp(-i omega_k t_i)``."""
    values = sample_values(modes, grid, [seed], channel)[0]
    return NoisePath(channel, grid, values, int(seed))


@dataclass(frozen=True)
class CorrelationEstimate:
    lags: np.ndarray  # in grid steps
    value: np.ndarray  # E[Z(t + tau) conj(Z(t))]
    se: np.ndarray  # complex: se.real is the SE of value.real, se.imag of value.imag
    pseudo: np.ndarray  # E[Z(t + tau) Z(t)]
    pseudo_se: np.ndarray


def _mean_and_se(per_path: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = per_path.shape[0]
    mean = per_path.mean(axis=0)
    se_re = per_path.real.std(axis=0, ddof=1) / math.sqrt(n)
    se_im = per_path.imag.std(axis=0, ddof=1) / math.sqrt(n)
    return mean, se_re + 1j * se_im


def _per_path(values: np.ndarray, lags: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n_t = values.shape[1]
    if np.any(lags < 0) or np.any(lags >= n_t):
        raise ValueError("lags must lie in [0, number of grid points)")
    corr = np.empty((values.shape[0], len(lags)), dtype=complex)
    pseudo = np.empty_like(corr)
    for i, lag in enumerate(lags):
        head, tail = values[:, lag:], values[:, : n_t - lag]
        corr[:, i] = np.mean(head * np.conj(tail), axis=1)
        pseudo[:, i] = np.mean(head * tail, axis=1)
    return corr, pseudo


def _estimate(corr, pseudo, lags) -> CorrelationEstimate:
    if corr.shape[0] < 2:
        raise NoiseError("need at least two paths")
    value, se = _mean_and_se(corr)
    pval, pse = _mean_and_se(pseudo)
    return CorrelationEstimate(lags, value, se, pval, pse)


def estimate_correlation(paths: Sequence[NoisePath] | np.ndarray, lags: Sequence[int]) -> CorrelationEstimate:
    """Empirical two-time correlations averaged over start times.

    Each path contributes its time average; the standard error comes from
    the spread of those averages across paths (paths are independent).
    ``paths`` is a list of :class:`NoisePath` or an array ``(n_paths, n_t)``.
    """
    if isinstance(paths, np.ndarray):
        values = paths
    else:
        paths = list(paths)
        if len(paths) < 2:
            raise NoiseError("need at least two paths")
        g0 = paths[0].grid
        if any(p.grid != g0 for p in paths):
            raise GridMismatch("paths live on different grids")
        values = np.stack([p.values for p in paths])
    lags = np.asarray(lags, dtype=int)
    return _estimate(*_per_path(values, lags), lags)


def correlation_from_seeds(
    modes: Sequence[Mode],
    grid: TimeGrid,
    seeds: Sequence[int],
    lags: Sequence[int],
    channel: int = 0,
    chunk: int = 4096,
) -> CorrelationEstimate:
    """:func:`estimate_correlation` over many paths, sampled in chunks to bound memory."""
    sw = spectral_weights(modes, grid)
    lags = np.asarray(lags, dtype=int)
    seeds = list(seeds)
    corr, pseudo = [], []
    for i in range(0, len(seeds), chunk):
        c, p = _per_path(sample_values(modes, grid, seeds[i : i + chunk], channel, sw), lags)
        corr.append(c)
        pseudo.append(p)
    return _estimate(np.concatenate(corr), np.concatenate(pseudo), lags)


__all__ = [
    "SpectralWeights",
    "spectral_weights",
    "NoisePath",
    "sample",
    "sample_values",
    "estimate_correlation",
    "correlation_from_seeds",
    "CorrelationEstimate",
    "SpectrumSignificantlyNegative",
    "GridMismatch",
    "NoiseError",
]
