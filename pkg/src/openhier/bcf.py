"""
Bath correlation functions.

A correlation function is handled as a list of exponential modes
``alpha(t) = sum_j g_j exp(-w_j t)`` for ``t >= 0``. Modes come from a
discrete bath (undamped terms, one per bath oscillator or fermion) or from
a rational spectral density at finite temperature via contour integration
with a Matsubara or Pade expansion of ``tanh(omega / 2T)``.
:func:`thermal_bcf_quadrature` integrates the defining Fourier integrals
directly and serves as the independent reference for the expansions.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate, special


class BCFError(ValueError):
    pass


class NegativeTime(BCFError):
    pass


class LengthMismatch(BCFError):
    pass


class GrowingMode(BCFError):
    pass


class QuadratureNotConverged(ArithmeticError):
    pass


class ZeroTemperature(BCFError):
    pass


class EigDecompositionFailed(ArithmeticError):
    pass


class PoleOnRealAxis(BCFError):
    pass


class DegeneratePoles(BCFError):
    pass


class AsymmetricSpectralDensity(BCFError):
    pass


@dataclass(frozen=True)
class Mode:
    """One exponential term ``g * exp(-w t)``; ``w = gamma + i Omega``."""

    g: complex
    w: complex

    def __post_init__(self):
        object.__setattr__(self, "g", complex(self.g))
        object.__setattr__(self, "w", complex(self.w))
        if self.w.real < -1e-14:
            raise GrowingMode(f"mode exponent {self.w} has negative real part")

    def as_quadruple(self) -> list[float]:
        return [self.g.real, self.g.imag, self.w.real, self.w.imag]

    @classmethod
    def from_quadruple(cls, q: Sequence[float]) -> "Mode":
        if len(q) != 4:
            raise ValueError(f"mode quadruple needs 4 numbers, got {len(q)}")
        return cls(complex(q[0], q[1]), complex(q[2], q[3]))


def eval_modes(modes: Iterable[Mode], t: ArrayLike) -> complex | np.ndarray:
    """``sum_j g_j exp(-w_j t)`` for ``t >= 0`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise NegativeTime("eval_modes is defined for t >= 0; use alpha(-t) = conj(alpha(t))")
    modes = list(modes)
    g = np.array([m.g for m in modes], dtype=complex)
    w = np.array([m.w for m in modes], dtype=complex)
    if not modes:
        out = np.zeros(t_arr.shape, dtype=complex)
    else:
        out = np.exp(-np.multiply.outer(t_arr, w)) @ g
    return complex(out) if out.ndim == 0 else out


def eval_modes_symmetric(modes: Iterable[Mode], t: ArrayLike) -> np.ndarray:
    """Correlation at any real ``t`` using ``alpha(-t) = conj(alpha(t))``."""
    t_arr = np.asarray(t, dtype=float)
    val = np.asarray(eval_modes(modes, np.abs(t_arr)))
    return np.where(t_arr < 0, val.conj(), val)


def discrete_bath_modes(couplings: Sequence[complex], frequencies: Sequence[float]) -> list[Mode]:
    """Modes ``(|g_l|^2, i omega_l)`` of ``alpha(t) = sum_l |g_l|^2 exp(-i omega_l t)``."""
    if len(couplings) != len(frequencies):
        raise LengthMismatch(f"{len(couplings)} couplings vs {len(frequencies)} frequencies")
    if len(couplings) == 0:
        raise LengthMismatch("a discrete bath needs at least one mode")
    return [Mode(abs(complex(g)) ** 2, 1j * float(om)) for g, om in zip(couplings, frequencies)]


# ----------------------------------------------------------------------------
# spectral densities and thermal parameters


@dataclass(frozen=True)
class PoleSpectralDensity:
    """Rational spectral density ``J(omega) = Re sum_p r_p / (omega - z_p)``.

    Physical densities have their poles in complex-conjugate pairs so that
    the sum is real on the real axis; the real part guards against round-off.
    """

    poles: tuple[tuple[complex, complex], ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(
            self, "poles", tuple((complex(z), complex(r)) for z, r in self.poles)
        )

    @property
    def locations(self) -> np.ndarray:
        return np.array([z for z, _ in self.poles], dtype=complex)

    @property
    def residues(self) -> np.ndarray:
        return np.array([r for _, r in self.poles], dtype=complex)

    def complex_value(self, omega: ArrayLike) -> np.ndarray:
        om = np.asarray(omega, dtype=complex)
        return np.sum(self.residues / (om[..., None] - self.locations), axis=-1)

    def __call__(self, omega: ArrayLike) -> np.ndarray:
        return self.complex_value(omega).real

    def check_physical(self, omega_max: float, n: int = 2001) -> float:
        """Minimum of ``J`` on ``(0, omega_max)``; raises if below ``-1e-10``."""
        om = np.linspace(0.0, omega_max, n)[1:]
        vals = self.complex_value(om)
        scale = max(1.0, float(np.max(np.abs(vals))))
        if np.max(np.abs(vals.imag)) > 1e-10 * scale:
            raise BCFError(f"{self.label or 'J'} is not real on the positive axis")
        lo = float(np.min(vals.real))
        if lo < -1e-10:
            raise BCFError(f"{self.label or 'J'} is negative on the positive axis (min {lo:.3e})")
        return lo

    def is_even(self, rtol: float = 1e-10) -> bool:
        om = np.linspace(0.05, 20.0, 41) * (1.0 + np.max(np.abs(self.locations)))
        a, b = self.complex_value(om), self.complex_value(-om)
        return bool(np.all(np.abs(a - b) <= rtol * (np.abs(a) + 1e-300)))

    def cutoff(self, rel: float = 1e-12) -> float:
        """Frequency beyond which ``|J| < rel * max J`` (rational tails decay slowly)."""
        scale = float(np.max(np.abs(self.locations))) + 1.0
        om = np.linspace(0.0, 10.0 * scale, 4001)
        jmax = float(np.max(np.abs(self(om))))
        hi = 10.0 * scale
        while abs(self(hi)) >= rel * jmax:
            hi *= 2.0
            if hi > 1e30:
                raise QuadratureNotConverged("spectral density does not decay")
        return hi


def lorentzian(eta: float, gamma: float, center: float = 0.0, label: str = "") -> PoleSpectralDensity:
    """Even Lorentzian pair ``eta*gamma/pi * [1/((w-c)^2+g^2) + 1/((w+c)^2+g^2)]``.

    Even in ``omega``, so its continuation to negative frequencies is the
    rational function itself; ``int_0^inf J = eta``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    amp = eta / (2j * np.pi)
    poles = []
    for c in ((center, -center) if center != 0 else (0.0,)):
        weight = amp if center != 0 else 2 * amp
        poles += [(c + 1j * gamma, weight), (c - 1j * gamma, -weight)]
    return PoleSpectralDensity(tuple(poles), label or f"lorentzian(eta={eta}, gamma={gamma}, center={center})")


@dataclass(frozen=True)
class ThermalParams:
    temperature: float
    chemical_potential: float = 0.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    def fermi(self, omega: ArrayLike) -> np.ndarray:
        """Fermi-Dirac occupation; a step at ``mu`` for ``T = 0``."""
        om = np.asarray(omega, dtype=float)
        if self.temperature == 0:
            return np.where(om < self.chemical_potential, 1.0, 0.0)
        return special.expit(-(om - self.chemical_potential) / self.temperature)


class BCFKind(enum.Enum):
    ALPHA_FERMI = "alpha_fermi"
    BETA_FERMI = "beta_fermi"
    SPIN_BATH_ALPHA = "spin_bath_alpha"

    @classmethod
    def parse(cls, value) -> "BCFKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


QUAD_EPSREL = 1e-11
QUAD_ABS_FACTOR = 1e-12


def _quad(f, a, b, epsabs, weight=None, wvar=None):
    """``scipy.integrate.quad`` that fails loudly when the error estimate is too large."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if weight is None:
            val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=QUAD_EPSREL, limit=2000)
        elif np.isinf(b):
            val, err = integrate.quad(
                f, a, b, weight=weight, wvar=wvar, epsabs=epsabs, limlst=200, limit=2000
            )
        else:
            val, err = integrate.quad(
                f, a, b, weight=weight, wvar=wvar, epsabs=epsabs, epsrel=QUAD_EPSREL, limit=2000
            )
    if not np.isfinite(val) or err > max(1e3 * epsabs, 1e-9 * abs(val)):
        raise QuadratureNotConverged(
            f"quadrature on [{a}, {b}] (weight={weight}) has error estimate {err:.2e}"
        )
    return val, err


def _fourier(f, a: float, b: float, t: float, sign: int, epsabs: float) -> complex:
    """``int_a^b f(w) exp(sign * i w t) dw`` for real ``f``."""
    if a >= b:
        return 0.0j
    if t == 0:
        val, _ = _quad(f, a, b, epsabs)
        return complex(val)
    wvar = abs(t)
    s = sign * np.sign(t)
    if np.isinf(b):
        # finite panel over whole periods, Fourier-integral routine for the tail
        period = 2 * np.pi / wvar
        mid = a + period * np.ceil(max(50.0, 2.0 * wvar) / period)
        head = _fourier(f, a, mid, t, sign, epsabs)
        c, _ = _quad(f, mid, b, epsabs, "cos", wvar)
        si, _ = _quad(f, mid, b, epsabs, "sin", wvar)
        return head + complex(c, s * si)
    c, _ = _quad(f, a, b, epsabs, "cos", wvar)
    si, _ = _quad(f, a, b, epsabs, "sin", wvar)
    return complex(c, s * si)


def thermal_bcf_quadrature(
    J: PoleSpectralDensity, th: ThermalParams, kind: BCFKind | str, t: float
) -> complex:
    """Reference value of a thermal correlation function by direct quadrature.

    ``alpha_fermi``:     int_0^inf J (1 - n(w)) exp(-i w t) dw
    ``beta_fermi``:      int_0^inf J n(w) exp(+i w t) dw
    ``spin_bath_alpha``: int_0^inf J {cos wt - i tanh(w/2T) sin wt} dw

    Infinite oscillatory tails use QUADPACK's Fourier-integral routine;
    relative accuracy is about 1e-8 or better.
    """
    kind = BCFKind.parse(kind)
    T, mu = th.temperature, th.chemical_potential
    t = float(t)
    norm, _ = _quad(lambda w: abs(J(w)), 0.0, np.inf, 0.0)
    eps = QUAD_ABS_FACTOR * max(norm, 1e-300)
    if kind is BCFKind.SPIN_BATH_ALPHA:
        re = _fourier(lambda w: J(w), 0.0, np.inf, t, -1, eps).real
        if t == 0:
            return complex(re, 0.0)
        if T == 0:
            odd = lambda w: J(w)  # noqa: E731
        else:
            odd = lambda w: J(w) * np.tanh(w / (2 * T))  # noqa: E731
        im = _fourier(odd, 0.0, np.inf, abs(t), +1, eps).imag
        return complex(re, -np.sign(t) * im)
    if kind is BCFKind.ALPHA_FERMI:
        if T == 0:
            return _fourier(lambda w: J(w), max(mu, 0.0), np.inf, t, -1, eps)
        f = lambda w: J(w) * special.expit((w - mu) / T)  # noqa: E731
        sign = -1
    else:
        if T == 0:
            return _fourier(lambda w: J(w), 0.0, max(mu, 0.0), t, +1, eps)
        f = lambda w: J(w) * special.expit(-(w - mu) / T)  # noqa: E731
        sign = +1
    split = max(mu, 0.0) + 40 * T
    return _fourier(f, 0.0, split, t, sign, eps) + _fourier(f, split, np.inf, t, sign, eps)


# ----------------------------------------------------------------------------
# sum-over-poles expansions of tanh(w / 2T)


class PoleScheme(enum.Enum):
    MATSUBARA = "matsubara"
    PADE = "pade"

    @classmethod
    def parse(cls, value) -> "PoleScheme":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class PoleExpansion:
    """``tanh(w/2T) ~ sum_j r_j [1/(w - p_j) + 1/(w + p_j)]`` with ``p_j`` in the upper half plane."""

    poles: np.ndarray
    residues: np.ndarray
    temperature: float
    scheme: PoleScheme

    def __iter__(self):
        return iter(zip(self.poles.tolist(), self.residues.tolist()))

    def __len__(self) -> int:
        return len(self.poles)

    def tanh(self, omega: ArrayLike) -> np.ndarray:
        om = np.asarray(omega, dtype=complex)[..., None]
        terms = self.residues * (1.0 / (om - self.poles) + 1.0 / (om + self.poles))
        return np.sum(terms, axis=-1)

    def fermi(self, omega: ArrayLike, mu: float = 0.0) -> np.ndarray:
        return 0.5 * (1.0 - self.tanh(np.asarray(omega) - mu))

    def max_error(self, span: float = 20.0, n: int = 4001) -> float:
        om = np.linspace(-span, span, n) * self.temperature
        exact = np.tanh(om / (2 * self.temperature))
        return float(np.max(np.abs(self.tanh(om).real - exact)))


def _pade_fermi(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Poles ``xi_j`` and weights ``kappa_j`` of the [N-1/N] Pade approximant.

    ``tanh(x/2) ~ sum_j 4 kappa_j x / (x^2 + xi_j^2)`` (Hu, Xu, Yan 2010).
    """

    def positive_eigs(b):
        size = len(b)
        off = 1.0 / np.sqrt(b[:-1] * b[1:])
        mat = np.diag(off, 1) + np.diag(off, -1)
        ev = np.linalg.eigvalsh(mat)
        ev = np.sort(ev[ev > 1e-10 * np.max(np.abs(ev))])[::-1]
        if len(ev) != size // 2:
            raise EigDecompositionFailed("unexpected spectrum in the Pade construction")
        return 2.0 / ev

    try:
        xi = positive_eigs(2.0 * np.arange(1, 2 * N + 1) - 1.0)
        zeta = positive_eigs(2.0 * np.arange(1, 2 * N) + 1.0) if N > 1 else np.array([])
    except np.linalg.LinAlgError as exc:
        raise EigDecompositionFailed(str(exc)) from None
    kappa = np.empty(N)
    for j in range(N):
        # pairwise ratios keep the products in range for large N
        ratios = (zeta**2 - xi[j] ** 2) / (np.delete(xi, j) ** 2 - xi[j] ** 2)
        kappa[j] = 0.5 * N * (2 * N + 1) * np.prod(ratios)
    if not (np.all(np.isfinite(kappa)) and np.all(np.isfinite(xi))):
        raise EigDecompositionFailed("non-finite Pade coefficients")
    return xi, kappa


def sum_over_poles(th: ThermalParams, scheme: PoleScheme | str, count: int) -> PoleExpansion:
    """Pole expansion of ``tanh(omega / 2T)`` with ``count`` upper-half-plane poles."""
    scheme = PoleScheme.parse(scheme)
    if count < 1:
        raise ValueError("count must be positive")
    T = th.temperature
    if T == 0:
        raise ZeroTemperature("no pole expansion at T = 0; use the step-function quadrature path")
    if scheme is PoleScheme.MATSUBARA:
        xi = np.pi * (2.0 * np.arange(1, count + 1) - 1.0)
        kappa = np.ones(count)
    else:
        xi, kappa = _pade_fermi(count)
    return PoleExpansion(1j * xi * T, 2.0 * kappa * T + 0j, T, scheme)


def residue_expand(
    J: PoleSpectralDensity,
    th: ThermalParams,
    scheme: PoleScheme | str = PoleScheme.PADE,
    count: int = 10,
) -> list[Mode]:
    """Exponential modes of the spin-bath correlation function of ``J``.

    Writes ``alpha(t) = int_R J(w) (1 + tanh(w/2T))/2 exp(-i w t) dw`` with the
    even continuation of ``J``, replaces ``tanh`` by its pole expansion and
    closes the contour in the lower half plane. ``count = 0`` drops the
    thermal poles (``tanh -> 0``), the high-temperature limit.
    """
    if th.chemical_potential != 0:
        raise BCFError("the tanh form of the thermal correlation requires mu = 0")
    if not J.is_even():
        raise AsymmetricSpectralDensity(
            "the contour closure needs a rational J that is even in omega "
            "(use lorentzian() or symmetrize the pole list)"
        )
    loc = J.locations
    scale = 1.0 + float(np.max(np.abs(loc))) if len(loc) else 1.0
    if np.any(np.abs(loc.imag) <= 1e-12 * scale):
        raise PoleOnRealAxis("spectral density has a pole on the real axis")
    if len(loc) != len(np.unique(np.round(loc / (1e-10 * scale)))):
        raise DegeneratePoles("spectral density has repeated poles")
    if count > 0:
        expansion = sum_over_poles(th, scheme, count)
        thermal_poles = -expansion.poles  # lower half plane
        thermal_res = expansion.residues
    else:
        expansion = None
        thermal_poles = np.array([], dtype=complex)
        thermal_res = np.array([], dtype=complex)
    for z in loc:
        if len(thermal_poles) and np.min(np.abs(thermal_poles - z)) <= 1e-10 * scale:
            raise DegeneratePoles(f"spectral pole {z} coincides with a thermal pole")

    def occupation_factor(z):
        tanh = expansion.tanh(z) if expansion is not None else 0.0
        return 0.5 * (1.0 + tanh)

    modes = []
    for z, r in J.poles:
        if z.imag < 0:
            g = -2j * np.pi * r * occupation_factor(z)
            modes.append(Mode(complex(g), 1j * z))
    for z, r in zip(thermal_poles, thermal_res):
        g = -2j * np.pi * 0.5 * r * J.complex_value(z)
        modes.append(Mode(complex(g), 1j * z))
    return modes


def merge_alpha_beta(alpha: Sequence[Mode], beta: Sequence[Mode], self_adjoint: bool) -> list[Mode]:
    """Combine the two fermionic thermal mode lists for self-adjoint couplings only."""
    if not self_adjoint:
        raise BCFError("alpha and beta may only be merged when every coupling is self-adjoint")
    return list(alpha) + list(beta)


def convergence_table(
    J: PoleSpectralDensity,
    th: ThermalParams,
    counts: Sequence[int],
    times: ArrayLike,
    schemes: Sequence[PoleScheme | str] = (PoleScheme.PADE, PoleScheme.MATSUBARA),
    reference: np.ndarray | None = None,
) -> list[dict]:
    """Max relative deviation of the residue expansion from quadrature per (scheme, count).

    The relative error is ``max_t |alpha_modes - alpha_quad| / max_t |alpha_quad|``.
    """
    times = np.asarray(times, dtype=float)
    if reference is None:
        reference = np.array(
            [thermal_bcf_quadrature(J, th, BCFKind.SPIN_BATH_ALPHA, t) for t in times]
        )
    scale = float(np.max(np.abs(reference)))
    rows = []
    for scheme in schemes:
        scheme = PoleScheme.parse(scheme)
        for count in counts:
            modes = residue_expand(J, th, scheme, count)
            approx = eval_modes(modes, times)
            err = float(np.max(np.abs(approx - reference))) / scale
            rows.append({"scheme": scheme.value, "count": int(count), "rel_error": err})
    return rows


__all__ = [
    "Mode",
    "eval_modes",
    "eval_modes_symmetric",
    "discrete_bath_modes",
    "PoleSpectralDensity",
    "lorentzian",
    "ThermalParams",
    "BCFKind",
    "thermal_bcf_quadrature",
    "PoleScheme",
    "PoleExpansion",
    "sum_over_poles",
    "residue_expand",
    "merge_alpha_beta",
    "convergence_table",
    "NegativeTime",
    "LengthMismatch",
    "GrowingMode",
    "QuadratureNotConverged",
    "ZeroTemperature",
    "EigDecompositionFailed",
    "PoleOnRealAxis",
    "DegeneratePoles",
    "AsymmetricSpectralDensity",
    "BCFError",
]
