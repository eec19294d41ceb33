"""
Shared domain types and the time integrator.

Every propagation in the package (pure-state hierarchies, density-operator
hierarchies, Grassmann-valued states, the exact oracle) flattens its state
into one complex array and hands a right-hand side to :func:`integrate`.
The integrator is a plain function of its inputs, so runs are reproducible
bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

HERMITICITY_TOL = 1e-12
RKF45_DEFAULT_TOL = 1e-9

CArray = NDArray[np.complex128]


class Statistics(enum.Enum):
    BOSONIC = "bosonic"
    FERMIONIC = "fermionic"

    @classmethod
    def parse(cls, value: "Statistics | str") -> "Statistics":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown statistics {value!r}") from None


class Method(enum.Enum):
    RK4 = "rk4"
    RKF45 = "rkf45"

    @classmethod
    def parse(cls, value: "Method | str") -> "Method":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown integration method {value!r}") from None


class SystemSpecError(ValueError):
    pass


class NonHermitianHamiltonian(SystemSpecError):
    pass


class DimensionMismatch(SystemSpecError):
    pass


class EmptyCouplings(SystemSpecError):
    pass


class IntegrationError(ArithmeticError):
    pass


class StepUnderflow(IntegrationError):
    pass


class NonFiniteState(IntegrationError):
    pass


@dataclass(frozen=True)
class SystemSpec:
    """System Hamiltonian and coupling operators (dense, ``dim x dim``).

    ``couplings[j]`` is the operator that multiplies the environment
    creation operators of channel ``j``; its adjoint multiplies the
    annihilators.
    """

    hamiltonian: CArray
    couplings: tuple[CArray, ...]
    statistics: Statistics = Statistics.BOSONIC
    psi0: Optional[CArray] = None

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", np.asarray(self.hamiltonian, dtype=complex))
        object.__setattr__(
            self, "couplings", tuple(np.asarray(L, dtype=complex) for L in self.couplings)
        )
        object.__setattr__(self, "statistics", Statistics.parse(self.statistics))
        if self.psi0 is not None:
            object.__setattr__(self, "psi0", np.asarray(self.psi0, dtype=complex).ravel())

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.couplings)

    def initial_state(self) -> CArray:
        """``psi0`` if given, else the first basis vector."""
        if self.psi0 is not None:
            return self.psi0.copy()
        psi = np.zeros(self.dim, dtype=complex)
        psi[0] = 1.0
        return psi


def validate_system(spec: SystemSpec) -> SystemSpec:
    """Check the invariants of ``spec`` and return it unchanged."""
    H = spec.hamiltonian
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionMismatch(f"hamiltonian must be square, got shape {H.shape}")
    D = H.shape[0]
    if D < 1:
        raise DimensionMismatch("system dimension must be positive")
    dev = np.max(np.abs(H - H.conj().T))
    if dev > HERMITICITY_TOL:
        raise NonHermitianHamiltonian(f"max |H - H^dagger| = {dev:.3e} exceeds {HERMITICITY_TOL}")
    if len(spec.couplings) == 0:
        raise EmptyCouplings("at least one coupling operator is required")
    for j, L in enumerate(spec.couplings):
        if L.shape != (D, D):
            raise DimensionMismatch(f"coupling {j} has shape {L.shape}, expected {(D, D)}")
    if spec.psi0 is not None and spec.psi0.shape != (D,):
        raise DimensionMismatch(f"psi0 has shape {spec.psi0.shape}, expected {(D,)}")
    return spec


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0, t0 + dt, ..., t1`` with ``steps`` intervals."""

    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if not (isinstance(self.steps, (int, np.integer)) and self.steps > 0):
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")
        if not self.t1 > self.t0:
            raise ValueError(f"t1 must exceed t0 (t0={self.t0}, t1={self.t1})")

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def times(self) -> NDArray[np.float64]:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    def __len__(self) -> int:
        return self.steps + 1

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t0, self.t1, self.steps * factor)


def _rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Fehlberg 4(5) tableau
_F_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_F_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_F_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_F_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])


def _rkf45_step(rhs, t, y, h):
    ks = []
    for c, a in zip(_F_C, _F_A):
        yi = y
        for aij, kj in zip(a, ks):
            yi = yi + (h * aij) * kj
        ks.append(rhs(t + c * h, yi))
    y5 = y
    err = 0.0
    for b5, b4, k in zip(_F_B5, _F_B4, ks):
        if b5:
            y5 = y5 + (h * b5) * k
        if b5 != b4:
            err = err + (h * (b5 - b4)) * k
    return y5, err


def _check_finite(y, t):
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(f"non-finite state encountered at t={t:.6g}")


def integrate(
    rhs: Callable[[float, CArray], CArray],
    y0: CArray,
    grid: TimeGrid,
    method: Method | str = Method.RK4,
    tol: float = RKF45_DEFAULT_TOL,
    every: int = 1,
    record: Optional[Callable[[CArray], CArray]] = None,
) -> CArray:
    """Integrate ``y' = rhs(t, y)`` on ``grid``.

    Parameters
    ----------
    rhs
        Derivative function; must not modify its argument.
    y0
        Initial state, any shape (treated as one flat vector).
    grid
        Output grid. RK4 takes exactly one step per interval; RKF45 adapts
        its step inside each interval and lands on every grid point.
    tol
        Local error tolerance for RKF45 (mixed absolute/relative).
    every
        Keep every ``every``-th grid point (the first and last are always
        kept when ``steps`` is a multiple of ``every``).
    record
        Optional map applied to the state before storing it, e.g. to keep
        only the physical block of a hierarchy.

    Returns
    -------
    Array of shape ``(n_out, *record(y).shape)``.
    """
    method = Method.parse(method)
    if method is Method.RKF45 and not tol > 0:
        raise ValueError("RKF45 requires tol > 0")
    if every < 1:
        raise ValueError("every must be >= 1")
    keep = record if record is not None else (lambda y: y.copy())
    y = np.array(y0, dtype=complex)
    _check_finite(y, grid.t0)
    times = grid.times
    out = [keep(y)]
    h = grid.dt
    h_min = 1e-14 * (grid.t1 - grid.t0)
    h_try = h
    for i in range(grid.steps):
        t, t_next = times[i], times[i + 1]
        if method is Method.RK4:
            y = _rk4_step(rhs, t, y, h)
        else:
            y, h_try = _adaptive_interval(rhs, t, t_next, y, h_try, tol, h_min)
        _check_finite(y, t_next)
        if (i + 1) % every == 0:
            out.append(keep(y))
    return np.array(out)


def _adaptive_interval(rhs, t, t_end, y, h, tol, h_min):
    while t < t_end:
        h = min(h, t_end - t)
        if h < h_min and t_end - t > h_min:
            raise StepUnderflow(f"RKF45 step {h:.3e} below {h_min:.3e} at t={t:.6g}")
        y_new, err = _rkf45_step(rhs, t, y, h)
        scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        ratio = float(np.max(np.abs(err) / scale)) if np.size(y) else 0.0
        if not np.isfinite(ratio):
            raise NonFiniteState(f"non-finite error estimate at t={t:.6g}")
        if ratio <= 1.0:
            t = t_end if t_end - (t + h) <= 1e-15 * max(1.0, abs(t_end)) else t + h
            y = y_new
            grow = 5.0 if ratio == 0 else min(5.0, 0.9 * ratio ** -0.2)
            h = h * grow
        else:
            h = h * max(0.1, 0.9 * ratio ** -0.25)
    return y, h


def hierarchy_dimensions(spec: SystemSpec, modes: Sequence[Sequence]) -> tuple[CArray, CArray, CArray]:
    """Flatten per-channel mode lists into hierarchy dimensions.

    Every exponential ``(g, w)`` of channel ``j`` becomes one dimension that
    inherits the coupling operator ``L_j``. Returns ``(g, w, L)`` with ``L``
    of shape ``(n_dims, D, D)``.
    """
    if len(modes) != spec.n_channels:
        raise DimensionMismatch(f"{len(modes)} mode lists for {spec.n_channels} channels")
    g, w, L = [], [], []
    for j, channel in enumerate(modes):
        for m in channel:
            g.append(complex(m.g))
            w.append(complex(m.w))
            L.append(spec.couplings[j])
    if not g:
        raise EmptyCouplings("no bath modes given")
    return np.array(g), np.array(w), np.array(L, dtype=complex)


def unitary_reference(H: CArray, psi0: CArray, times) -> CArray:
    """``exp(-i H t) psi0`` for each t, through the eigendecomposition of H."""
    evals, evecs = np.linalg.eigh(H)
    c = evecs.conj().T @ psi0
    phases = np.exp(-1j * np.outer(times, evals))
    return (phases * c) @ evecs.T


def dagger(A: CArray) -> CArray:
    return np.conj(np.swapaxes(A, -1, -2))


def commutator(A: CArray, B: CArray) -> CArray:
    return A @ B - B @ A


__all__ = [
    "Statistics",
    "Method",
    "SystemSpec",
    "TimeGrid",
    "validate_system",
    "integrate",
    "unitary_reference",
    "hierarchy_dimensions",
    "NonHermitianHamiltonian",
    "DimensionMismatch",
    "EmptyCouplings",
    "StepUnderflow",
    "NonFiniteState",
    "IntegrationError",
    "SystemSpecError",
    "dagger",
    "commutator",
]
