import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SX, SZ
from openhier.bcf import Mode
from openhier.core import SystemSpec, TimeGrid, unitary_reference
from openhier.hops import (
    HopsRun,
    InsufficientTrajectories,
    build_model,
    ensemble_density,
    hops_rhs,
    propagate_trajectories,
    propagate_trajectory,
    resolve_threads,
)
from openhier.indexset import Truncation

SPEC = SystemSpec(0.5 * SX, (SZ,), "bosonic", np.array([1, 0]))
MODES = [[Mode(0.5, 1.0 + 0.5j)]]
GRID = TimeGrid(0, 2, 100)


def test_deterministic_and_thread_independent():
    run = HopsRun(SPEC, MODES, GRID, Truncation.Depth(3), every=10)
    a = propagate_trajectories(run, range(20), threads=1, batch_size=8).psi
    b = propagate_trajectories(run, range(20), threads=3, batch_size=8).psi
    np.testing.assert_array_equal(a, b)
    c = propagate_trajectory(run, 5)
    np.testing.assert_allclose(c, a[5], atol=1e-13)


def test_thread_env_precedence(monkeypatch):
    monkeypatch.setenv("OPENHIER_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    monkeypatch.delenv("OPENHIER_THREADS")
    assert resolve_threads() == 1


def test_zero_coupling_is_unitary():
    run = HopsRun(SPEC, [[Mode(0.0, 1.0)]], GRID, Truncation.Depth(2))
    psi = propagate_trajectory(run, 0)
    np.testing.assert_allclose(psi, unitary_reference(SPEC.hamiltonian, SPEC.psi0, GRID.times), atol=1e-8)


def test_fermionic_rejected():
    with pytest.raises(ValueError):
        HopsRun(SystemSpec(SZ, (SX,), "fermionic"), MODES, GRID)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_batched_rhs_equals_single(seed):
    rng = np.random.default_rng(seed)
    model = build_model(HopsRun(SPEC, [[Mode(0.5, 1 + 0.5j), Mode(0.2, 2 - 1j)]], GRID, Truncation.Depth(3), terminator=True))
    psi = rng.normal(size=(3, model.size, 2)) + 1j * rng.normal(size=(3, model.size, 2))
    z = rng.normal(size=(3, 1)) + 1j * rng.normal(size=(3, 1))
    batch = hops_rhs(psi, z, model)
    for b in range(3):
        np.testing.assert_allclose(hops_rhs(psi[b], z[b], model), batch[b], atol=1e-12)


def test_terminator_reduces_truncation_error():
    seeds = range(8)
    grid = TimeGrid(0, 3, 300)
    deep = propagate_trajectories(HopsRun(SPEC, MODES, grid, Truncation.Depth(10)), seeds).psi
    plain = propagate_trajectories(HopsRun(SPEC, MODES, grid, Truncation.Depth(2)), seeds).psi
    term = propagate_trajectories(HopsRun(SPEC, MODES, grid, Truncation.Depth(2), terminator=True), seeds).psi
    assert np.max(np.abs(term - deep)) < np.max(np.abs(plain - deep))


def test_ensemble_standard_errors():
    run = HopsRun(SPEC, MODES, GRID, Truncation.Depth(3), every=50)
    traj = propagate_trajectories(run, range(50))
    ens = ensemble_density(traj)
    assert ens.n_trajectories == 50
    np.testing.assert_allclose(ens.rho[0], [[1, 0], [0, 0]], atol=1e-14)
    assert np.all(ens.se.real >= 0) and np.all(ens.se.imag >= 0)
    with pytest.raises(InsufficientTrajectories):
        ensemble_density(traj.psi[:1])
