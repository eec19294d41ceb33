import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import SX, SZ
from openhier.core import (
    DimensionMismatch,
    EmptyCouplings,
    Method,
    NonFiniteState,
    NonHermitianHamiltonian,
    Statistics,
    SystemSpec,
    TimeGrid,
    commutator,
    dagger,
    hierarchy_dimensions,
    integrate,
    unitary_reference,
    validate_system,
)
from openhier.bcf import Mode


def test_validate_accepts_tls():
    spec = SystemSpec(0.5 * SZ, (SX,))
    assert validate_system(spec) is spec
    assert spec.statistics is Statistics.BOSONIC
    np.testing.assert_array_equal(spec.initial_state(), [1, 0])


def test_validate_rejects_bad_input():
    with pytest.raises(NonHermitianHamiltonian):
        validate_system(SystemSpec(np.array([[0, 1], [0, 0]]), (SX,)))
    with pytest.raises(EmptyCouplings):
        validate_system(SystemSpec(SZ, ()))
    with pytest.raises(DimensionMismatch):
        validate_system(SystemSpec(SZ, (np.eye(3),)))
    with pytest.raises(DimensionMismatch):
        validate_system(SystemSpec(SZ, (SX,), psi0=np.ones(3)))


def test_grid_and_parsing():
    g = TimeGrid(0.0, 1.0, 10)
    assert len(g) == 11 and g.dt == pytest.approx(0.1)
    assert len(g.refined(2)) == 21
    assert Method.parse("RKF45") is Method.RKF45
    assert Statistics.parse("fermionic") is Statistics.FERMIONIC


@pytest.mark.parametrize("method", ["rk4", "rkf45"])
def test_integrate_matches_unitary(method):
    H = 0.7 * SX + 0.2 * SZ
    psi0 = np.array([1, 0], dtype=complex)
    grid = TimeGrid(0, 3, 300)
    out = integrate(lambda t, y: -1j * H @ y, psi0, grid, method, tol=1e-10)
    ref = unitary_reference(H, psi0, grid.times)
    assert np.max(np.abs(out - ref)) < 1e-7


def test_rk4_fourth_order():
    f = lambda t, y: np.array([-1j * 2.0 * y[0]])
    errs = []
    for n in (50, 100):
        out = integrate(f, np.array([1.0 + 0j]), TimeGrid(0, 2, n), "rk4")
        errs.append(abs(out[-1, 0] - np.exp(-4j)))
    assert 14 < errs[0] / errs[1] < 18


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_integrate_every_and_nonfinite():
    out = integrate(lambda t, y: -y, np.ones(1, complex), TimeGrid(0, 1, 10), "rk4", every=5)
    assert out.shape == (3, 1)
    with pytest.raises(NonFiniteState):
        integrate(lambda t, y: y * np.inf, np.ones(1, complex), TimeGrid(0, 1, 4), "rk4")


def test_hierarchy_dimensions_repeat_coupling():
    spec = SystemSpec(SZ, (SX, SZ))
    g, w, L = hierarchy_dimensions(spec, [[Mode(1, 1), Mode(2, 2)], [Mode(3, 3)]])
    np.testing.assert_array_equal(g, [1, 2, 3])
    np.testing.assert_array_equal(L[1], SX)
    np.testing.assert_array_equal(L[2], SZ)


@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False), min_size=4, max_size=4),
       st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False), min_size=4, max_size=4))
def test_commutator_antisymmetric(a, b):
    A = np.array(a).reshape(2, 2)
    B = np.array(b).reshape(2, 2)
    np.testing.assert_allclose(commutator(A, B), -commutator(B, A), atol=1e-12)
    np.testing.assert_allclose(dagger(dagger(A)), A)
