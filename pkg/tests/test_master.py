import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import SM, SX, SZ
from openhier.bcf import Mode
from openhier.core import SystemSpec, TimeGrid
from openhier.indexset import BosonicUntruncated, Truncation
from openhier.master import build_master, master_boson_rhs, master_fermion_rhs, propagate_master
from openhier.oracle import DiscreteBathSpec, exact_propagate, per_mode_channels

FERMI_SPEC = SystemSpec(0.5 * SZ + 0.3 * SX, (SM, 0.6 * SZ + 0.4 * SX), "fermionic", np.array([0.6, 0.8j]))


def _random_hermitian_stack(model, rng):
    n, D = model.size, model.dim
    x = rng.normal(size=(n, D, D)) + 1j * rng.normal(size=(n, D, D))
    # impose rho^(n,m) = rho^(m,n)^dagger
    return 0.5 * (x + np.conj(np.swapaxes(x[model.swap], 1, 2)))


@given(st.integers(0, 2**32 - 1), st.sampled_from(["fermionic", "bosonic"]))
def test_rhs_preserves_pairing(seed, stats):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=2) + 1j * rng.normal(size=2)
    w = np.abs(rng.normal(size=2)) + 1j * rng.normal(size=2)
    spec = SystemSpec(0.5 * SZ + 0.3 * SX, (SM, SZ + 0.2 * SX), stats)
    modes = [[Mode(g[0], w[0])], [Mode(g[1], w[1])]]
    trunc = None if stats == "fermionic" else Truncation.Depth(3)
    model = build_master(spec, modes, trunc)
    rho = _random_hermitian_stack(model, rng)
    assert model.pairing_residual(rho) < 1e-12
    assert model.pairing_residual(model.rhs(rho)) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_generator_matches_direct_rhs(seed):
    rng = np.random.default_rng(seed)
    modes = [[Mode(1.0, 0.3j)], [Mode(0.5, 0.2 + 1j)]]
    model = build_master(FERMI_SPEC, modes)
    rho = rng.normal(size=(model.size, 2, 2)) + 1j * rng.normal(size=(model.size, 2, 2))
    direct = master_fermion_rhs(rho, model)
    np.testing.assert_allclose((model.generator() @ rho.ravel()).reshape(rho.shape), direct, atol=1e-12)
    with pytest.raises(ValueError):
        master_boson_rhs(rho, model)


@given(st.integers(0, 2**32 - 1))
def test_trace_of_rho00_derivative_vanishes(seed):
    rng = np.random.default_rng(seed)
    spec = SystemSpec(SZ, (SX,), "bosonic")
    model = build_master(spec, [[Mode(0.7, 1 + 1j)]], Truncation.Depth(3))
    rho = _random_hermitian_stack(model, rng)
    assert abs(np.trace(model.rhs(rho)[0])) < 1e-12


def test_bosonic_needs_truncation():
    with pytest.raises(BosonicUntruncated):
        build_master(SystemSpec(SZ, (SX,), "bosonic"), [[Mode(1, 1)]])


def test_small_fermionic_bath_matches_oracle():
    bath = DiscreteBathSpec(((1.0,), (0.7,)), ((0.3,), (1.1,)))
    split, modes = per_mode_channels(FERMI_SPEC, bath)
    grid = TimeGrid(0, 3, 600)
    res = propagate_master(split, modes, grid)
    ref = exact_propagate(FERMI_SPEC, bath, grid)
    assert np.max(np.abs(res.rho - ref.rho)) < 1e-7
    assert res.trace_drift < 1e-9 and res.max_pairing_residual < 1e-10


def test_literal_signs_fail_with_several_modes():
    # without the ordering sign the two-mode hierarchy no longer reproduces the oracle
    bath = DiscreteBathSpec(((1.0, 0.5j), (0.7,)), ((0.3, -0.8), (1.1,)))
    split, modes = per_mode_channels(FERMI_SPEC, bath)
    grid = TimeGrid(0, 5, 500)
    ref = exact_propagate(FERMI_SPEC, bath, grid).rho
    good = propagate_master(split, modes, grid).rho
    bad = propagate_master(split, modes, grid, ordering_sign=False).rho
    assert np.max(np.abs(good - ref)) < 1e-6
    assert np.max(np.abs(bad - ref)) > 1e-2


def test_single_mode_literal_and_corrected_agree():
    bath = DiscreteBathSpec(((0.8,),), ((0.4,),))
    spec = SystemSpec(FERMI_SPEC.hamiltonian, (SM,), "fermionic", FERMI_SPEC.psi0)
    split, modes = per_mode_channels(spec, bath)
    grid = TimeGrid(0, 2, 200)
    a = propagate_master(split, modes, grid).rho
    b = propagate_master(split, modes, grid, ordering_sign=False).rho
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_hermitian_storage_agrees():
    modes = [[Mode(0.5, 1 + 0.5j)]]
    spec = SystemSpec(0.5 * SX, (SZ,), "bosonic")
    grid = TimeGrid(0, 2, 200)
    a = propagate_master(spec, modes, grid, Truncation.Depth(4))
    b = propagate_master(spec, modes, grid, Truncation.Depth(4), hermitian_storage=True)
    np.testing.assert_allclose(a.rho, b.rho, atol=1e-12)
    assert b.max_pairing_residual < 1e-15


def test_pure_dephasing_analytic():
    # H commutes with L: populations fixed, coherence decays with exp(-4 Re int_0^t int_0^s alpha)
    g, w = 0.3, 1.0 + 0.5j
    spec = SystemSpec(0.5 * SZ, (SZ,), "bosonic", np.array([1, 1]) / np.sqrt(2))
    grid = TimeGrid(0, 4, 400)
    res = propagate_master(spec, [[Mode(g, w)]], grid, Truncation.Depth(10), every=40)
    t = res.times
    G = g / w * t - g / w**2 * (1 - np.exp(-w * t))  # int_0^t int_0^s alpha
    coh = 0.5 * np.exp(-1j * t) * np.exp(-4 * G.real)
    np.testing.assert_allclose(res.rho[:, 0, 1], coh, atol=1e-8)
    np.testing.assert_allclose(res.rho[:, 0, 0], 0.5, atol=1e-12)


def test_keep_aux_and_rkf45():
    grid = TimeGrid(0, 1, 20)
    res = propagate_master(SystemSpec(SZ, (SX,), "bosonic"), [[Mode(0.5, 1)]], grid, Truncation.Depth(2),
                           method="rkf45", keep_aux=True)
    assert res.aux.shape == (21, res.space_size, 2, 2)
    np.testing.assert_allclose(res.aux[:, 0], res.rho)
