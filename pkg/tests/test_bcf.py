import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from openhier.bcf import (
    AsymmetricSpectralDensity,
    BCFKind,
    GrowingMode,
    Mode,
    PoleScheme,
    PoleSpectralDensity,
    ThermalParams,
    ZeroTemperature,
    convergence_table,
    discrete_bath_modes,
    eval_modes,
    eval_modes_symmetric,
    lorentzian,
    merge_alpha_beta,
    residue_expand,
    sum_over_poles,
    thermal_bcf_quadrature,
)

mode_st = st.builds(
    Mode,
    st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
    st.builds(complex, st.floats(0.01, 3), st.floats(-3, 3)),
)


@given(st.lists(mode_st, min_size=1, max_size=4), st.floats(0.01, 5))
def test_symmetric_form_is_hermitian(modes, t):
    a, b = eval_modes_symmetric(modes, [t, -t])
    assert a == pytest.approx(np.conj(b), abs=1e-12)
    assert eval_modes(modes, [t])[0] == pytest.approx(a, abs=1e-12)


@given(st.lists(mode_st, min_size=1, max_size=3))
def test_quadruple_roundtrip(modes):
    for m in modes:
        assert Mode.from_quadruple(m.as_quadruple()) == m


def test_eval_modes_errors():
    with pytest.raises(ValueError):
        eval_modes([Mode(1, 1)], [-1.0])
    with pytest.raises(GrowingMode):
        eval_modes([Mode(1, -1)], [1.0])


def test_discrete_bath_modes():
    modes = discrete_bath_modes([0.5j, 2.0], [1.0, -2.0])
    t = 0.7
    expected = 0.25 * np.exp(-1j * t) + 4.0 * np.exp(2j * t)
    assert eval_modes(modes, [t])[0] == pytest.approx(expected)


def test_lorentzian_normalisation_and_evenness():
    J = lorentzian(0.3, 0.8, 1.5)
    assert integrate.quad(J, 0, np.inf, limit=400)[0] == pytest.approx(0.3, rel=1e-8)
    assert J.is_even()
    assert J.check_physical(10.0) >= 0


def test_tanh_pole_expansions_converge():
    th = ThermalParams(1.0)
    pade = [sum_over_poles(th, "pade", n).max_error() for n in (2, 4, 8)]
    mats = [sum_over_poles(th, "matsubara", n).max_error() for n in (2, 4, 8)]
    assert pade[0] > pade[1] > pade[2]
    assert all(p <= m for p, m in zip(pade, mats))
    with pytest.raises(ZeroTemperature):
        sum_over_poles(ThermalParams(0.0), "pade", 3)


def test_residue_expand_matches_quadrature():
    J = lorentzian(0.5, 1.0, 0.5)
    th = ThermalParams(0.7)
    times = np.linspace(0, 4, 9)
    ref = np.array([thermal_bcf_quadrature(J, th, BCFKind.SPIN_BATH_ALPHA, t) for t in times])
    approx = eval_modes(residue_expand(J, th, PoleScheme.PADE, 12), times)
    assert np.max(np.abs(approx - ref)) < 1e-6 * np.max(np.abs(ref))


def test_residue_expand_needs_even_density():
    J = PoleSpectralDensity(((1 + 1j, 1 / (2j * np.pi)), (1 - 1j, -1 / (2j * np.pi))))
    with pytest.raises(AsymmetricSpectralDensity):
        residue_expand(J, ThermalParams(1.0), "pade", 3)


def test_fermi_bcfs_add_up_for_zero_mu():
    # occupations cancel: alpha(t) + conj(beta(t)) is the plain transform of J
    J = lorentzian(0.4, 1.0, 1.0)
    th = ThermalParams(0.5)
    t = 1.3
    a = thermal_bcf_quadrature(J, th, "alpha_fermi", t)
    b = thermal_bcf_quadrature(J, th, "beta_fermi", t)
    re = integrate.quad(J, 0, np.inf, weight="cos", wvar=t)[0]
    im = integrate.quad(J, 0, np.inf, weight="sin", wvar=t)[0]
    assert a + np.conj(b) == pytest.approx(re - 1j * im, abs=1e-8)


def test_merge_requires_self_adjoint():
    with pytest.raises(ValueError):
        merge_alpha_beta([Mode(1, 1)], [Mode(1, 1)], self_adjoint=False)
    assert len(merge_alpha_beta([Mode(1, 1)], [Mode(2, 1)], True)) == 2


def test_convergence_table_rows():
    J = lorentzian(0.2, 1.0, 1.0)
    rows = convergence_table(J, ThermalParams(1.0), [1, 3], np.linspace(0, 3, 7))
    assert [(r["scheme"], r["count"]) for r in rows] == [("pade", 1), ("pade", 3), ("matsubara", 1), ("matsubara", 3)]
    assert rows[1]["rel_error"] < rows[0]["rel_error"]


def test_pade_error_decreases_every_two_poles():
    J = lorentzian(0.5, 1.0, 1.0)
    rows = convergence_table(J, ThermalParams(1.0), range(1, 11), np.linspace(0, 10, 101), schemes=("pade",))
    err = [r["rel_error"] for r in rows]
    assert all(err[i + 2] <= err[i] + 1e-12 for i in range(len(err) - 2))


def test_zero_count_keeps_only_the_cosine_transform():
    # without thermal poles tanh -> 0, leaving alpha(t) = int_0^inf J cos(w t) dw
    J = lorentzian(0.5, 1.0, 1.0)
    modes = residue_expand(J, ThermalParams(1.0), "pade", 0)
    assert len(modes) == 2 and all(m.w.real > 0 for m in modes)
    for t in (0.0, 0.7, 2.5):
        ref = integrate.quad(J, 0, np.inf, weight="cos", wvar=t)[0] if t else integrate.quad(J, 0, np.inf)[0]
        assert eval_modes(modes, [t])[0] == pytest.approx(ref, abs=1e-9)
