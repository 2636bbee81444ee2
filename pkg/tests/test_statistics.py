import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fd_half_dmpmath, fd_half_mpmath

from ddbounds.statistics import (
    Blakemore,
    Boltzmann,
    FermiDiracHalf,
    StatisticsError,
    make_statistics,
)

# -Li_{3/2}(-e^eta) evaluated with mpmath at 30 digits
FD_FROZEN = {
    0.0: 0.76514702462540795,
    -2.0: 0.12929851332007559,
    1.0: 1.5756407761513002,
    5.0: 8.8442088952429539,
    20.0: 67.49151222165892,
}


@pytest.mark.parametrize("eta,ref", sorted(FD_FROZEN.items()))
def test_fermi_dirac_frozen_values(eta, ref):
    assert FermiDiracHalf()(eta) == pytest.approx(ref, rel=1e-13)


def test_fermi_dirac_against_live_mpmath():
    F = FermiDiracHalf()
    eta = np.array([-35.0, -8.0, -1.0001, -0.9999, 0.3, 4.0, 12.0, 45.0])
    f, df = F.value_and_derivative(eta)
    assert np.allclose(f, [fd_half_mpmath(e) for e in eta], rtol=1e-13, atol=0)
    assert np.allclose(df, [fd_half_dmpmath(e) for e in eta], rtol=1e-13, atol=0)


def test_fermi_dirac_antiderivative_is_integral_of_f():
    F = FermiDiracHalf()
    a, b = -3.0, 4.0
    x, w = np.polynomial.legendre.leggauss(60)
    t = 0.5 * (b - a) * (x + 1) + a
    integral = 0.5 * (b - a) * np.sum(w * F(t))
    assert F.antiderivative(b) - F.antiderivative(a) == pytest.approx(integral, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-30.0, max_value=50.0))
def test_fermi_dirac_inverse_round_trip(eta):
    F = FermiDiracHalf()
    assert float(F.inverse(F(eta))) == pytest.approx(eta, abs=1e-11, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=-30.0, max_value=30.0))
def test_fermi_dirac_sandwich(eta):
    F = FermiDiracHalf()
    f, df = F.value_and_derivative(eta)
    assert 0 < df <= f * (1 + 1e-12)
    assert f <= np.exp(eta) * (1 + 1e-12)


def test_boltzmann_is_exp_and_log():
    F = Boltzmann()
    eta = np.linspace(-20, 20, 9)
    assert np.allclose(F(eta), np.exp(eta), rtol=1e-15)
    assert np.allclose(F.inverse(np.exp(eta)), eta, atol=1e-14)
    assert np.all(F.diffusion_enhancement(np.array([0.1, 1.0, 30.0])) == 1.0)


def test_boltzmann_overflow_raises():
    with pytest.raises(StatisticsError):
        Boltzmann()(800.0)


def test_blakemore_diffusion_enhancement_frozen():
    # n (d/dn) log(n / (S - n)) = S / (S - n), simplified with sympy: 2 at n=5, S=10
    assert Blakemore(10.0).diffusion_enhancement(5.0) == pytest.approx(2.0, rel=1e-15)


def test_blakemore_saturates_and_rejects_out_of_range():
    F = Blakemore(10.0)
    assert np.all(F(np.array([-50.0, 0.0, 36.0])) <= 10.0)
    assert F(0.0) == pytest.approx(5.0)
    for bad in (0.0, 10.0, 12.0):
        with pytest.raises(StatisticsError):
            F.inverse(bad)
    with pytest.raises(StatisticsError):
        Blakemore(0.0)


def test_make_statistics_dispatch():
    assert isinstance(make_statistics("boltzmann"), Boltzmann)
    assert isinstance(make_statistics("fermi_dirac_half"), FermiDiracHalf)
    assert make_statistics("blakemore", 3.0).saturation == 3.0
    with pytest.raises(StatisticsError):
        make_statistics("blakemore")
    with pytest.raises(StatisticsError):
        make_statistics("gauss")
