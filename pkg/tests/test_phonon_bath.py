import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from qdinversion.phonon_bath import (
    BathParams, PhononRateSet, correlation_function, green_functions, mean_displacement,
    phase_function, phase_grid, phonon_rates, polaron_shift, scattering_rate_pair,
    scattering_rates, spectral_density)
from qdinversion.units import HBAR, KB

BATH = BathParams()


def test_bath_validation():
    with pytest.raises(ValueError):
        BathParams(alpha_p=-1)
    with pytest.raises(ValueError):
        BathParams(omega_b=0)
    with pytest.raises(ValueError):
        BathParams(temperature=-0.1)


def test_spectral_density_shape():
    assert spectral_density(0.0, BATH) == 0.0
    w = np.linspace(0, 5, 501)
    j = spectral_density(w, BATH)
    assert np.all(j >= 0)
    # J = a w^3 exp(-w^2 / 2 wb^2) peaks at w = sqrt(3) wb
    assert w[j.argmax()] == pytest.approx(math.sqrt(3), abs=0.01)
    with pytest.raises(ValueError):
        spectral_density(-1.0, BATH)


def test_mean_displacement_zero_temperature_closed_form():
    wb = BATH.cutoff
    assert mean_displacement(BATH.with_temperature(0)) == pytest.approx(
        math.exp(-BATH.alpha_p * wb**2 / 2), rel=1e-10)
    assert mean_displacement(BATH.with_temperature(0)) == pytest.approx(0.933, abs=1e-3)


def test_mean_displacement_values():
    assert mean_displacement(BATH) == pytest.approx(0.91, abs=0.005)
    assert mean_displacement(BathParams(alpha_p=0.0)) == 1.0
    # monotone in temperature
    vals = [mean_displacement(BATH.with_temperature(T)) for T in (0, 2, 4, 10, 20)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("T", [0.0, 4.0, 10.0])
def test_mean_displacement_matches_phase_at_origin(T):
    bath = BATH.with_temperature(T)
    phi0 = phase_function(0.0, bath)
    assert phi0.imag == 0.0
    assert mean_displacement(bath) == pytest.approx(math.exp(-phi0.real / 2), rel=1e-8)


def test_polaron_shift():
    assert polaron_shift(BathParams(alpha_p=0.0)) == 0.0
    wb = BATH.cutoff
    oracle = HBAR * quad(lambda w: BATH.alpha_p * w**2 * math.exp(-w**2 / (2 * wb**2)),
                         0, np.inf)[0]
    assert polaron_shift(BATH) == pytest.approx(oracle, abs=1e-6)
    assert polaron_shift(BATH) == pytest.approx(0.17, abs=0.01)
    assert polaron_shift(BathParams(alpha_p=0.12)) == pytest.approx(2 * polaron_shift(BATH))


def test_phase_grid_matches_pointwise_quadrature():
    tau, phi = phase_grid(BATH, 2.0, 0.01)
    for i in (0, 37, 123, 200):
        assert phi[i] == pytest.approx(phase_function(tau[i], BATH), abs=1e-8)
    assert not phi.flags.writeable


def test_correlation_function_properties():
    c0 = correlation_function(0.0, BATH)
    assert c0.real > 0 and c0.imag == 0
    assert np.all(correlation_function(np.linspace(0, 3, 7), BathParams(alpha_p=0.0)) == 0)
    t = np.linspace(0, 5, 11)
    gg, gu = green_functions(t, BATH)
    np.testing.assert_allclose(gg + gu, correlation_function(t, BATH), atol=1e-14)


def test_hotter_bath_correlation_decays_faster():
    # the 10 K kernel starts larger but its envelope max_{s >= t} |C(s)| is
    # below the 4 K one from 1.5 ps on
    env = {}
    for T in (4.0, 10.0):
        tau, phi = phase_grid(BATH.with_temperature(T), 6.0, 0.01)
        c = np.abs(np.expm1(phi))
        env[T] = np.maximum.accumulate(c[::-1])[::-1]
    sel = tau >= 1.5
    assert np.all(env[10.0][sel] < env[4.0][sel])
    assert correlation_function(3.0, BATH.with_temperature(10)) != 0


def test_rates_equal_at_zero_detuning():
    up, down = scattering_rate_pair(0.0, 0.1, BATH)
    assert up == pytest.approx(down, rel=1e-12)


def test_detailed_balance_at_1p6():
    up, down = scattering_rate_pair(1.6, 0.1, BATH)
    assert up / down == pytest.approx(math.exp(1.6 / (KB * 4.0)), rel=0.01)


@pytest.mark.parametrize("T", [0.0, 4.0, 10.0, 20.0])
def test_rates_nonnegative(T):
    d = np.linspace(-5, 5, 201)
    up, down = scattering_rates(d, 0.1, BATH.with_temperature(T))
    assert np.all(up >= 0) and np.all(down >= 0)


@pytest.mark.parametrize("T", [4.0, 10.0])
def test_detailed_balance_on_grid(T):
    d = np.concatenate([np.linspace(-3, -0.05, 60), np.linspace(0.05, 3, 60)])
    up, down = scattering_rates(d, 0.1, BATH.with_temperature(T))
    err = np.abs(np.log(up / down) - d / (KB * T)) / np.abs(d / (KB * T))
    assert err.max() < 1e-2


@settings(max_examples=20, deadline=None)
@given(st.floats(-4, 4), st.floats(0.01, 1.0))
def test_rates_quadratic_in_coupling(delta, g):
    up1, down1 = scattering_rate_pair(delta, g, BATH)
    up2, down2 = scattering_rate_pair(delta, 2 * g, BATH)
    assert up2 == pytest.approx(4 * up1, rel=1e-12, abs=1e-15)
    assert down2 == pytest.approx(4 * down1, rel=1e-12, abs=1e-15)


def test_zero_coupling_gives_zero_rates():
    up, down = scattering_rates(np.linspace(-4, 4, 9), 0.0, BATH)
    assert np.all(up == 0) and np.all(down == 0)


def test_hotter_bath_peak_lower_and_higher():
    d = np.linspace(0.05, 4, 80)
    up4, _ = scattering_rates(d, 0.1, BATH)
    up10, _ = scattering_rates(d, 0.1, BATH.with_temperature(10))
    assert d[up10.argmax()] < d[up4.argmax()]
    assert up10.max() > up4.max()


def test_phonon_rates_pairs():
    r = phonon_rates(BATH, g_prime=0.1, delta_cx=1.6, eta_x_prime=0.3, delta_lx=0.5)
    assert (r.gamma_up_cav, r.gamma_down_cav) == pytest.approx(
        scattering_rate_pair(1.6, 0.1, BATH))
    assert (r.gamma_up_x, r.gamma_down_x) == pytest.approx(
        scattering_rate_pair(0.5, 0.3, BATH))
    assert r.mean_displacement == pytest.approx(mean_displacement(BATH))
    d = r.as_dict()
    assert d["gamma_up_cav_ueV"] == pytest.approx(r.gamma_up_cav * 1e3)


def test_rate_set_rejects_negative():
    with pytest.raises(ValueError):
        PhononRateSet(gamma_up_cav=-1e-3)
