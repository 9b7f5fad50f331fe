import numpy as np
import pytest
import scipy.linalg as la

from qdinversion.analytic import nx_no_cavity
from qdinversion.hilbert import basis_ket, build_operators, expectation, ket_to_dm
from qdinversion.liouvillian import (
    SystemConfig, build_liouvillian, compute_rates, liouvillian_for)
from qdinversion.phonon_bath import BathParams, PhononRateSet
from qdinversion.solver import (
    DegenerateSteadyStateError, steady_state, time_evolve, truncation_certify)
from qdinversion.units import HBAR

from test_liouvillian import RATES, random_config

BATH = BathParams()


def test_dark_steady_state():
    cfg = SystemConfig(phonons_enabled=False, n_max=3)
    res = steady_state(liouvillian_for(cfg, BATH))
    expect = ket_to_dm(basis_ket(cfg.space, 0, 0))
    np.testing.assert_allclose(res.rho_ss, expect, atol=1e-12)
    assert res.n_x == pytest.approx(0, abs=1e-12) and res.n_c == pytest.approx(0, abs=1e-12)


def test_coherent_cavity_state():
    cfg = SystemConfig.from_laser(1.6, 1.6, g_prime=0.0, eta_c=0.3, n_max=70)
    res = steady_state(liouvillian_for(cfg, BATH))
    # Poisson mass above n = 70 at mean 36 is ~1e-7
    assert res.n_c == pytest.approx(36.0, rel=1e-5)
    assert res.n_x == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("eta,lx", [(0.03, -0.7), (0.3, 0.0), (0.3, 1.2), (0.1, -2.5)])
def test_no_cavity_oracle(eta, lx):
    cfg = SystemConfig.from_laser(lx, 1.6, drive_mode="exciton", eta_x_prime=eta,
                                  g_prime=0.0, n_max=2)
    r = compute_rates(cfg, BATH)
    res = steady_state(build_liouvillian(cfg, r))
    ref = nx_no_cavity(eta, lx, cfg.gamma, cfg.gamma_prime, r.gamma_up_x, r.gamma_down_x)
    assert res.n_x == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_dense_null_space_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    cfg = random_config(rng, n_max=2)
    rates = PhononRateSet(*rng.uniform(0, 5e-3, 4))
    L = build_liouvillian(cfg, rates)
    ns = la.null_space(L.matrix.toarray(), rcond=1e-10)
    assert ns.shape[1] == 1
    rho = ns[:, 0].reshape(L.dim, L.dim, order="F")
    rho = rho / np.trace(rho)
    res = steady_state(L)
    np.testing.assert_allclose(res.rho_ss, rho, atol=1e-10)


def test_result_invariants_and_metadata():
    cfg = SystemConfig.from_laser(1.5, 1.6, eta_c=0.3, n_max=20)
    res = steady_state(liouvillian_for(cfg, BATH), condition=True)
    assert res.residual < 1e-9
    rep = res.metadata["checks"]
    assert rep["trace_error"] < 1e-10 and rep["min_eigenvalue"] >= -1e-8
    assert res.metadata["method"] == "direct"
    assert np.isfinite(res.metadata["condition_1norm"])


def test_iterative_agrees_with_direct():
    cfg = SystemConfig.from_laser(1.5, 1.6, eta_c=0.3, n_max=15)
    L = liouvillian_for(cfg, BATH)
    a = steady_state(L, method="direct")
    b = steady_state(L, method="iterative")
    assert b.n_x == pytest.approx(a.n_x, abs=1e-9)
    assert b.n_c == pytest.approx(a.n_c, abs=1e-8)


def test_degenerate_manifold_reported():
    # no dissipation at all: every diagonal state is stationary
    cfg = SystemConfig(g_prime=0, kappa=0, gamma=0, gamma_prime=0, phonons_enabled=False,
                       n_max=1)
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(build_liouvillian(cfg, PhononRateSet()))


def test_time_evolve_constant_for_zero_generator():
    cfg = SystemConfig(g_prime=0, kappa=0, gamma=0, gamma_prime=0, phonons_enabled=False,
                       n_max=2)
    L = build_liouvillian(cfg, PhononRateSet())
    rho0 = ket_to_dm(basis_ket(cfg.space, 1, 2))
    out = time_evolve(rho0, L, 5.0, 0.5)
    np.testing.assert_allclose(out["n_x"], 1.0, atol=1e-14)
    np.testing.assert_allclose(out["n_c"], 2.0, atol=1e-14)


def test_cavity_decay_from_one_photon():
    cfg = SystemConfig(g_prime=0, gamma=0, gamma_prime=0, phonons_enabled=False, n_max=2)
    L = build_liouvillian(cfg, PhononRateSet())
    out = time_evolve(ket_to_dm(basis_ket(cfg.space, 0, 1)), L, 30.0, 1.0)
    np.testing.assert_allclose(out["n_c"], np.exp(-2 * cfg.kappa / HBAR * out["t"]),
                               atol=1e-8)
    np.testing.assert_allclose(out["trace"], 1.0, atol=1e-8)


def test_long_time_limit_matches_steady_state():
    cfg = SystemConfig.from_laser(1.5, 1.6, eta_c=0.1, n_max=10)
    L = liouvillian_for(cfg, BATH)
    out = time_evolve(ket_to_dm(basis_ket(cfg.space, 0, 0)), L, 6000.0, 3000.0,
                      store_states=True)
    ss = steady_state(L)
    assert out["n_x"][-1] == pytest.approx(ss.n_x, abs=1e-6)
    last = out["states"][-1]
    assert np.max(np.abs(last - last.conj().T)) < 1e-8
    ops = build_operators(cfg.space)
    assert expectation(last, ops.see) == pytest.approx(out["n_x"][-1])


def test_time_evolve_validation():
    L = build_liouvillian(SystemConfig(n_max=1), RATES)
    with pytest.raises(ValueError):
        time_evolve(np.eye(4) / 4, L, 0.0, 0.1)
    with pytest.raises(ValueError):
        time_evolve(np.eye(3) / 3, L, 1.0, 0.1)


def test_truncation_no_drive():
    rep = truncation_certify(SystemConfig(), BATH, [1, 2, 4])
    assert rep.converged and rep.converged_at == 1


def test_truncation_weak_drive_converges_earlier():
    n_list = [4, 8, 12, 16, 24, 32]
    base = SystemConfig.from_laser(1.6, 1.6, n_max=4)
    weak = truncation_certify(base.replace(eta_c=0.03), BATH, n_list)
    strong = truncation_certify(base.replace(eta_c=0.1), BATH, n_list)
    assert weak.converged and strong.converged
    assert weak.converged_at < strong.converged_at


def test_truncation_flags_and_validation():
    cfg = SystemConfig.from_laser(1.6, 1.6, eta_c=0.3, n_max=4)
    rep = truncation_certify(cfg, BATH, [2, 4, 6])
    assert not rep.converged and rep.flags
    with pytest.raises(ValueError):
        truncation_certify(cfg, BATH, [6, 4])
    assert len(truncation_certify(cfg, compute_rates(cfg, BATH), [3]).flags) == 1
