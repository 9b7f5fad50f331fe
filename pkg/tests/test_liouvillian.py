import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdinversion.hilbert import SpaceSpec, build_operators
from qdinversion.liouvillian import (
    SystemConfig, build_hamiltonian, build_liouvillian, collapse_channels, compute_rates,
    liouvillian_for)
from qdinversion.phonon_bath import BathParams, PhononRateSet, mean_displacement
from qdinversion.units import HBAR

BATH = BathParams()
RATES = PhononRateSet(4e-3, 1e-4, 2e-3, 3e-4)


def dense_generator(cfg: SystemConfig, rates: PhononRateSet) -> np.ndarray:
    """L built column by column from rho -> -i/hbar [H, rho] + sum (r/2hbar) L[xi] rho."""
    ops = build_operators(cfg.space)
    a, ad, sm, spl, see = (m.toarray() for m in (ops.a, ops.adag, ops.sm, ops.sp, ops.see))
    h = cfg.delta_xL * see + cfg.delta_cL * ad @ a
    if cfg.jc_coupling:
        h = h + cfg.g_prime * (ad @ sm + spl @ a)
    h = h + cfg.eta_x_prime * (spl + sm) + cfg.eta_c * (a + ad)
    terms = [(cfg.kappa, a), (cfg.gamma / 2, sm), (cfg.gamma_prime / 2, see)]
    if cfg.phonons_enabled:
        terms += [(rates.gamma_up_cav / 2, spl @ a), (rates.gamma_down_cav / 2, ad @ sm)]
        if cfg.drive_mode == "exciton":
            terms += [(rates.gamma_up_x / 2, spl), (rates.gamma_down_x / 2, sm)]

    def rhs(rho):
        out = -1j / HBAR * (h @ rho - rho @ h)
        for k, xi in terms:
            xd = xi.conj().T
            out += k / HBAR * (2 * xi @ rho @ xd - xd @ xi @ rho - rho @ xd @ xi)
        return out

    d = cfg.space.dim
    cols = []
    for j in range(d):
        for i in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1
            cols.append(rhs(e).reshape(-1, order="F"))
    return np.array(cols).T


def random_config(rng, n_max=2):
    mode = rng.choice(["cavity", "exciton"])
    drive = {"eta_c": rng.uniform(0, 0.3)} if mode == "cavity" else {
        "eta_x_prime": rng.uniform(0, 0.3)}
    return SystemConfig(g_prime=rng.uniform(0, 0.2), kappa=rng.uniform(0.01, 0.1),
                        gamma=rng.uniform(1e-4, 1e-2), gamma_prime=rng.uniform(0, 5e-3),
                        drive_mode=mode, delta_xL=rng.uniform(-2, 2),
                        delta_cL=rng.uniform(-2, 2), phonons_enabled=bool(rng.integers(2)),
                        n_max=n_max, **drive)


def test_config_validation():
    with pytest.raises(ValueError):
        SystemConfig(eta_c=0.3, eta_x_prime=0.3, drive_mode="exciton")
    with pytest.raises(ValueError):
        SystemConfig(eta_x_prime=0.3, drive_mode="cavity")
    with pytest.raises(ValueError):
        SystemConfig(kappa=-1)
    with pytest.raises(ValueError):
        SystemConfig(drive_mode="both")
    SystemConfig()  # undriven is allowed


def test_from_laser_detunings():
    cfg = SystemConfig.from_laser(0.7, 1.6, eta_c=0.3)
    assert cfg.delta_lx == pytest.approx(0.7)
    assert cfg.delta_cx == pytest.approx(1.6)
    assert cfg.delta_lc == pytest.approx(-0.9)


def test_hamiltonian_diagonal_when_undriven():
    cfg = SystemConfig(g_prime=0.0, delta_xL=0.3, delta_cL=-0.2, n_max=3)
    h = build_hamiltonian(cfg).toarray()
    s = cfg.space
    expect = [0.3 * x - 0.2 * n for n in range(s.n_max + 1) for x in (0, 1)]
    np.testing.assert_allclose(h, np.diag(expect))


def test_hamiltonian_jc_block():
    cfg = SystemConfig(n_max=1)
    h = build_hamiltonian(cfg).toarray()
    s = cfg.space
    assert h[s.index(1, 0), s.index(0, 1)] == pytest.approx(0.1)
    assert h[s.index(0, 1), s.index(1, 0)] == pytest.approx(0.1)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hamiltonian_hermitian(seed):
    h = build_hamiltonian(random_config(np.random.default_rng(seed), n_max=3)).toarray()
    np.testing.assert_allclose(h, h.conj().T)


@pytest.mark.parametrize("seed", range(6))
def test_generator_matches_dense_oracle(seed):
    cfg = random_config(np.random.default_rng(seed))
    L = build_liouvillian(cfg, RATES)
    np.testing.assert_allclose(L.matrix.toarray(), dense_generator(cfg, RATES), atol=1e-12)


def test_zero_generator_on_mixed_state():
    cfg = SystemConfig(g_prime=0, kappa=0, gamma=0, gamma_prime=0, phonons_enabled=False,
                       n_max=2)
    L = build_liouvillian(cfg, PhononRateSet())
    rho = np.eye(cfg.space.dim) / cfg.space.dim
    assert np.all(L.apply(rho) == 0)


@pytest.mark.parametrize("dcx", [-1.6, -0.8, 0.0, 0.8, 1.6, 3.0])
def test_trace_preservation_fig6(dcx):
    cfg = SystemConfig.from_laser(dcx, dcx, eta_c=0.3, n_max=20)
    L = liouvillian_for(cfg, BATH)
    assert L.trace_defect() < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hermiticity_preservation(seed):
    rng = np.random.default_rng(seed)
    cfg = random_config(rng, n_max=3)
    L = build_liouvillian(cfg, RATES)
    d = cfg.space.dim
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    out = L.apply(m + m.conj().T)
    assert np.max(np.abs(out - out.conj().T)) < 1e-12


def test_exciton_decay_eigenvalue():
    cfg = SystemConfig(g_prime=0, kappa=0.05, gamma=0.5e-3, gamma_prime=2e-3,
                       phonons_enabled=False, n_max=1)
    L = build_liouvillian(cfg, PhononRateSet())
    ev = np.linalg.eigvals(L.matrix.toarray())
    assert np.min(np.abs(ev + cfg.gamma / HBAR)) < 1e-12
    assert np.all(ev.real < 1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_spectrum_stable(seed):
    cfg = random_config(np.random.default_rng(100 + seed))
    ev = np.linalg.eigvals(build_liouvillian(cfg, RATES).matrix.toarray())
    assert ev.real.max() < 1e-10


def test_channels():
    cav = SystemConfig(eta_c=0.3, n_max=2)
    tags = [t for t, _ in collapse_channels(cav, RATES)]
    assert tags == ["cavity_decay", "exciton_decay", "dephasing", "phonon_up", "phonon_down"]
    exc = SystemConfig(eta_x_prime=0.3, drive_mode="exciton", n_max=2)
    tags = [t for t, _ in collapse_channels(exc, RATES)]
    assert tags[-2:] == ["phonon_up_x", "phonon_down_x"]
    off = exc.replace(phonons_enabled=False)
    assert "phonon_up" not in [t for t, _ in collapse_channels(off, RATES)]
    ops = build_operators(cav.space)
    (_, c), = [(t, c) for t, c in collapse_channels(cav, RATES) if t == "cavity_decay"]
    np.testing.assert_allclose(c.toarray(), np.sqrt(2 * cav.kappa / HBAR) * ops.a.toarray())


def test_compute_rates_modes():
    cav = SystemConfig.from_laser(0.5, 1.6, eta_c=0.3, n_max=2)
    r = compute_rates(cav, BATH)
    assert r.gamma_up_cav > r.gamma_down_cav > 0
    assert r.gamma_up_x == 0 and r.gamma_down_x == 0
    exc = SystemConfig.from_laser(0.5, 1.6, eta_x_prime=0.3, drive_mode="exciton", n_max=2)
    assert compute_rates(exc, BATH).gamma_up_x > 0
    off = compute_rates(cav.replace(phonons_enabled=False), BATH)
    assert off.gamma_up_cav == 0 and off.mean_displacement == pytest.approx(0.912, abs=1e-3)


def test_renormalization():
    cfg = SystemConfig(g_prime=0.1, eta_x_prime=0.3, drive_mode="exciton",
                       renormalize_with_b=True, n_max=1)
    with pytest.raises(ValueError):
        build_liouvillian(cfg, RATES)
    eff = cfg.effective(BATH)
    b = mean_displacement(BATH)
    assert eff.g_prime == pytest.approx(0.1 * b)
    assert eff.eta_x_prime == pytest.approx(0.3 * b)
    assert SystemConfig().effective(BATH) == SystemConfig()


def test_space_mismatch():
    with pytest.raises(ValueError):
        build_liouvillian(SystemConfig(n_max=2), RATES, build_operators(SpaceSpec(3)))


def test_provenance_json():
    L = build_liouvillian(SystemConfig(eta_c=0.3, n_max=2), RATES)
    doc = json.loads(L.provenance_json())
    assert doc["vectorization"] == "column-stacking"
    assert doc["config"]["eta_c"] == 0.3
    assert doc["rates"]["gamma_up_cav_ueV"] == pytest.approx(4.0)
