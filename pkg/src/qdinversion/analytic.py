"""Closed-form steady-state models.

All energies (drives, detunings, rates) in meV; temperatures in K.  The
detuning ``delta_lx`` is ``w_L - w_x``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phonon_bath import PhononRateSet
from .units import KB


def nx_no_cavity(eta_x_prime, delta_lx, gamma, gamma_prime, rate_up, rate_down):
    """Steady exciton population of a driven dot with ZPL and phonon Lindblads.

    Works elementwise on arrays.  ``rate_up``/``rate_down`` are the
    sigma+/sigma- phonon rates evaluated at ``delta_lx`` with coupling
    ``eta_x_prime``.
    """
    eta = np.asarray(eta_x_prime, dtype=float)
    d = np.asarray(delta_lx, dtype=float)
    up = np.asarray(rate_up, dtype=float)
    down = np.asarray(rate_down, dtype=float)
    g_pol = 0.5 * (up + down + gamma + gamma_prime)
    with np.errstate(divide="ignore", invalid="ignore"):
        saturation = np.where(eta == 0, 0.0, 4 * eta**2 * g_pol / (g_pol**2 + d**2))
    denom = up + down + gamma + saturation
    if np.any(denom <= 0):
        raise ZeroDivisionError("no relaxation channel: gamma and all rates vanish")
    out = 0.5 * (1 + (up - down - gamma) / denom)
    return float(out) if out.ndim == 0 else out


def nx_thermal(eta_x_prime, delta_lx, temperature):
    """Thermal occupation of the dressed states; T = 0 uses tanh -> 1."""
    if np.any(np.asarray(temperature) < 0):
        raise ValueError("temperature must be >= 0")
    eta = np.asarray(eta_x_prime, dtype=float)
    d = np.asarray(delta_lx, dtype=float)
    omega = np.sqrt(d**2 + 4 * eta**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(omega == 0, 0.0, d / omega)
        if np.all(np.asarray(temperature) == 0):
            th = np.ones_like(omega)
        else:
            th = np.tanh(omega / (2 * KB * np.asarray(temperature, dtype=float)))
    out = 0.5 * (1 + ratio * th)
    return float(out) if out.ndim == 0 else out


def cavity_amplitude(eta_c, kappa, delta_lc):
    """Coherent cavity amplitude alpha = eta_c / (kappa - i delta_Lc)."""
    if np.any(np.asarray(kappa) <= 0):
        raise ValueError("kappa must be > 0")
    return np.asarray(eta_c) / (np.asarray(kappa) - 1j * np.asarray(delta_lc))


@dataclass(frozen=True)
class EffectiveModelParams:
    g_prime: float = 0.1
    eta_c: float = 0.3
    kappa: float = 0.05
    gamma: float = 0.5e-3
    gamma_prime: float = 2e-3
    p: float = 2.5
    # detuning in the Lorentzian of the effective drive: "lx" (laser vs
    # exciton, the printed form) or "lc" (laser vs cavity)
    drive_detuning: str = "lx"

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.drive_detuning not in ("lx", "lc"):
            raise ValueError("drive_detuning must be 'lx' or 'lc'")


def nx_cavity_driven_effective(params: EffectiveModelParams, delta_lx, delta_cx,
                               rate_up_cav, rate_down_cav):
    """Cavity-filtered effective model for a cavity-driven dot.

    ``rate_*_cav`` are the sigma+ a / a^dag sigma- rates at ``delta_cx`` with
    coupling g'.  The cavity sees enhanced damping p*kappa and the exciton
    p*gamma.
    """
    d_lx = np.asarray(delta_lx, dtype=float)
    d_lc = d_lx - delta_cx
    kappa_t = params.p * params.kappa
    alpha2 = np.abs(cavity_amplitude(params.eta_c, kappa_t, d_lc)) ** 2
    lor = d_lx if params.drive_detuning == "lx" else d_lc
    eta_eff = params.g_prime * params.eta_c / np.sqrt(kappa_t**2 + lor**2)
    return nx_no_cavity(eta_eff, d_lx, params.p * params.gamma, params.gamma_prime,
                        alpha2 * rate_up_cav, alpha2 * rate_down_cav)


def nx_no_cavity_from_rates(eta_x_prime, delta_lx, gamma, gamma_prime,
                            rates: PhononRateSet):
    return nx_no_cavity(eta_x_prime, delta_lx, gamma, gamma_prime,
                        rates.gamma_up_x, rates.gamma_down_x)
