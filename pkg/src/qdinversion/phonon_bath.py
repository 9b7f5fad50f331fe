"""Acoustic-phonon bath of a quantum dot in the polaron frame.

Everything here is a pure function of a :class:`BathParams`.  Energies are in
meV, times in ps; frequencies inside the integrals are angular (rad/ps).

The coupling ``alpha_p`` enters ``J(w) = alpha_p w^3 exp(-w^2 / 2 w_b^2)``
with ``w`` angular.  ``alpha_p = 0.06 ps^2`` reproduces the InAs mean
displacements <B>(4 K) ~ 0.91 and <B>(10 K) ~ 0.85 and is the default.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, quad_vec, simpson
from scipy.special import sici

from .units import HBAR, KB, to_angular

OMEGA_MAX_FACTOR = 8.0  # integrate w over (0, 8 w_b]
TAU_MAX = 10.0  # ps
TAU_STEP = 1e-3  # ps
QUAD_EPSABS = 1e-10
TAIL_CUTOFF = 1e-7
RATE_NOISE_FLOOR = 1e-6  # ps, in units of the half-Fourier integral


class ConvergenceWarning(RuntimeWarning):
    """A quadrature did not reach its requested accuracy."""


@dataclass(frozen=True)
class BathParams:
    alpha_p: float = 0.06  # ps^2
    omega_b: float = 1.0  # meV
    temperature: float = 4.0  # K

    def __post_init__(self):
        if self.alpha_p < 0:
            raise ValueError(f"alpha_p must be >= 0, got {self.alpha_p}")
        if self.omega_b <= 0:
            raise ValueError(f"omega_b must be > 0, got {self.omega_b}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")

    @property
    def cutoff(self) -> float:
        """Cutoff as an angular frequency (rad/ps)."""
        return to_angular(self.omega_b)

    @property
    def omega_max(self) -> float:
        return OMEGA_MAX_FACTOR * self.cutoff

    def with_temperature(self, temperature: float) -> "BathParams":
        return BathParams(self.alpha_p, self.omega_b, temperature)


@dataclass(frozen=True)
class PhononRateSet:
    """The four phonon scattering rates (meV, i.e. hbar*Gamma) and <B>."""

    gamma_up_cav: float = 0.0  # sigma+ a
    gamma_down_cav: float = 0.0  # a^dag sigma-
    gamma_up_x: float = 0.0  # sigma+
    gamma_down_x: float = 0.0  # sigma-
    mean_displacement: float = 1.0

    def __post_init__(self):
        for name in ("gamma_up_cav", "gamma_down_cav", "gamma_up_x", "gamma_down_x"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    def as_dict(self) -> dict:
        return {
            "gamma_up_cav_ueV": self.gamma_up_cav * 1e3,
            "gamma_down_cav_ueV": self.gamma_down_cav * 1e3,
            "gamma_up_x_ueV": self.gamma_up_x * 1e3,
            "gamma_down_x_ueV": self.gamma_down_x * 1e3,
            "mean_displacement": self.mean_displacement,
        }


def _coth_factor(omega, temperature):
    # omega > 0 (angular); T = 0 is its own branch, not a limit
    if temperature == 0:
        return np.ones_like(omega)
    return 1.0 / np.tanh(HBAR * omega / (2.0 * KB * temperature))


def _check_quad(result, what):
    value, abserr = result[0], result[1]
    if len(result) > 2 and isinstance(result[2], dict) and len(result) > 3:
        warnings.warn(f"{what}: {result[3]} (error estimate {abserr:.2e})",
                      ConvergenceWarning, stacklevel=3)
    elif abserr > max(1e-6, 1e-6 * abs(value)):
        warnings.warn(f"{what}: error estimate {abserr:.2e} exceeds tolerance",
                      ConvergenceWarning, stacklevel=3)
    return value


def spectral_density(omega, bath: BathParams):
    """J(w) in rad/ps for an energy ``omega`` in meV (scalar or array)."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    w = to_angular(omega)
    out = bath.alpha_p * w**3 * np.exp(-(w**2) / (2.0 * bath.cutoff**2))
    return out if out.ndim else float(out)


def _weight(omega, bath):
    # J(w)/w^2 with w angular
    return bath.alpha_p * omega * np.exp(-(omega**2) / (2.0 * bath.cutoff**2))


def _weight_coth(omega, bath):
    # J(w)/w^2 coth(hbar w / 2kT); finite limit alpha_p 2kT/hbar at w = 0
    T = bath.temperature
    omega = np.asarray(omega, dtype=float)
    if T == 0:
        return _weight(omega, bath)
    safe = np.where(omega > 0, omega, 1.0)
    out = _weight(safe, bath) * _coth_factor(safe, T)
    return np.where(omega > 0, out, bath.alpha_p * 2.0 * KB * T / HBAR)


def phase_function(t, bath: BathParams) -> complex:
    """Phonon phase phi(t) for a time ``t`` in ps.

    Both parts are computed with QUADPACK's oscillatory-weight rule, so the
    result is independent of the plain quadrature in :func:`mean_displacement`.
    """
    t = float(t)
    if bath.alpha_p == 0:
        return 0j
    re = quad(lambda w: float(_weight_coth(w, bath)), 0.0, bath.omega_max, weight="cos", wvar=t, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400,
              full_output=1)
    re = _check_quad(re, f"Re phi({t})")
    if t == 0.0:
        return complex(re, 0.0)
    im = quad(lambda w: _weight(w, bath), 0.0, bath.omega_max, weight="sin", wvar=t,
              epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400, full_output=1)
    im = _check_quad(im, f"Im phi({t})")
    return complex(re, -im)


@functools.lru_cache(maxsize=32)
def phase_grid(bath: BathParams, tau_max: float = TAU_MAX, step: float = TAU_STEP):
    """phi on the uniform grid ``0, step, ..., tau_max`` (cached, read-only).

    Returns ``(tau, phi)``.  One adaptive vector quadrature over w covers the
    whole grid.
    """
    n = int(round(tau_max / step))
    tau = np.linspace(0.0, n * step, n + 1)
    if bath.alpha_p == 0:
        phi = np.zeros(n + 1, dtype=complex)
    else:
        def integrand(w):
            base = _weight(w, bath)
            return np.concatenate([_weight_coth(w, bath) * np.cos(w * tau),
                                   -base * np.sin(w * tau)])

        vals, err = quad_vec(integrand, 0.0, bath.omega_max, epsabs=QUAD_EPSABS,
                             epsrel=1e-10, limit=20000)
        if err > 1e-7:
            warnings.warn(f"phase grid: error estimate {err:.2e}", ConvergenceWarning,
                          stacklevel=2)
        phi = vals[: n + 1] + 1j * vals[n + 1:]
    tau.setflags(write=False)
    phi.setflags(write=False)
    return tau, phi


def _phase_array(t, bath):
    if np.ndim(t) == 0:
        return phase_function(t, bath)
    flat = [phase_function(x, bath) for x in np.ravel(t)]
    return np.array(flat, dtype=complex).reshape(np.shape(t))


def correlation_function(t, bath: BathParams):
    """C(t) = exp(phi(t)) - 1, the multiphonon correlation kernel."""
    return np.expm1(_phase_array(t, bath))


def green_functions(t, bath: BathParams):
    """Polaron Green functions (G_g, G_u) = (cosh phi - 1, sinh phi)."""
    phi = _phase_array(t, bath)
    return np.cosh(phi) - 1.0, np.sinh(phi)


def mean_displacement(bath: BathParams) -> float:
    """<B> = exp(-1/2 int J(w)/w^2 coth(hbar w / 2 kT) dw)."""
    if bath.alpha_p == 0:
        return 1.0
    res = quad(lambda w: float(_weight_coth(w, bath)), 0.0, bath.omega_max, epsabs=1e-13, epsrel=1e-13, limit=200, full_output=1)
    return math.exp(-0.5 * _check_quad(res, "<B> integral"))


def polaron_shift(bath: BathParams) -> float:
    """Polaron shift hbar * int J(w)/w dw in meV (absorbed into the exciton detuning)."""
    if bath.alpha_p == 0:
        return 0.0
    wb = bath.cutoff
    res = quad(lambda w: bath.alpha_p * w**2 * np.exp(-(w**2) / (2 * wb**2)), 0.0,
               bath.omega_max, epsabs=1e-13, epsrel=1e-13, full_output=1)
    return HBAR * _check_quad(res, "polaron shift")


def _half_fourier(detunings, bath, tau_max, step):
    # Re int_0^inf e^{+i D tau} C(tau) dtau for each D (angular), both signs
    tau, phi = phase_grid(bath, tau_max, step)
    corr = np.expm1(phi)
    tail = abs(corr[-1])
    if bath.temperature > 0 and tail > TAIL_CUTOFF:
        warnings.warn(f"correlation kernel has not decayed at tau_max={tau_max} ps "
                      f"(|C|={tail:.1e}); rates are truncated", ConvergenceWarning,
                      stacklevel=3)
    arg = np.outer(detunings, tau)
    c, s = np.cos(arg), np.sin(arg)
    up = simpson(c * corr.real - s * corr.imag, x=tau, axis=1)
    down = simpson(c * corr.real + s * corr.imag, x=tau, axis=1)
    if bath.temperature == 0:
        # algebraic tail at T = 0: C ~ -a/tau^2 + (a^2/2 - 3a/w_b^2)/tau^4;
        # the imaginary part is Gaussian-suppressed
        a = bath.alpha_p
        i2, i4 = _cos_tail_integrals(detunings, tau[-1])
        tail_int = -a * i2 + (0.5 * a**2 - 3.0 * a / bath.cutoff**2) * i4
        up += tail_int
        down += tail_int
    return up, down


def _cos_tail_integrals(d, t0):
    # int_{t0}^inf cos(d tau) tau^-n dtau for n = 2 and n = 4
    d = np.abs(np.asarray(d, dtype=float))
    si, _ = sici(d * t0)
    c, s = np.cos(d * t0), np.sin(d * t0)
    i2 = c / t0 - d * (np.pi / 2 - si)
    i3_sin = s / (2 * t0**2) + d / 2 * i2
    i4 = c / (3 * t0**3) - d / 3 * i3_sin
    return i2, i4


def scattering_rates(detunings, coupling: float, bath: BathParams,
                     tau_max: float = TAU_MAX, step: float = TAU_STEP):
    """Vectorised rate pair over an array of detunings (meV).

    Returns ``(rate_up, rate_down)`` arrays in meV (hbar * Gamma).
    """
    if coupling < 0:
        raise ValueError("coupling must be >= 0")
    d = np.atleast_1d(np.asarray(detunings, dtype=float))
    if coupling == 0 or bath.alpha_p == 0:
        return np.zeros_like(d), np.zeros_like(d)
    up, down = _half_fourier(to_angular(d), bath, tau_max, step)
    # hbar Gamma = 2 c^2 / hbar * Re int(...)
    pref = 2.0 * coupling**2 / HBAR
    up, down = pref * up, pref * down
    # exact zeros (T = 0, far side) come out as quadrature noise of either sign
    floor = pref * RATE_NOISE_FLOOR
    for r in (up, down):
        if np.any(r < -floor):
            warnings.warn(f"negative scattering rate {r.min():.3e} meV beyond noise "
                          "floor", ConvergenceWarning, stacklevel=2)
        r[(r < 0) & (r >= -floor)] = 0.0
    return up, down


def scattering_rate_pair(detuning: float, coupling: float, bath: BathParams):
    """(rate_up, rate_down) in meV for a single detuning.

    ``rate_up`` is the ``e^{+i detuning tau}`` branch (sigma+ a or sigma+),
    ``rate_down`` its partner (a^dag sigma- or sigma-).
    """
    up, down = scattering_rates([detuning], coupling, bath)
    return float(up[0]), float(down[0])


def phonon_rates(bath: BathParams, *, g_prime: float = 0.0, delta_cx: float = 0.0,
                 eta_x_prime: float = 0.0, delta_lx: float = 0.0) -> PhononRateSet:
    """All four rates: the cavity pair at ``delta_cx`` with coupling ``g_prime``
    and the exciton-drive pair at ``delta_lx`` with coupling ``eta_x_prime``."""
    up_c, down_c = scattering_rate_pair(delta_cx, g_prime, bath)
    up_x, down_x = scattering_rate_pair(delta_lx, eta_x_prime, bath)
    return PhononRateSet(up_c, down_c, up_x, down_x, mean_displacement(bath))
