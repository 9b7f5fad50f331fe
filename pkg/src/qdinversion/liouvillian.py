"""Polaron-frame Hamiltonian and Lindblad generator of the dot-cavity system.

Vectorisation is column stacking, ``vec(rho) = rho.reshape(-1, order="F")``,
so ``vec(A rho B) = kron(B.T, A) vec(rho)``.  The generator is returned in
1/ps; Hamiltonian entries and all rates are energies in meV.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import __version__
from .hilbert import OperatorSet, SpaceSpec, build_operators
from .phonon_bath import BathParams, PhononRateSet, mean_displacement, phonon_rates
from .units import HBAR

CHANNEL_TAGS = ("cavity_decay", "exciton_decay", "dephasing", "phonon_up",
                "phonon_down", "phonon_up_x", "phonon_down_x")


@dataclass(frozen=True)
class SystemConfig:
    """Physical parameters; energies in meV.

    ``delta_xL = w_x - w_L`` and ``delta_cL = w_c - w_L`` (times hbar).  With
    ``renormalize_with_b`` set, ``g_prime`` and ``eta_x_prime`` hold the bare
    couplings and are multiplied by <B> of the bath in use.
    """

    g_prime: float = 0.1
    kappa: float = 0.05
    gamma: float = 0.5e-3
    gamma_prime: float = 2e-3
    drive_mode: str = "cavity"
    eta_x_prime: float = 0.0
    eta_c: float = 0.0
    delta_xL: float = 0.0
    delta_cL: float = 0.0
    phonons_enabled: bool = True
    jc_coupling: bool = True
    renormalize_with_b: bool = False
    n_max: int = 60

    def __post_init__(self):
        if self.drive_mode not in ("cavity", "exciton"):
            raise ValueError(f"drive_mode must be 'cavity' or 'exciton', got {self.drive_mode!r}")
        for name in ("g_prime", "kappa", "gamma", "gamma_prime", "eta_x_prime", "eta_c"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.eta_x_prime and self.eta_c:
            raise ValueError("drive either the exciton or the cavity, not both")
        if self.drive_mode == "cavity" and self.eta_x_prime:
            raise ValueError("eta_x_prime set but drive_mode is 'cavity'")
        if self.drive_mode == "exciton" and self.eta_c:
            raise ValueError("eta_c set but drive_mode is 'exciton'")
        SpaceSpec(self.n_max)

    @classmethod
    def from_laser(cls, laser_detuning: float, delta_cx: float, **kw) -> "SystemConfig":
        """Build from the laser detuning ``w_L - w_x`` and ``delta_cx = w_c - w_x``."""
        return cls(delta_xL=-laser_detuning, delta_cL=delta_cx - laser_detuning, **kw)

    @property
    def delta_cx(self) -> float:
        return self.delta_cL - self.delta_xL

    @property
    def delta_lx(self) -> float:
        """w_L - w_x."""
        return -self.delta_xL

    @property
    def delta_lc(self) -> float:
        return -self.delta_cL

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec(self.n_max)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def effective(self, bath: BathParams | None = None) -> "SystemConfig":
        """Resolve bare couplings to polaron-renormalised ones when requested."""
        if not self.renormalize_with_b:
            return self
        if bath is None:
            raise ValueError("renormalize_with_b needs a bath")
        b = mean_displacement(bath)
        return self.replace(g_prime=b * self.g_prime, eta_x_prime=b * self.eta_x_prime,
                            renormalize_with_b=False)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def compute_rates(config: SystemConfig, bath: BathParams) -> PhononRateSet:
    """Phonon rates at the configuration's detunings (zero if phonons are off)."""
    cfg = config.effective(bath)
    if not cfg.phonons_enabled:
        return PhononRateSet(mean_displacement=mean_displacement(bath))
    return phonon_rates(bath, g_prime=cfg.g_prime, delta_cx=cfg.delta_cx,
                        eta_x_prime=cfg.eta_x_prime if cfg.drive_mode == "exciton" else 0.0,
                        delta_lx=cfg.delta_lx)


def build_hamiltonian(config: SystemConfig, ops: OperatorSet | None = None) -> sp.csr_matrix:
    """H'_S in meV (polaron shift already inside ``delta_xL``)."""
    ops = ops or build_operators(config.space)
    h = config.delta_xL * ops.see + config.delta_cL * ops.n
    if config.jc_coupling and config.g_prime:
        h = h + config.g_prime * (ops.adag @ ops.sm + ops.sp @ ops.a)
    if config.eta_x_prime:
        h = h + config.eta_x_prime * (ops.sp + ops.sm)
    if config.eta_c:
        h = h + config.eta_c * (ops.a + ops.adag)
    h = sp.csr_matrix(h)
    h.eliminate_zeros()
    return h


def collapse_channels(config: SystemConfig, rates: PhononRateSet,
                      ops: OperatorSet | None = None):
    """``[(tag, c)]`` with ``c = sqrt(rate/hbar) * xi`` so that sum_k D[c_k]
    reproduces the Lindblad terms with the 2 xi rho xi^dag normalisation.

    Channels with zero rate are omitted.
    """
    ops = ops or build_operators(config.space)
    if not config.phonons_enabled:
        rates = PhononRateSet(mean_displacement=rates.mean_displacement)
    terms = [
        ("cavity_decay", 2 * config.kappa, ops.a),
        ("exciton_decay", config.gamma, ops.sm),
        ("dephasing", config.gamma_prime, ops.see),
        ("phonon_up", rates.gamma_up_cav, ops.sp @ ops.a),
        ("phonon_down", rates.gamma_down_cav, ops.adag @ ops.sm),
    ]
    if config.drive_mode == "exciton":
        terms += [("phonon_up_x", rates.gamma_up_x, ops.sp),
                  ("phonon_down_x", rates.gamma_down_x, ops.sm)]
    out = []
    for tag, rate, xi in terms:
        if rate < 0:
            raise ValueError(f"negative rate for channel {tag}: {rate}")
        if rate > 0:
            out.append((tag, sp.csr_matrix(np.sqrt(rate / HBAR) * xi)))
    return out


def dissipator(c) -> sp.csr_matrix:
    """Column-stacked superoperator of D[c] rho = c rho c^dag - {c^dag c, rho}/2."""
    d = c.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    cdc = (c.conj().T @ c).tocsr()
    return (sp.kron(c.conj(), c) - 0.5 * sp.kron(eye, cdc)
            - 0.5 * sp.kron(cdc.T, eye)).tocsr()


def hamiltonian_superop(h) -> sp.csr_matrix:
    """-(i/hbar)[H, .] with H in meV."""
    d = h.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    return (-1j / HBAR * (sp.kron(eye, h) - sp.kron(h.T, eye))).tocsr()


@dataclass(frozen=True)
class Liouvillian:
    matrix: sp.csr_matrix  # 1/ps, acts on column-stacked vec(rho)
    config: SystemConfig
    rates: PhononRateSet
    hamiltonian: sp.csr_matrix
    channels: tuple = field(default=(), repr=False)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def space(self) -> SpaceSpec:
        return self.config.space

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho)
        out = self.matrix @ rho.reshape(-1, order="F")
        return out.reshape(rho.shape, order="F")

    def trace_defect(self) -> float:
        """||L^dag(1)||, zero for a trace-preserving generator."""
        ident = np.eye(self.dim, dtype=complex).reshape(-1, order="F")
        return float(np.linalg.norm(self.matrix.conj().T @ ident))

    def provenance(self) -> dict:
        return {
            "code_version": __version__,
            "vectorization": "column-stacking",
            "units": {"energy": "meV", "time": "ps", "generator": "1/ps"},
            "config": self.config.as_dict(),
            "rates": self.rates.as_dict(),
            "channels": [tag for tag, _ in self.channels],
        }

    def provenance_json(self) -> str:
        return json.dumps(self.provenance(), sort_keys=True)


def build_liouvillian(config: SystemConfig, rates: PhononRateSet,
                      ops: OperatorSet | None = None) -> Liouvillian:
    """Assemble the generator: coherent part plus ZPL and phonon Lindblads."""
    if config.renormalize_with_b:
        raise ValueError("resolve bare couplings with SystemConfig.effective(bath) first")
    ops = ops or build_operators(config.space)
    if ops.space != config.space:
        raise ValueError(f"operator space n_max={ops.space.n_max} does not match "
                         f"config n_max={config.n_max}")
    h = build_hamiltonian(config, ops)
    channels = collapse_channels(config, rates, ops)
    gen = hamiltonian_superop(h)
    for _, c in channels:
        gen = gen + dissipator(c)
    gen = sp.csr_matrix(gen)
    gen.eliminate_zeros()
    if not config.phonons_enabled:
        rates = PhononRateSet(mean_displacement=rates.mean_displacement)
    return Liouvillian(gen, config, rates, h, tuple(channels))


def liouvillian_for(config: SystemConfig, bath: BathParams) -> Liouvillian:
    """Convenience: resolve couplings, compute rates and assemble."""
    cfg = config.effective(bath)
    return build_liouvillian(cfg, compute_rates(cfg, bath))
