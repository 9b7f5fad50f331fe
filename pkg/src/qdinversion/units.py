"""Canonical unit system: energies in meV, times in ps, temperatures in K."""

HBAR = 0.6582119569  # meV ps
KB = 0.08617333  # meV / K
UEV = 1e-3  # meV per ueV


def to_angular(energy_mev):
    """Energy (meV) to angular frequency (rad/ps)."""
    return energy_mev / HBAR


def to_energy(omega):
    """Angular frequency (rad/ps) to energy (meV)."""
    return omega * HBAR
