"""Phonon-mediated exciton inversion in a driven quantum-dot cavity system."""

__version__ = "0.1.0"
