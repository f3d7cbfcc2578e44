"""Shifted passivity and stability analysis for port-Hamiltonian systems."""

__version__ = "0.1.0"
