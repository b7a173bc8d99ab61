"""Ising partition functions, hardness gadgets and spectral certificates."""

from spectral_ising.core import (
    GibbsSummary,
    SymmetricInteraction,
    brute_force_log_z,
    conditional_spin_probability,
    energy,
    total_variation,
)

__version__ = "0.1.0"

__all__ = [
    "GibbsSummary",
    "SymmetricInteraction",
    "brute_force_log_z",
    "conditional_spin_probability",
    "energy",
    "total_variation",
]
