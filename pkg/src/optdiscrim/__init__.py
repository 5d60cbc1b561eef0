"""Minimum-error discrimination of states in finite-dimensional probabilistic theories."""

from .discrimination import (
    DiscriminationInstance,
    Measurement,
    SolveReport,
    StatePreparation,
    brute_force_oracle,
    solve,
    solve_covariant,
    solve_lp,
    solve_quantum,
    success_probability,
)
from .errors import OptDiscrimError
from .kernel import ExtendedProcess, System
from .symmetry import SymmetrySetup, symmetrize, verify_symmetry_theorem

__all__ = [
    "DiscriminationInstance",
    "ExtendedProcess",
    "Measurement",
    "OptDiscrimError",
    "SolveReport",
    "StatePreparation",
    "SymmetrySetup",
    "System",
    "brute_force_oracle",
    "solve",
    "solve_covariant",
    "solve_lp",
    "solve_quantum",
    "success_probability",
    "symmetrize",
    "verify_symmetry_theorem",
]
