"""Variational traveling waves in long-range FPUT chains."""
from .potentials import PotentialFamily, check_assumptions, truncation_order
from .profiles import Grid, Profile, FieldOnGrid, project_to_cone, kinetic_energy
from .operators import apply_am, potential_energy, quadratic_energy, gradient, mu, wave_residual
from .solver import SolverConfig, WaveSolution, solve

__all__ = [
    "PotentialFamily", "check_assumptions", "truncation_order",
    "Grid", "Profile", "FieldOnGrid", "project_to_cone", "kinetic_energy",
    "apply_am", "potential_energy", "quadratic_energy", "gradient", "mu", "wave_residual",
    "SolverConfig", "WaveSolution", "solve",
]
