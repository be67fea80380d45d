"""Finite-dimensional Dirac-Fock and electron-positron Hartree-Fock laboratory."""

__version__ = "0.1.0"

from .density import DensityMatrix
from .meanfield import energy, mean_field
from .model import ModelConfig, build_model
from .params import PhysParams
from .solvers import SolveOptions, mittleman, solve_df, solve_ephf

__all__ = [
    "DensityMatrix", "ModelConfig", "PhysParams", "SolveOptions", "build_model", "energy",
    "mean_field", "mittleman", "solve_df", "solve_ephf", "__version__",
]
