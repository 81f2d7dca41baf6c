"""Radial extremals of doubly critical p-Laplace equations with a Hardy
potential and a Riesz (Hartree) nonlinearity, plus a verification battery."""

from .convolution import KernelStore, build_kernel, hartree_potential, riesz_convolve
from .energy import el_residual, inequality_suite, rayleigh
from .errors import (DivergenceError, NonConvergenceError, ParameterError,
                     PositivityLossError, ProfileFormatError, RootDegeneracyError)
from .model import Exponents, ProblemParams, Variant, critical_exponents, decay_roots, exponents
from .radial import RadialGrid, RadialProfile, read_profile_csv, write_profile_csv
from .solver import SeedKind, SolveOptions, SolveReport, solve_ground_state
from .verify import VerifyOptions, VerifyReport, run_battery

__version__ = "0.1.0"

__all__ = [
    "DivergenceError", "Exponents", "KernelStore", "NonConvergenceError", "ParameterError",
    "PositivityLossError", "ProblemParams", "ProfileFormatError", "RadialGrid",
    "RadialProfile", "RootDegeneracyError", "SeedKind", "SolveOptions", "SolveReport",
    "Variant", "VerifyOptions", "VerifyReport", "build_kernel", "critical_exponents",
    "decay_roots", "el_residual", "exponents", "hartree_potential", "inequality_suite",
    "rayleigh", "read_profile_csv", "riesz_convolve", "run_battery", "solve_ground_state",
    "write_profile_csv",
]
