"""Partial balayage for the Helmholtz operator ``Delta + k^2``.

The package computes swept potentials, saturated sets and swept measures on
uniform grids, together with the radial closed forms used to check them.
"""

__version__ = "0.1.0"

from .radial import (
    Medium,
    RadialSweep,
    ball_sweep_radius,
    c_k,
    d_k,
    null_ball_radius,
    point_mass_radius,
    potential_ball,
    potential_sphere,
    psi,
    r_k,
    sphere_sweep,
)
from .grid import GridSpec, Mask, Measure, ScalarField, potential, rasterize
from .balayage import (
    BalayageResult,
    ConfigurationError,
    SweepConfig,
    feasibility_scan,
    geometry_bound_check,
    lambda1_estimate,
    structure_check,
    sweep,
    sweep_signed,
)
from .dirichlet import DirichletProblem, SpectralInfeasibilityError, harmonic_measure_potential
from .heleshaw import evolve, verify_law
from .quadrature import mean_value_check, null_quadrature_check, verify_quadrature
from .estimator import PartialBalayage

__all__ = [
    "__version__",
    "Medium",
    "RadialSweep",
    "ball_sweep_radius",
    "c_k",
    "d_k",
    "null_ball_radius",
    "point_mass_radius",
    "potential_ball",
    "potential_sphere",
    "psi",
    "r_k",
    "sphere_sweep",
    "GridSpec",
    "Mask",
    "Measure",
    "ScalarField",
    "potential",
    "rasterize",
    "BalayageResult",
    "ConfigurationError",
    "SweepConfig",
    "feasibility_scan",
    "geometry_bound_check",
    "lambda1_estimate",
    "structure_check",
    "sweep",
    "sweep_signed",
    "DirichletProblem",
    "SpectralInfeasibilityError",
    "harmonic_measure_potential",
    "evolve",
    "verify_law",
    "mean_value_check",
    "null_quadrature_check",
    "verify_quadrature",
    "PartialBalayage",
]
