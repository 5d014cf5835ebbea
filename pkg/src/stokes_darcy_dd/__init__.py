"""Global-in-time domain decomposition for nonlinear Stokes-Darcy flow.

Taylor-Hood finite elements on both subdomains, backward Euler in time on
separate (possibly nonconforming) time grids and a space-time interface
problem for the interface pressure solved by Newton-GMRES.
"""
from .interface import (CoupledProblem, OuterConfig, apply_preconditioner, apply_Psi_prime,
                        evaluate_Psi, newton_solve)
from .mesh import Mesh, MeshError, build_interface_map, build_rectangle_mesh
from .subdomain import InnerOptions, InnerSolverError, ProblemData
from .timegrid import PiecewiseConstantTimeField, TimeGrid, project, uniform_grid
from .viscosity import CrossModelParams, nu

__all__ = [
    "CoupledProblem", "OuterConfig", "apply_preconditioner", "apply_Psi_prime", "evaluate_Psi",
    "newton_solve", "Mesh", "MeshError", "build_interface_map", "build_rectangle_mesh",
    "InnerOptions", "InnerSolverError", "ProblemData", "PiecewiseConstantTimeField",
    "TimeGrid", "project", "uniform_grid", "CrossModelParams", "nu",
]
