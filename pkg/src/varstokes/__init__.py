"""Variational Newtonian and single-layer potentials for the Stokes system
with bounded measurable viscosity, and the exterior Dirichlet problem."""

from .errors import (
    AccuracyError,
    AssemblyError,
    ConfigError,
    PreconditionError,
    SolverError,
    VarStokesError,
)
from .mesh import GeometrySpec, Mesh, build_box_mesh
from .forms import ViscosityField

__all__ = [
    "AccuracyError",
    "AssemblyError",
    "ConfigError",
    "GeometrySpec",
    "Mesh",
    "PreconditionError",
    "SolverError",
    "VarStokesError",
    "ViscosityField",
    "build_box_mesh",
]

__version__ = "0.1.0"
