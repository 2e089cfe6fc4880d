"""Prescribed mean curvature surfaces: graph solver, rotational profiles, meshes and checks."""

from .curvature import Constant, ExpressionFunction, LambdaTranslator, PrescribedFunction, Rotational
from .domain import DirichletData, PlanarDomain
from .graph_solver import GraphSolution, NonConvergence, SolverConfig, solve_dirichlet
from .meshgeom import TriMesh

__version__ = "0.1.0"

__all__ = [
    "Constant", "ExpressionFunction", "LambdaTranslator", "PrescribedFunction", "Rotational",
    "DirichletData", "PlanarDomain", "GraphSolution", "NonConvergence", "SolverConfig",
    "solve_dirichlet", "TriMesh",
]
