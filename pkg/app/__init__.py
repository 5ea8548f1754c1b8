"""Fredholm analysis of linear ODE boundary-value problems - library for the CLI and scripts."""

from app.boundary import (
    BoundaryOperator,
    IntegralTerm,
    PointTerm,
    apply_to_function,
    apply_to_matrix,
    canonical_operator,
    caputo_derivative,
    cauchy_operator,
)
from app.coefficients import CoefficientFunction, Interval
from app.errors import BvpError
from app.fredholm import (
    CharacteristicMatrix,
    FredholmReport,
    analyze,
    characteristic_matrix,
    fredholm_report,
    kernel_basis_functions,
)
from app.ode_core import DifferentialSystem, fundamental_solutions, solve_inhomogeneous_cauchy
from app.solver import BvpSolution, BvpSolver, SolutionStatus, solve_bvp
from app.tolerances import Tolerances, get_profile

__all__ = [
    "BoundaryOperator",
    "IntegralTerm",
    "PointTerm",
    "apply_to_function",
    "apply_to_matrix",
    "canonical_operator",
    "caputo_derivative",
    "cauchy_operator",
    "CoefficientFunction",
    "Interval",
    "BvpError",
    "CharacteristicMatrix",
    "FredholmReport",
    "analyze",
    "characteristic_matrix",
    "fredholm_report",
    "kernel_basis_functions",
    "DifferentialSystem",
    "fundamental_solutions",
    "solve_inhomogeneous_cauchy",
    "BvpSolution",
    "BvpSolver",
    "SolutionStatus",
    "solve_bvp",
    "Tolerances",
    "get_profile",
]
