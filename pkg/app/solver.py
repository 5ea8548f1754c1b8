"""Inhomogeneous BVP Ly = f, By = c: classification and the full solution set.

Every solution is y_p + sum_i Y_i q_i, where y_p solves Ly = f with zero
Cauchy data and q solves M q = c - B y_p. The least-squares solve reuses
the SVD behind the rank decision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy.linalg

from app.boundary import BoundaryOperator, apply_to_function
from app.coefficients import CoefficientFunction
from app.errors import NotApplicable, ShapeMismatch
from app.export import encode_complex, trajectory_rows, write_csv, write_xlsx
from app.fredholm import (
    CharacteristicMatrix,
    FredholmReport,
    characteristic_matrix,
    fredholm_report,
    kernel_basis_functions,
    lift_cauchy_data,
)
from app.ode_core import (
    DifferentialSystem,
    FundamentalSolution,
    LinearCombination,
    Trajectory,
    fundamental_solutions,
    solve_inhomogeneous_cauchy,
)
from app.tolerances import Tolerances, resolve

logger = logging.getLogger(__name__)


class SolutionStatus(str, Enum):
    UNIQUE = "Unique"
    FAMILY = "Family"
    INCONSISTENT = "Inconsistent"


@dataclass(frozen=True, eq=False)
class BvpSolution:
    """Outcome of one (f, c) solve.

    ``dimension`` is the dimension of the solution family (dim ker M) and
    ``residual`` is ||M q - (c - B y_p)||, which certifies inconsistency.
    """

    status: SolutionStatus
    dimension: int
    residual: float
    particular: Trajectory | None
    kernel_basis: tuple[Trajectory, ...]
    q_particular: np.ndarray | None

    def combine(self, weights: Sequence[complex] = ()) -> Trajectory:
        """particular + sum_s weights[s] * kernel_basis[s]."""
        if self.particular is None:
            raise NotApplicable(f"An {self.status.value.lower()} problem has no solution to combine")
        weights = list(weights)
        if len(weights) != len(self.kernel_basis):
            raise ShapeMismatch(f"Expected {len(self.kernel_basis)} weights, got {len(weights)}")
        return LinearCombination(self.kernel_basis, tuple(np.asarray(w, dtype=complex) for w in weights),
                                 offset=self.particular)

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status.value,
            "dimension": self.dimension,
            "residual": self.residual,
            "q_particular": None if self.q_particular is None else encode_complex(self.q_particular),
        }


@dataclass(eq=False)
class BvpSolver:
    """Fundamental solutions, M and its SVD for one (L, B), shared by many solves."""

    system: DifferentialSystem
    B: BoundaryOperator
    tolerances: Tolerances | None = None
    solutions: list[FundamentalSolution] = field(init=False)
    matrix: CharacteristicMatrix = field(init=False)
    report: FredholmReport = field(init=False)
    kernel_basis: tuple[Trajectory, ...] = field(init=False)

    def __post_init__(self) -> None:
        self.tolerances = resolve(self.tolerances)
        tol = self.tolerances
        self.solutions = fundamental_solutions(self.system, tol.rtol, atol=tol.atol)
        self.matrix = characteristic_matrix(self.system, self.B, tol, solutions=self.solutions)
        self.report = fredholm_report(self.matrix, tol)
        self.kernel_basis = tuple(
            kernel_basis_functions(self.system, self.B, self.matrix, tol, solutions=self.solutions)
        )
        self._u, s, self._vh = scipy.linalg.svd(self.matrix.data, full_matrices=False)
        self._s = s[: self.report.rank]

    def least_squares(self, rhs: np.ndarray) -> np.ndarray:
        """Minimum-norm q minimising ||M q - rhs|| over the numerically kept singular values."""
        rank = self.report.rank
        coeffs = (self._u[:, :rank].conj().T @ rhs) / self._s
        return self._vh[:rank].conj().T @ coeffs

    def solve(self, f: CoefficientFunction | None, c: Any) -> BvpSolution:
        tol = self.tolerances
        c = np.asarray(c, dtype=complex).reshape(-1)
        if c.size != self.B.l:
            raise ShapeMismatch(f"Boundary data needs {self.B.l} entries, got {c.size}")
        forced = solve_inhomogeneous_cauchy(
            self.system, f, np.zeros(self.system.rm), tol.rtol, atol=tol.atol
        )
        rhs = c - apply_to_function(self.B, forced, tol)
        q = self.least_squares(rhs)
        residual = float(np.linalg.norm(self.matrix.data @ q - rhs))
        limit = tol.consistency_tol * (1.0 + float(np.linalg.norm(c)))
        if residual > limit:
            logger.info("Inconsistent boundary data: residual %.3g exceeds %.3g", residual, limit)
            return BvpSolution(SolutionStatus.INCONSISTENT, self.report.dim_ker, residual, None, (), None)
        status = SolutionStatus.UNIQUE if self.report.invertible else SolutionStatus.FAMILY
        homogeneous = lift_cauchy_data(self.solutions, q)
        particular = LinearCombination(homogeneous.parts, homogeneous.weights, offset=forced)
        logger.debug("Solved BVP: %s, residual %.3g", status.value, residual)
        return BvpSolution(status, self.report.dim_ker, residual, particular, self.kernel_basis, q)


def solve_bvp(
    system: DifferentialSystem,
    B: BoundaryOperator,
    f: CoefficientFunction | None,
    c: Any,
    tolerances: Tolerances | None = None,
) -> BvpSolution:
    return BvpSolver(system, B, tolerances).solve(f, c)


def export_csv(trajectories: Sequence[Trajectory], grid: np.ndarray, path: Path) -> Path:
    """Sampled trajectories: t, Re y_1, Im y_1, ..."""
    header, rows = trajectory_rows(list(trajectories), np.asarray(grid, dtype=float))
    return write_csv(header, rows, path)


def export_solution(
    solution: BvpSolution, grid: np.ndarray, directory: Path, *, xlsx: Path | None = None
) -> list[Path]:
    """solution.csv, plus kernel_basis.csv for a family; optionally one workbook with both."""
    if solution.particular is None:
        raise NotApplicable("Inconsistent problems have no trajectory to export")
    directory = Path(directory)
    grid = np.asarray(grid, dtype=float)
    sheets = {"solution": trajectory_rows([solution.particular], grid)}
    written = [write_csv(*sheets["solution"], directory / "solution.csv")]
    if solution.kernel_basis:
        sheets["kernel_basis"] = trajectory_rows(list(solution.kernel_basis), grid)
        written.append(write_csv(*sheets["kernel_basis"], directory / "kernel_basis.csv"))
    if xlsx is not None:
        written.append(write_xlsx(sheets, xlsx))
    return written
