"""Characteristic matrix M(L, B), its numerical rank and the Fredholm numbers.

    M(L, B) = ([B Y_1], ..., [B Y_r])            (l x rm)
    index    = rm - l
    dim ker  = rm - rank M,  dim coker = l - rank M
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
import scipy.linalg

from app.boundary import BoundaryOperator, apply_to_function, apply_to_matrix
from app.errors import ShapeMismatch
from app.ode_core import (
    DifferentialSystem,
    FundamentalSolution,
    LinearCombination,
    fundamental_solutions,
    solve_inhomogeneous_cauchy,
)
from app.tolerances import Tolerances, resolve

logger = logging.getLogger(__name__)

# Singular values within this factor of the threshold are reported as borderline.
BORDERLINE_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class CharacteristicMatrix:
    data: np.ndarray
    m: int
    r: int
    l: int
    tol: float
    quad_tol: float

    def __post_init__(self) -> None:
        if self.data.shape != (self.l, self.r * self.m):
            raise ShapeMismatch(
                f"Characteristic matrix has shape {self.data.shape}, expected {(self.l, self.r * self.m)}"
            )

    @property
    def rm(self) -> int:
        return self.r * self.m

    @property
    def block_columns(self) -> list[np.ndarray]:
        """[B Y_1], ..., [B Y_r], each l x m."""
        return [self.data[:, i * self.m:(i + 1) * self.m] for i in range(self.r)]

    def to_dict(self) -> dict[str, Any]:
        from app.export import encode_complex

        return {
            "data": encode_complex(self.data),
            "m": self.m,
            "r": self.r,
            "l": self.l,
            "tol": self.tol,
            "quad_tol": self.quad_tol,
        }


@dataclass(frozen=True)
class FredholmReport:
    index: int
    rank: int
    dim_ker: int
    dim_coker: int
    singular_values: tuple[float, ...]
    rank_tol: float
    invertible: bool
    threshold: float
    # "relative" when rank_tol * s_max * max(l, rm) set the threshold, "absolute" when the rank_atol floor did
    threshold_source: str = "relative"

    def statements(self) -> list[str]:
        lines = [
            f"index: {self.index}",
            f"Fredholm numbers: dim ker = {self.dim_ker}, dim coker = {self.dim_coker}",
            f"invertible: {str(self.invertible).lower()}",
        ]
        if self.dim_coker == 0:
            lines.append("solvable for every right-hand side")
        else:
            lines.append(f"solvable only for right-hand sides meeting {self.dim_coker} compatibility condition(s)")
        if self.dim_ker == 0:
            lines.append("homogeneous problem has only trivial solution")
        else:
            lines.append(f"homogeneous problem has {self.dim_ker} linearly independent solution(s)")
        return lines

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "rank": self.rank,
            "dim_ker": self.dim_ker,
            "dim_coker": self.dim_coker,
            "singular_values": list(self.singular_values),
            "rank_tol": self.rank_tol,
            "invertible": self.invertible,
            "diagnostics": {"threshold": self.threshold, "threshold_source": self.threshold_source},
        }


def _fundamentals(
    system: DifferentialSystem, tol: Tolerances, solutions: Sequence[FundamentalSolution] | None
) -> list[FundamentalSolution]:
    if solutions is not None:
        return list(solutions)
    return fundamental_solutions(system, tol.rtol, atol=tol.atol)


def characteristic_matrix(
    system: DifferentialSystem,
    B: BoundaryOperator,
    tolerances: Tolerances | None = None,
    *,
    solutions: Sequence[FundamentalSolution] | None = None,
) -> CharacteristicMatrix:
    """Block i is [B Y_i], B applied column by column to the fundamental solution Y_i."""
    if not B.matches(system):
        raise ShapeMismatch(
            f"Boundary operator built for {B.signature} on {B.interval}, "
            f"system is {system.signature} on {system.interval}"
        )
    tol = resolve(tolerances)
    blocks = [apply_to_matrix(B, Y, tol) for Y in _fundamentals(system, tol, solutions)]
    data = np.hstack(blocks)
    logger.debug("Characteristic matrix %dx%d assembled", *data.shape)
    return CharacteristicMatrix(data, system.m, system.r, B.l, tol.rtol, tol.quad_tol)


def _as_array(M: CharacteristicMatrix | np.ndarray) -> np.ndarray:
    data = M.data if isinstance(M, CharacteristicMatrix) else np.atleast_2d(np.asarray(M, dtype=complex))
    if data.ndim != 2:
        raise ShapeMismatch(f"Expected a matrix, got shape {data.shape}")
    return data


def rank_threshold(singular_values: np.ndarray, shape: tuple[int, int], rank_tol: float, rank_atol: float) -> float:
    return threshold_with_source(singular_values, shape, rank_tol, rank_atol)[0]


def threshold_with_source(
    singular_values: np.ndarray, shape: tuple[int, int], rank_tol: float, rank_atol: float
) -> tuple[float, str]:
    smax = float(singular_values[0]) if singular_values.size else 0.0
    relative = rank_tol * smax * max(shape)
    return (relative, "relative") if relative >= rank_atol else (rank_atol, "absolute")


def numerical_rank(singular_values: np.ndarray, threshold: float) -> int:
    return int(np.count_nonzero(singular_values > threshold))


def _tolerance_pair(tolerances: Tolerances | None, rank_tol: float | None, rank_atol: float | None) -> tuple[float, float]:
    tol = resolve(tolerances)
    return (tol.rank_tol if rank_tol is None else rank_tol, tol.rank_atol if rank_atol is None else rank_atol)


def fredholm_report(
    M: CharacteristicMatrix | np.ndarray,
    tolerances: Tolerances | None = None,
    *,
    rank_tol: float | None = None,
    rank_atol: float | None = None,
) -> FredholmReport:
    """Rank, index and Fredholm numbers of an l x rm characteristic matrix.

    A singular value counts when it exceeds max(rank_tol * s_max * max(l, rm), rank_atol).
    """
    data = _as_array(M)
    l, rm = data.shape
    rank_tol, rank_atol = _tolerance_pair(tolerances, rank_tol, rank_atol)
    s = scipy.linalg.svd(data, compute_uv=False)
    threshold, source = threshold_with_source(s, (l, rm), rank_tol, rank_atol)
    rank = numerical_rank(s, threshold)
    borderline = [v for v in s if threshold / BORDERLINE_FACTOR < v <= threshold * BORDERLINE_FACTOR]
    if borderline:
        logger.warning(
            "Singular value(s) %s lie within a factor %g of the rank threshold %.3g; rank %d is borderline",
            ", ".join(f"{v:.3g}" for v in borderline), BORDERLINE_FACTOR, threshold, rank,
        )
    logger.debug("rank %d of %dx%d matrix, threshold %.3g (%s)", rank, l, rm, threshold, source)
    return FredholmReport(
        index=rm - l,
        rank=rank,
        dim_ker=rm - rank,
        dim_coker=l - rank,
        singular_values=tuple(float(v) for v in s),
        rank_tol=rank_tol,
        invertible=(l == rm and rank == rm),
        threshold=threshold,
        threshold_source=source,
    )


def _normalize_signs(basis: np.ndarray) -> np.ndarray:
    """Scale each column by a unit factor so its largest-magnitude entry is real and positive."""
    out = basis.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        pivot = col[int(np.argmax(np.abs(col)))]
        if abs(pivot) > 0:
            out[:, j] = col * (abs(pivot) / pivot)
    return out


def null_space(
    M: CharacteristicMatrix | np.ndarray,
    tolerances: Tolerances | None = None,
    *,
    rank_tol: float | None = None,
    rank_atol: float | None = None,
) -> np.ndarray:
    """Orthonormal basis of ker M as the columns of an rm x dim_ker matrix."""
    data = _as_array(M)
    rank_tol, rank_atol = _tolerance_pair(tolerances, rank_tol, rank_atol)
    _, s, vh = scipy.linalg.svd(data, full_matrices=True)
    rank = numerical_rank(s, rank_threshold(s, data.shape, rank_tol, rank_atol))
    return _normalize_signs(vh[rank:].conj().T)


def cokernel_basis(
    M: CharacteristicMatrix | np.ndarray,
    tolerances: Tolerances | None = None,
    *,
    rank_tol: float | None = None,
    rank_atol: float | None = None,
) -> np.ndarray:
    """Orthonormal basis of ker M^* (l x dim_coker): c is reachable iff it is orthogonal to these."""
    data = _as_array(M)
    rank_tol, rank_atol = _tolerance_pair(tolerances, rank_tol, rank_atol)
    u, s, _ = scipy.linalg.svd(data, full_matrices=True)
    rank = numerical_rank(s, rank_threshold(s, data.shape, rank_tol, rank_atol))
    return _normalize_signs(u[:, rank:])


def lift_cauchy_data(solutions: Sequence[FundamentalSolution], q: np.ndarray) -> LinearCombination:
    """y = sum_i Y_i q_i for q = col(q_1, ..., q_r) in C^{rm}."""
    m = solutions[0].system.m
    q = np.asarray(q, dtype=complex).reshape(-1)
    return LinearCombination(tuple(solutions), tuple(q[i * m:(i + 1) * m] for i in range(len(solutions))))


def kernel_basis_functions(
    system: DifferentialSystem,
    B: BoundaryOperator,
    M: CharacteristicMatrix,
    tolerances: Tolerances | None = None,
    *,
    solutions: Sequence[FundamentalSolution] | None = None,
) -> list[LinearCombination]:
    """The homogeneous BVP solutions lifted from an orthonormal basis of ker M."""
    tol = resolve(tolerances)
    basis = null_space(M, tol)
    if basis.shape[1] == 0:
        return []
    sols = _fundamentals(system, tol, solutions)
    return [lift_cauchy_data(sols, basis[:, s]) for s in range(basis.shape[1])]


def brute_force_kernel_dimension(
    system: DifferentialSystem, B: BoundaryOperator, tolerances: Tolerances | None = None
) -> int:
    """dim of {y : Ly = 0, By = 0} from rm separate vector Cauchy solves.

    Each unit vector e_j in C^{rm} is used as Cauchy data; the images B y_j
    form an l x rm matrix whose numerical null space is the kernel.
    """
    tol = resolve(tolerances)
    columns = []
    for j in range(system.rm):
        e = np.zeros(system.rm, dtype=complex)
        e[j] = 1.0
        y = solve_inhomogeneous_cauchy(system, None, e, tol.rtol, atol=tol.atol)
        columns.append(apply_to_function(B, y, tol))
    images = np.column_stack(columns)
    return fredholm_report(images, tol).dim_ker


def analyze(
    system: DifferentialSystem, B: BoundaryOperator, tolerances: Tolerances | None = None
) -> tuple[CharacteristicMatrix, FredholmReport]:
    tol = resolve(tolerances)
    M = characteristic_matrix(system, B, tol)
    return M, fredholm_report(M, tol)
