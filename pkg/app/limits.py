"""Perturbation-sequence experiments: Sobolev-norm convergence of coefficients,
of fundamental solutions and of characteristic matrices, and semicontinuity
of the Fredholm numbers along the sequence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence, Union

import numpy as np

from app.boundary import BoundaryOperator, IntegralTerm, PointTerm
from app.coefficients import CoefficientFunction
from app.errors import DomainError, NotApplicable, OrderUnavailable, ShapeMismatch
from app.export import encode_complex, write_csv, write_json, write_xlsx
from app.fredholm import (
    FredholmReport,
    characteristic_matrix,
    cokernel_basis,
    fredholm_report,
    null_space,
)
from app.ode_core import DifferentialSystem, Trajectory, fundamental_solutions
from app.quadrature import integrate
from app.tolerances import Tolerances, resolve

logger = logging.getLogger(__name__)

DEFAULT_K_VALUES = tuple(range(2, 65, 2))
MIN_RATE_POINTS = 4
# Final ||M_k - M||_F below this counts as converged.
CONVERGENCE_TOL = 1e-6

Differentiable = Union[Trajectory, CoefficientFunction]


@dataclass(frozen=True)
class SobolevNorm:
    """||y||_{n,p} = sum_{k <= n} ||y^(k)||_p.

    Array values contribute entrywise: ||y^(k)||_p^p = int sum_ij |y_ij^(k)|^p.
    p = inf is a maximum over ``points`` equispaced nodes, a lower bound of the sup.
    """

    n: int
    p: float = 2.0
    points: int = 201

    def __post_init__(self) -> None:
        if self.n < 0:
            raise DomainError(f"Sobolev order must be >= 0, got {self.n}")
        if not self.p >= 1:
            raise DomainError(f"Sobolev exponent must lie in [1, inf], got {self.p}")
        if self.points < 2:
            raise DomainError("The sup grid needs at least 2 points")

    def raised(self, extra: int) -> "SobolevNorm":
        return SobolevNorm(self.n + extra, self.p, self.points)

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "p": "inf" if math.isinf(self.p) else self.p, "points": self.points}


def _check_order(y: Differentiable, n: int) -> None:
    available = y.max_order if isinstance(y, Trajectory) else y.max_derivative
    if available is not None and n > available:
        raise OrderUnavailable(f"Sobolev order {n} needs derivatives that only go up to {available}")


def _norm_of(
    derivative: Callable[[np.ndarray, int], np.ndarray], a: float, b: float, norm: SobolevNorm, tol: Tolerances
) -> float:
    total = 0.0
    for k in range(norm.n + 1):
        if math.isinf(norm.p):
            values = derivative(np.linspace(a, b, norm.points), k)
            total += float(np.max(np.abs(values))) if values.size else 0.0
            continue

        def integrand(ts: np.ndarray, k: int = k) -> np.ndarray:
            values = np.abs(derivative(ts, k)) ** norm.p
            return values.reshape(ts.size, -1).sum(axis=1)

        integral = float(np.real(integrate(
            integrand, a, b, tol=tol.quad_tol, nodes=tol.gl_nodes, max_panels=tol.max_panels,
        )))
        total += max(integral, 0.0) ** (1.0 / norm.p)
    return total


def sobolev_norm(y: Differentiable, norm: SobolevNorm, tolerances: Tolerances | None = None) -> float:
    _check_order(y, norm.n)
    return _norm_of(y.derivative, y.interval.a, y.interval.b, norm, resolve(tolerances))


def sobolev_gap(
    y: Differentiable, z: Differentiable, norm: SobolevNorm, tolerances: Tolerances | None = None
) -> float:
    """||y - z||_{n,p} for two functions on the same interval."""
    if y.interval != z.interval:
        raise DomainError("Sobolev gap needs both functions on the same interval")
    _check_order(y, norm.n)
    _check_order(z, norm.n)
    return _norm_of(
        lambda ts, k: y.derivative(ts, k) - z.derivative(ts, k),
        y.interval.a, y.interval.b, norm, resolve(tolerances),
    )


# -- sequences ----------------------------------------------------------------

Member = Callable[[int], tuple[DifferentialSystem, BoundaryOperator]]


@dataclass(eq=False)
class PerturbationSequence:
    """A base problem and a generator k -> (L(k), B(k)) of nearby problems."""

    base: tuple[DifferentialSystem, BoundaryOperator]
    member: Member
    k_values: tuple[int, ...] = DEFAULT_K_VALUES
    name: str = "sequence"

    def __post_init__(self) -> None:
        self.k_values = tuple(int(k) for k in self.k_values)
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise DomainError(f"k values must be positive integers, got {self.k_values}")
        system, B = self.base
        if not B.matches(system):
            raise ShapeMismatch("Base boundary operator does not match the base system")

    def build(self, k: int) -> tuple[DifferentialSystem, BoundaryOperator]:
        system, B = self.member(k)
        base_system, base_B = self.base
        if system.signature != base_system.signature or system.interval != base_system.interval:
            raise ShapeMismatch(f"Member k={k} has signature {system.signature}, base has {base_system.signature}")
        if B.l != base_B.l or not B.matches(system):
            raise ShapeMismatch(f"Member k={k} boundary operator does not fit the sequence")
        return system, B


def _delta_rate(k: int, rate: float) -> float:
    return float(k) ** (-rate)


def coefficient_family(
    system: DifferentialSystem,
    B: BoundaryOperator,
    deltas: Sequence[Any],
    *,
    rate: float = 1.0,
    k_values: Sequence[int] = DEFAULT_K_VALUES,
) -> PerturbationSequence:
    """A_j(., k) = A_j + k^(-rate) E_j; ``deltas[j]`` is E_j (None for no change)."""
    if len(deltas) != system.r:
        raise ShapeMismatch(f"Need one delta per coefficient ({system.r}), got {len(deltas)}")
    perturbations = [
        None if d is None else (d if isinstance(d, CoefficientFunction)
                                else CoefficientFunction.constant(d, system.interval))
        for d in deltas
    ]

    def member(k: int) -> tuple[DifferentialSystem, BoundaryOperator]:
        weight = _delta_rate(k, rate)
        coeffs = [A if d is None else A.plus(d, weight) for A, d in zip(system.coefficients, perturbations)]
        return system.with_coefficients(coeffs), B

    return PerturbationSequence((system, B), member, tuple(k_values), "coefficient")


def boundary_family(
    system: DifferentialSystem,
    B: BoundaryOperator,
    delta_alphas: Sequence[Any],
    *,
    rate: float = 1.0,
    k_values: Sequence[int] = DEFAULT_K_VALUES,
) -> PerturbationSequence:
    """alpha(k) = alpha + k^(-rate) delta for each point term; ``delta_alphas`` follows B.terms."""
    if len(delta_alphas) != len(B.terms):
        raise ShapeMismatch(f"Need one delta per boundary term ({len(B.terms)}), got {len(delta_alphas)}")

    def member(k: int) -> tuple[DifferentialSystem, BoundaryOperator]:
        weight = _delta_rate(k, rate)
        terms = []
        for term, delta in zip(B.terms, delta_alphas):
            if delta is not None and isinstance(term, PointTerm):
                term = PointTerm(term.point, term.order, term.alpha + weight * np.asarray(delta, dtype=complex))
            terms.append(term)
        return system, B.with_terms(terms)

    return PerturbationSequence((system, B), member, tuple(k_values), "boundary")


def constant_family(
    system: DifferentialSystem, B: BoundaryOperator, *, k_values: Sequence[int] = DEFAULT_K_VALUES
) -> PerturbationSequence:
    return PerturbationSequence((system, B), lambda k: (system, B), tuple(k_values), "constant")


# -- gaps -----------------------------------------------------------------------


def operator_gap_bound(
    system: DifferentialSystem, base: DifferentialSystem, norm: SobolevNorm, tolerances: Tolerances | None = None
) -> tuple[float, list[float]]:
    """Sum over j of ||A_j(k) - A_j||_{n,p}, the quantity controlling ||L(k) - L||; also the parts."""
    parts = [sobolev_gap(A_k, A, norm, tolerances) for A_k, A in zip(system.coefficients, base.coefficients)]
    return float(sum(parts)), parts


def boundary_gap(B: BoundaryOperator, base: BoundaryOperator, tolerances: Tolerances | None = None) -> float:
    """Term-wise distance of the boundary data: ||d alpha||_F + |d t| + |d order| + ||d Phi||_{0,p}."""
    if len(B.terms) != len(base.terms):
        raise ShapeMismatch("Boundary operators have different term structure")
    gap = 0.0
    for term, ref in zip(B.terms, base.terms):
        if type(term) is not type(ref):
            raise ShapeMismatch("Boundary operators have different term structure")
        if isinstance(term, PointTerm):
            gap += float(np.linalg.norm(term.alpha - ref.alpha)) + abs(term.point - ref.point)
            gap += abs(term.order - ref.order)
        elif isinstance(term, IntegralTerm):
            if term.derivative_order != ref.derivative_order:
                raise ShapeMismatch("Integral terms act on different derivatives")
            gap += sobolev_gap(term.kernel, ref.kernel, SobolevNorm(0, 2.0), tolerances)
    return gap


# -- report ---------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    coeff_norm_gaps: tuple[float, ...]
    fundsol_gaps: tuple[float, ...]
    boundary_gap: float
    char_matrix_gap: float
    rank: int
    dim_ker: int
    dim_coker: int
    index: int

    @property
    def operator_gap(self) -> float:
        return float(sum(self.coeff_norm_gaps))

    @property
    def invertible(self) -> bool:
        return self.dim_ker == 0 and self.dim_coker == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "coeff_norm_gaps": list(self.coeff_norm_gaps),
            "fundsol_gaps": list(self.fundsol_gaps),
            "boundary_gap": self.boundary_gap,
            "char_matrix_gap": self.char_matrix_gap,
            "rank": self.rank,
            "dim_ker": self.dim_ker,
            "dim_coker": self.dim_coker,
            "index": self.index,
        }


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Per-k rows plus the base report; every verdict is computed from these alone."""

    name: str
    rows: tuple[ConvergenceRow, ...]
    base: FredholmReport
    norm: SobolevNorm
    convergence_tol: float = CONVERGENCE_TOL
    expect_converge: bool = False

    @property
    def gaps(self) -> np.ndarray:
        return np.array([row.char_matrix_gap for row in self.rows])

    @property
    def matrices_converge(self) -> bool:
        """Gaps never grow along k and the last one is below convergence_tol."""
        gaps = self.gaps
        if gaps.size == 0:
            return False
        non_increasing = bool(np.all(np.diff(gaps) <= 1e-12 + 1e-9 * gaps[:-1]))
        return non_increasing and bool(gaps[-1] < self.convergence_tol)

    @property
    def threshold(self) -> float:
        """Half the smallest kept singular value of the base matrix (inf at rank 0)."""
        if self.base.rank == 0:
            return math.inf
        return 0.5 * self.base.singular_values[self.base.rank - 1]

    @property
    def settled_rows(self) -> tuple[ConvergenceRow, ...]:
        """Rows from the first k whose gap falls below the threshold onwards."""
        for idx, row in enumerate(self.rows):
            if row.char_matrix_gap < self.threshold:
                return self.rows[idx:]
        return ()

    @property
    def semicontinuity_holds(self) -> bool:
        return all(row.rank >= self.base.rank for row in self.settled_rows)

    @property
    def invertibility_persists(self) -> bool:
        return not self.base.invertible or all(row.invertible for row in self.settled_rows)

    @property
    def solvability_persists(self) -> bool:
        return self.base.dim_coker != 0 or all(row.dim_coker == 0 for row in self.settled_rows)

    @property
    def uniqueness_persists(self) -> bool:
        return self.base.dim_ker != 0 or all(row.dim_ker == 0 for row in self.settled_rows)

    @property
    def index_invariant(self) -> bool:
        return all(row.index == self.base.index for row in self.rows)

    @property
    def fitted_rate(self) -> float | None:
        """Least-squares slope of log gap against log k, over rows with a positive gap."""
        usable = [(row.k, row.char_matrix_gap) for row in self.rows if row.char_matrix_gap > 0]
        if len(usable) < MIN_RATE_POINTS:
            return None
        ks, gaps = np.array(usable, dtype=float).T
        slope, _ = np.polyfit(np.log(ks), np.log(gaps), 1)
        return float(slope)

    def verdicts(self) -> dict[str, Any]:
        return {
            "matrices_converge": self.matrices_converge,
            "semicontinuity_holds": self.semicontinuity_holds,
            "fitted_rate": self.fitted_rate,
            "invertibility_persists": self.invertibility_persists,
            "solvability_persists": self.solvability_persists,
            "uniqueness_persists": self.uniqueness_persists,
            "index_invariant": self.index_invariant,
        }

    @property
    def passed(self) -> bool:
        return self.matrices_converge or not self.expect_converge

    def to_rows(self) -> tuple[list[str], list[list[Any]]]:
        r = len(self.rows[0].coeff_norm_gaps) if self.rows else 0
        cols = len(self.rows[0].fundsol_gaps) if self.rows else 0
        header = (
            ["k"]
            + [f"coeff_gap_A{j}" for j in range(r)]
            + [f"fundsol_gap_Y{i + 1}" for i in range(cols)]
            + ["boundary_gap", "char_matrix_gap", "rank", "dim_ker", "dim_coker", "index"]
        )
        rows = [
            [row.k, *row.coeff_norm_gaps, *row.fundsol_gaps, row.boundary_gap, row.char_matrix_gap,
             row.rank, row.dim_ker, row.dim_coker, row.index]
            for row in self.rows
        ]
        return header, rows

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "norm": self.norm.to_dict(),
            "base": self.base.to_dict(),
            "threshold": None if math.isinf(self.threshold) else self.threshold,
            "convergence_tol": self.convergence_tol,
            "expect_converge": self.expect_converge,
            "verdicts": self.verdicts(),
            "rows": [row.to_dict() for row in self.rows],
        }


def run_sequence(
    seq: PerturbationSequence,
    norm: SobolevNorm,
    tolerances: Tolerances | None = None,
    *,
    convergence_tol: float = CONVERGENCE_TOL,
    expect_converge: bool = False,
) -> ConvergenceReport:
    """Evaluate every member of the sequence against the base problem, in k order."""
    tol = resolve(tolerances)
    base_system, base_B = seq.base
    base_solutions = fundamental_solutions(base_system, tol.rtol, atol=tol.atol)
    base_M = characteristic_matrix(base_system, base_B, tol, solutions=base_solutions)
    base_report = fredholm_report(base_M, tol)
    fundsol_norm = norm.raised(base_system.r)
    rows = []
    for k in seq.k_values:
        system, B = seq.build(k)
        solutions = fundamental_solutions(system, tol.rtol, atol=tol.atol)
        M = characteristic_matrix(system, B, tol, solutions=solutions)
        report = fredholm_report(M, tol)
        _, coeff_gaps = operator_gap_bound(system, base_system, norm, tol)
        rows.append(ConvergenceRow(
            k=k,
            coeff_norm_gaps=tuple(coeff_gaps),
            fundsol_gaps=tuple(sobolev_gap(Y, Y0, fundsol_norm, tol) for Y, Y0 in zip(solutions, base_solutions)),
            boundary_gap=boundary_gap(B, base_B, tol),
            char_matrix_gap=float(np.linalg.norm(M.data - base_M.data)),
            rank=report.rank,
            dim_ker=report.dim_ker,
            dim_coker=report.dim_coker,
            index=report.index,
        ))
        logger.debug("%s k=%d: gap %.3g, rank %d", seq.name, k, rows[-1].char_matrix_gap, report.rank)
    return ConvergenceReport(seq.name, tuple(rows), base_report, norm, convergence_tol, expect_converge)


def write_report(report: ConvergenceReport, directory: Path, *, xlsx: Path | None = None) -> list[Path]:
    """convergence.csv (one row per k) and convergence.json (verdicts and rows)."""
    directory = Path(directory)
    header, rows = report.to_rows()
    written = [
        write_csv(header, rows, directory / "convergence.csv"),
        write_json(report.to_dict(), directory / "convergence.json"),
    ]
    if xlsx is not None:
        verdict_rows = [[key, value] for key, value in sorted(report.verdicts().items())]
        written.append(write_xlsx({"convergence": (header, rows), "verdicts": (["verdict", "value"], verdict_rows)}, xlsx))
    return written


# -- instability of the Fredholm numbers ---------------------------------------------


@dataclass(frozen=True, eq=False)
class InstabilityDemo:
    before: FredholmReport
    after: FredholmReport
    perturbed: BoundaryOperator
    epsilon: float
    u: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "before": self.before.to_dict(),
            "after": self.after.to_dict(),
            "epsilon": self.epsilon,
            "u": encode_complex(self.u),
            "w": encode_complex(self.w),
        }


def finite_rank_instability_demo(
    system: DifferentialSystem,
    B: BoundaryOperator,
    epsilon: float,
    tolerances: Tolerances | None = None,
) -> InstabilityDemo:
    """Raise rank M by one with the rank-one boundary perturbation epsilon * u w^*.

    u spans part of ker M^* and w part of ker M, both unit vectors, so
    M + epsilon u w^* differs from M by exactly epsilon in norm.
    """
    tol = resolve(tolerances)
    M = characteristic_matrix(system, B, tol)
    before = fredholm_report(M, tol)
    if before.rank >= min(B.l, system.rm):
        raise NotApplicable(f"M already has full rank {before.rank}; no rank-one perturbation can raise it")
    if not epsilon > before.threshold:
        raise NotApplicable(f"epsilon={epsilon:g} does not exceed the rank threshold {before.threshold:.3g}")
    u = cokernel_basis(M, tol)[:, 0]
    w = null_space(M, tol)[:, 0]
    perturbed = B.with_rank_one(u, w, epsilon)
    after = fredholm_report(characteristic_matrix(system, perturbed, tol), tol)
    logger.info(
        "Rank-one perturbation of size %g: (dim ker, dim coker) %s -> %s",
        epsilon, (before.dim_ker, before.dim_coker), (after.dim_ker, after.dim_coker),
    )
    return InstabilityDemo(before, after, perturbed, float(epsilon), u, w)
