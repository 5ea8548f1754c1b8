"""Differential systems, companion reduction and matrix Cauchy problems.

The order-r system

    y^(r)(t) + sum_{j=1..r} A_{r-j}(t) y^(r-j)(t) = f(t)

is rewritten as x' + K(t) x = g(t) with x = col(y, y', ..., y^(r-1)).
One solve of that first-order system with identity initial data yields
every fundamental solution Y_1, ..., Y_r at once.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from app.coefficients import CoefficientFunction, Interval
from app.errors import DomainError, IntegrationFailure, OrderUnavailable, ShapeMismatch
from app.tolerances import DEFAULT

logger = logging.getLogger(__name__)

# Embedded Runge–Kutta 8(5,3) with a 7th-order dense interpolant.
METHOD = "DOP853"


@dataclass(eq=False)
class DifferentialSystem:
    """The expression L: interval, dimension m, order r, smoothness n and A_0..A_{r-1}.

    ``coefficients[k]`` is A_k, the matrix multiplying y^(k).
    """

    interval: Interval
    m: int
    r: int
    n: int
    coefficients: tuple[CoefficientFunction, ...]

    def __post_init__(self) -> None:
        if self.m < 1 or self.r < 1 or self.n < 0:
            raise DomainError(f"Need m >= 1, r >= 1, n >= 0; got m={self.m}, r={self.r}, n={self.n}")
        self.coefficients = tuple(self.coefficients)
        if len(self.coefficients) != self.r:
            raise ShapeMismatch(f"Order {self.r} needs {self.r} coefficients, got {len(self.coefficients)}")
        for k, coeff in enumerate(self.coefficients):
            if coeff.shape != (self.m, self.m):
                raise ShapeMismatch(f"A_{k} has shape {coeff.shape}, expected {(self.m, self.m)}")
            if coeff.interval != self.interval:
                raise DomainError(f"A_{k} is defined on a different interval")
            if not coeff.supports(self.n):
                raise OrderUnavailable(
                    f"A_{k} supplies {coeff.max_derivative} derivatives, smoothness index n={self.n} needs {self.n}"
                )

    @classmethod
    def constant(cls, matrices: Sequence[Any], interval: Interval, n: int = 0) -> "DifferentialSystem":
        """Constant coefficients; ``matrices[k]`` is A_k."""
        coeffs = tuple(CoefficientFunction.constant(mat, interval) for mat in matrices)
        if not coeffs:
            raise ShapeMismatch("At least one coefficient matrix is required")
        return cls(interval, coeffs[0].shape[0], len(coeffs), n, coeffs)

    @property
    def rm(self) -> int:
        return self.r * self.m

    @property
    def signature(self) -> tuple[int, int, int]:
        return (self.m, self.r, self.n)

    @property
    def is_constant(self) -> bool:
        return all(c.is_constant for c in self.coefficients)

    def with_coefficients(self, coefficients: Sequence[CoefficientFunction]) -> "DifferentialSystem":
        return DifferentialSystem(self.interval, self.m, self.r, self.n, tuple(coefficients))

    def to_dict(self) -> dict[str, Any]:
        return {
            "interval": self.interval.to_dict(),
            "m": self.m,
            "r": self.r,
            "n": self.n,
            "coefficients": [c.to_dict() for c in self.coefficients],
        }


@dataclass(eq=False)
class CompanionSystem:
    """K(t): -I_m on the block superdiagonal, (A_0, ..., A_{r-1}) in the last block row."""

    system: DifferentialSystem

    def __post_init__(self) -> None:
        self._constant = self._assemble(np.array([self.system.interval.a]), 0)[0] \
            if self.system.is_constant else None

    @property
    def dimension(self) -> int:
        return self.system.rm

    @property
    def constant_matrix(self) -> np.ndarray | None:
        return self._constant

    def __call__(self, t: float | np.ndarray) -> np.ndarray:
        return self.derivative(t, 0)

    def derivative(self, t: float | np.ndarray, k: int = 0) -> np.ndarray:
        """k-th derivative of K at t (array t adds a leading axis)."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        if k == 0 and self._constant is not None:
            self.system.interval.check(ts)
            out = np.broadcast_to(self._constant, (ts.size,) + self._constant.shape).copy()
        else:
            out = self._assemble(ts, k)
        return out[0] if scalar else out

    def _assemble(self, ts: np.ndarray, k: int) -> np.ndarray:
        m, r = self.system.m, self.system.r
        out = np.zeros((ts.size, r * m, r * m), dtype=complex)
        if k == 0:
            for i in range(r - 1):
                out[:, i * m:(i + 1) * m, (i + 1) * m:(i + 2) * m] = -np.eye(m)
        for j, coeff in enumerate(self.system.coefficients):
            out[:, (r - 1) * m:, j * m:(j + 1) * m] = coeff.derivative(ts, k)
        return out


def build_companion(system: DifferentialSystem) -> CompanionSystem:
    return CompanionSystem(system)


class Trajectory(ABC):
    """Array-valued function on an interval with derivatives up to ``max_order``."""

    @property
    @abstractmethod
    def interval(self) -> Interval: ...

    @property
    @abstractmethod
    def max_order(self) -> int: ...

    @property
    @abstractmethod
    def value_shape(self) -> tuple[int, ...]: ...

    @abstractmethod
    def _derivatives(self, ts: np.ndarray, order: int) -> np.ndarray:
        """Derivative of the given order at every node, nodes on the leading axis."""

    def derivative(self, t: float | np.ndarray, order: int = 0) -> np.ndarray:
        if order < 0 or order > self.max_order:
            raise OrderUnavailable(f"Derivative order {order} requested, trajectory supplies 0..{self.max_order}")
        self.interval.check(t)
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = self._derivatives(ts, order)
        return out[0] if scalar else out

    def __call__(self, t: float | np.ndarray) -> np.ndarray:
        return self.derivative(t, 0)

    def column(self, j: int) -> "ColumnView":
        if len(self.value_shape) != 2:
            raise ShapeMismatch("Only matrix-valued trajectories have columns")
        if not 0 <= j < self.value_shape[1]:
            raise ShapeMismatch(f"Column {j} out of range for shape {self.value_shape}")
        return ColumnView(self, j)


@dataclass(eq=False)
class ColumnView(Trajectory):
    parent: Trajectory
    index: int

    @property
    def interval(self) -> Interval:
        return self.parent.interval

    @property
    def max_order(self) -> int:
        return self.parent.max_order

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.parent.value_shape[:-1]

    def _derivatives(self, ts: np.ndarray, order: int) -> np.ndarray:
        return self.parent._derivatives(ts, order)[..., self.index]


@dataclass(eq=False)
class CompanionTrajectory(Trajectory):
    """Dense output of x' + K x = g with rm x q state; exact initial data at t = a."""

    companion: CompanionSystem
    solution: Any
    initial: np.ndarray
    forcing: CoefficientFunction | None = None
    steps: int = 0

    @property
    def interval(self) -> Interval:
        return self.companion.system.interval

    @property
    def max_order(self) -> int:
        return 1

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.initial.shape

    def state(self, ts: np.ndarray) -> np.ndarray:
        rows, cols = self.initial.shape
        values = np.asarray(self.solution(ts), dtype=complex).T.reshape(ts.size, rows, cols)
        at_start = ts == self.interval.a
        if np.any(at_start):
            values[at_start] = self.initial
        return values

    def _derivatives(self, ts: np.ndarray, order: int) -> np.ndarray:
        z = self.state(ts)
        if order == 0:
            return z
        dz = -(self.companion(ts) @ z)
        if self.forcing is not None:
            m = self.companion.system.m
            dz[:, -m:, :] += self.forcing.derivative(ts, 0).reshape(ts.size, m, -1)
        return dz


def solve_matrix_cauchy(
    companion: CompanionSystem,
    initial: Any,
    tol: float | None = None,
    *,
    atol: float | None = None,
    forcing: CoefficientFunction | None = None,
) -> CompanionTrajectory:
    """Integrate Z' + K(t) Z = G(t), Z(a) = initial, across the whole interval.

    ``tol`` is the relative tolerance; ``atol`` defaults to tol / 100. The
    optional ``forcing`` f enters the last block row of G.
    """
    rtol = DEFAULT.rtol if tol is None else tol
    if not rtol > 0:
        raise DomainError(f"Integrator tolerance must be positive, got {rtol}")
    atol = rtol * 1e-2 if atol is None else atol
    z0 = np.array(initial, dtype=complex)
    if z0.ndim == 1:
        z0 = z0[:, None]
    rm, m = companion.dimension, companion.system.m
    if z0.ndim != 2 or z0.shape[0] != rm:
        raise ShapeMismatch(f"Initial data needs {rm} rows, got shape {z0.shape}")
    if forcing is not None and forcing.shape != (m,):
        raise ShapeMismatch(f"Right-hand side has shape {forcing.shape}, expected {(m,)}")
    cols = z0.shape[1]
    constant = companion.constant_matrix

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        state = z.reshape(rm, cols)
        k = constant if constant is not None else companion(t)
        dz = -(k @ state)
        if forcing is not None:
            dz[-m:, :] += forcing.value(t).reshape(m, 1)
        return dz.ravel()

    interval = companion.system.interval
    try:
        result = solve_ivp(
            rhs, (interval.a, interval.b), z0.ravel(),
            method=METHOD, rtol=rtol, atol=atol, dense_output=True,
        )
    except (ValueError, FloatingPointError, OverflowError) as e:
        logger.exception("Cauchy solve failed on [%g, %g]", interval.a, interval.b)
        raise IntegrationFailure(str(e)) from e
    if result.status != 0 or result.sol is None:
        raise IntegrationFailure(f"Integrator stopped at t={result.t[-1]:g}: {result.message}")
    if not np.all(np.isfinite(result.y[:, -1])):
        raise IntegrationFailure("Integrator produced a non-finite state")
    logger.debug(
        "Cauchy solve rm=%d cols=%d: %d steps, %d rhs evaluations",
        rm, cols, result.t.size - 1, result.nfev,
    )
    return CompanionTrajectory(companion, result.sol, z0, forcing, result.t.size - 1)


def derivative_recursion(
    system: DifferentialSystem,
    ts: np.ndarray,
    blocks: Sequence[np.ndarray],
    order: int,
    forcing: CoefficientFunction | None = None,
) -> np.ndarray:
    """y^(order) from y, ..., y^(r-1) by differentiating the equation.

    y^(r+s) = f^(s) - sum_j sum_{q<=s} C(s,q) A_{r-j}^(q) y^(r-j+s-q)
    """
    r = system.r
    if order < r:
        return blocks[order]
    top = order - r
    for k, coeff in enumerate(system.coefficients):
        if not coeff.supports(top):
            raise OrderUnavailable(
                f"Order {order} needs A_{k}^({top}), but only {coeff.max_derivative} derivatives are available"
            )
    if forcing is not None and not forcing.supports(top):
        raise OrderUnavailable(f"Order {order} needs f^({top}), but only {forcing.max_derivative} are available")
    derivs = list(blocks)
    for s in range(top + 1):
        acc = np.zeros_like(blocks[0])
        if forcing is not None:
            acc = acc + forcing.derivative(ts, s).reshape(ts.size, system.m, 1)
        for j in range(1, r + 1):
            coeff = system.coefficients[r - j]
            if coeff.is_zero:
                continue
            for q in range(s + 1):
                if q > 0 and coeff.is_constant:
                    break
                acc = acc - math.comb(s, q) * (coeff.derivative(ts, q) @ derivs[r - j + s - q])
        derivs.append(acc)
    return derivs[order]


@dataclass(eq=False)
class SystemTrajectory(Trajectory):
    """Solution y of the order-r system read off the companion state.

    ``columns`` selects which state columns this trajectory owns. A vector
    trajectory owns exactly one column and drops that axis.
    """

    system: DifferentialSystem
    cauchy: CompanionTrajectory
    columns: slice
    vector: bool = False
    forcing: CoefficientFunction | None = None

    @property
    def interval(self) -> Interval:
        return self.system.interval

    @property
    def max_order(self) -> int:
        return self.system.n + self.system.r

    @property
    def value_shape(self) -> tuple[int, ...]:
        width = len(range(*self.columns.indices(self.cauchy.initial.shape[1])))
        return (self.system.m,) if self.vector else (self.system.m, width)

    def _derivatives(self, ts: np.ndarray, order: int) -> np.ndarray:
        m = self.system.m
        z = self.cauchy.state(ts)[:, :, self.columns]
        blocks = [z[:, j * m:(j + 1) * m, :] for j in range(self.system.r)]
        out = derivative_recursion(self.system, ts, blocks, order, self.forcing)
        return out[..., 0] if self.vector else out


@dataclass(eq=False)
class FundamentalSolution(SystemTrajectory):
    """Y_i with Y_i^(j-1)(a) = delta_ij I_m; block j of Z_i(t) is Y_i^(j-1)(t)."""

    index: int = 1

    def companion_state(self, t: float | np.ndarray) -> np.ndarray:
        """Z_i(t), the rm x m companion columns belonging to Y_i."""
        self.interval.check(t)
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = self.cauchy.state(ts)[:, :, self.columns]
        return out[0] if scalar else out


def fundamental_solutions(
    system: DifferentialSystem, tol: float | None = None, *, atol: float | None = None
) -> list[FundamentalSolution]:
    """Y_1, ..., Y_r from a single rm x rm companion solve with Z(a) = I."""
    m = system.m
    cauchy = solve_matrix_cauchy(build_companion(system), np.eye(system.rm), tol, atol=atol)
    return [
        FundamentalSolution(system, cauchy, slice(i * m, (i + 1) * m), index=i + 1)
        for i in range(system.r)
    ]


def derivative_at(sol: Trajectory, t: float, order: int) -> np.ndarray:
    return sol.derivative(t, order)


def solve_inhomogeneous_cauchy(
    system: DifferentialSystem,
    f: CoefficientFunction | None,
    initial: Any,
    tol: float | None = None,
    *,
    atol: float | None = None,
) -> SystemTrajectory:
    """y with Ly = f and col(y(a), ..., y^(r-1)(a)) = initial. f=None means f = 0."""
    if f is not None and f.interval != system.interval:
        raise DomainError("Right-hand side is defined on a different interval")
    x0 = np.asarray(initial, dtype=complex).reshape(-1)
    if x0.size != system.rm:
        raise ShapeMismatch(f"Cauchy data needs {system.rm} entries, got {x0.size}")
    cauchy = solve_matrix_cauchy(build_companion(system), x0[:, None], tol, atol=atol, forcing=f)
    return SystemTrajectory(system, cauchy, slice(0, 1), vector=True, forcing=f)


def companion_fundamental_matrix(solutions: Sequence[FundamentalSolution], t: float) -> np.ndarray:
    """Z(t) = (Z_1(t), ..., Z_r(t)), the rm x rm companion fundamental matrix."""
    return np.hstack([sol.companion_state(t) for sol in solutions])


def wronskian(solutions: Sequence[FundamentalSolution], t: float) -> complex:
    """det Z(t); equals 1 at t = a."""
    return complex(np.linalg.det(companion_fundamental_matrix(solutions, t)))


@dataclass(eq=False)
class LinearCombination(Trajectory):
    """offset(t) + sum_i parts[i](t) @ weights[i].

    Matrix parts take vector weights (Y_i q_i); vector parts take scalar weights.
    """

    parts: tuple[Trajectory, ...]
    weights: tuple[np.ndarray, ...]
    offset: Trajectory | None = None

    def __post_init__(self) -> None:
        self.parts = tuple(self.parts)
        self.weights = tuple(np.asarray(w, dtype=complex) for w in self.weights)
        if len(self.parts) != len(self.weights):
            raise ShapeMismatch("Each part needs exactly one weight")
        if not self.parts and self.offset is None:
            raise ShapeMismatch("Empty linear combination")

    @property
    def _members(self) -> list[Trajectory]:
        return list(self.parts) + ([self.offset] if self.offset is not None else [])

    @property
    def interval(self) -> Interval:
        return self._members[0].interval

    @property
    def max_order(self) -> int:
        return min(t.max_order for t in self._members)

    @property
    def value_shape(self) -> tuple[int, ...]:
        if self.offset is not None:
            return self.offset.value_shape
        return self.parts[0].value_shape[:1]

    def _derivatives(self, ts: np.ndarray, order: int) -> np.ndarray:
        total = None if self.offset is None else self.offset._derivatives(ts, order)
        for part, weight in zip(self.parts, self.weights):
            values = part._derivatives(ts, order)
            term = values @ weight if weight.ndim else values * weight
            total = term if total is None else total + term
        return total


def ode_residual(
    system: DifferentialSystem,
    y: Trajectory,
    f: CoefficientFunction | None = None,
    grid: np.ndarray | None = None,
) -> float:
    """max over grid of |y^(r) + sum_j A_{r-j} y^(r-j) - f| (entrywise max)."""
    ts = system.interval.grid(101) if grid is None else np.asarray(grid, dtype=float)
    residual = y.derivative(ts, system.r)
    for k, coeff in enumerate(system.coefficients):
        vals = y.derivative(ts, k)
        residual = residual + (coeff.value(ts) @ vals if vals.ndim == 3 else
                               np.einsum("nij,nj->ni", coeff.value(ts), vals))
    if f is not None:
        forcing = f.value(ts)
        residual = residual - (forcing if residual.ndim == 2 else forcing[..., None])
    return float(np.max(np.abs(residual))) if residual.size else 0.0
