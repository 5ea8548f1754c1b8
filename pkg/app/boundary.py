"""Boundary operators B: point terms (integer or Caputo order) and integral terms.

    By = sum alpha_k (D^{beta_k} y)(t_k) + sum int_a^b Phi(t) y^(d)(t) dt

The classical one-point-plus-integral form is the special case where every
point term sits at a and a single integral term acts on y^(n+r).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Sequence, Union

import numpy as np
from scipy.special import gamma

from app.coefficients import CoefficientFunction, Interval
from app.errors import DomainError, OrderUnavailable, ShapeMismatch
from app.export import encode_complex
from app.ode_core import DifferentialSystem, Trajectory
from app.quadrature import integrate, integrate_weakly_singular
from app.tolerances import Tolerances, resolve

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class PointTerm:
    """alpha @ (D^order y)(point). Non-integer orders are Caputo derivatives from a."""

    point: float
    order: float
    alpha: np.ndarray

    def __post_init__(self) -> None:
        self.alpha = np.atleast_2d(np.array(self.alpha, dtype=complex))
        self.point = float(self.point)
        self.order = float(self.order)
        if self.order < 0:
            raise DomainError(f"Derivative order must be >= 0, got {self.order}")

    @property
    def is_fractional(self) -> bool:
        return not self.order.is_integer()

    @property
    def classical_order(self) -> int:
        """Order of the classical derivative the term needs."""
        return math.ceil(self.order)

    def evaluate(self, y: Trajectory, tolerances: Tolerances) -> np.ndarray:
        if self.is_fractional:
            value = caputo_derivative(y, self.order, self.point, tolerances)
        else:
            value = y.derivative(self.point, int(self.order))
        return self.alpha @ value

    def to_dict(self) -> dict[str, Any]:
        return {"type": "point", "point": self.point, "order": self.order, "alpha": encode_complex(self.alpha)}


@dataclass(eq=False)
class IntegralTerm:
    """int_a^b kernel(t) @ y^(derivative_order)(t) dt."""

    kernel: CoefficientFunction
    derivative_order: int

    def __post_init__(self) -> None:
        if len(self.kernel.shape) != 2:
            raise ShapeMismatch(f"Integral kernel must be matrix-valued, got shape {self.kernel.shape}")
        if self.derivative_order < 0:
            raise DomainError(f"Derivative order must be >= 0, got {self.derivative_order}")

    @property
    def classical_order(self) -> int:
        return self.derivative_order

    def evaluate(self, y: Trajectory, tolerances: Tolerances) -> np.ndarray:
        interval = self.kernel.interval

        def integrand(ts: np.ndarray) -> np.ndarray:
            return np.einsum("nij,nj...->ni...", self.kernel.value(ts), y.derivative(ts, self.derivative_order))

        return integrate(
            integrand, interval.a, interval.b,
            tol=tolerances.quad_tol, nodes=tolerances.gl_nodes, max_panels=tolerances.max_panels,
        )

    def to_dict(self) -> dict[str, Any]:
        return {"type": "integral", "kernel": self.kernel.to_dict(), "derivative_order": self.derivative_order}


BoundaryTerm = Union[PointTerm, IntegralTerm]


@dataclass(eq=False)
class BoundaryOperator:
    """l scalar conditions on y in W^{n+r}_p([a, b]; C^m).

    ``signature`` is the (m, r, n) of the systems this operator applies to.
    """

    l: int
    terms: tuple[BoundaryTerm, ...]
    signature: tuple[int, int, int]
    interval: Interval

    def __post_init__(self) -> None:
        self.terms = tuple(self.terms)
        self.signature = tuple(int(v) for v in self.signature)
        if self.l < 1:
            raise DomainError(f"A boundary operator needs l >= 1 conditions, got {self.l}")
        m, r, n = self.signature
        for idx, term in enumerate(self.terms):
            shape = term.alpha.shape if isinstance(term, PointTerm) else term.kernel.shape
            if shape != (self.l, m):
                raise ShapeMismatch(f"Term {idx} has shape {shape}, expected {(self.l, m)}")
            if term.classical_order > n + r:
                raise OrderUnavailable(
                    f"Term {idx} needs derivative order {term.classical_order}, at most n+r={n + r} exists"
                )
            if isinstance(term, PointTerm) and not self.interval.contains(term.point):
                raise DomainError(f"Term {idx} point {term.point} lies outside [{self.interval.a}, {self.interval.b}]")
            if isinstance(term, IntegralTerm) and term.kernel.interval != self.interval:
                raise DomainError(f"Term {idx} kernel lives on a different interval")

    @property
    def m(self) -> int:
        return self.signature[0]

    @property
    def r(self) -> int:
        return self.signature[1]

    @property
    def n(self) -> int:
        return self.signature[2]

    @property
    def max_derivative_order(self) -> int:
        return max((t.classical_order for t in self.terms), default=0)

    def matches(self, system: DifferentialSystem) -> bool:
        return self.signature == system.signature and self.interval == system.interval

    def with_terms(self, terms: Sequence[BoundaryTerm]) -> "BoundaryOperator":
        return BoundaryOperator(self.l, tuple(terms), self.signature, self.interval)

    def with_rank_one(self, u: Any, w: Any, epsilon: float) -> "BoundaryOperator":
        """B + epsilon * u w^* acting on the Cauchy data col(y(a), ..., y^(r-1)(a)).

        The characteristic matrix changes by exactly epsilon * u w^*.
        """
        u = np.asarray(u, dtype=complex).reshape(-1)
        w = np.asarray(w, dtype=complex).reshape(-1)
        m, r, _ = self.signature
        if u.size != self.l or w.size != r * m:
            raise ShapeMismatch(f"Rank-one factors need sizes ({self.l}, {r * m}), got ({u.size}, {w.size})")
        extra = [
            PointTerm(self.interval.a, j, epsilon * np.outer(u, w[j * m:(j + 1) * m].conj()))
            for j in range(r)
        ]
        return self.with_terms(self.terms + tuple(extra))

    def to_dict(self) -> dict[str, Any]:
        return {
            "l": self.l,
            "signature": list(self.signature),
            "interval": self.interval.to_dict(),
            "terms": [t.to_dict() for t in self.terms],
        }


def _check_applicable(B: BoundaryOperator, y: Trajectory) -> None:
    if y.value_shape[0] != B.m:
        raise ShapeMismatch(f"Operator acts on C^{B.m}-valued functions, got shape {y.value_shape}")
    if B.max_derivative_order > y.max_order:
        raise OrderUnavailable(
            f"Operator needs derivatives up to {B.max_derivative_order}, trajectory supplies {y.max_order}"
        )


def apply_to_function(B: BoundaryOperator, y: Trajectory, tolerances: Tolerances | None = None) -> np.ndarray:
    """By in C^l, terms summed in index order."""
    tol = resolve(tolerances)
    _check_applicable(B, y)
    total = np.zeros((B.l,) + tuple(y.value_shape[1:]), dtype=complex)
    for term in B.terms:
        total = total + term.evaluate(y, tol)
    return total


def apply_to_matrix(B: BoundaryOperator, Y: Trajectory, tolerances: Tolerances | None = None) -> np.ndarray:
    """[BY]: column j is B applied to column j of Y."""
    if len(Y.value_shape) != 2:
        raise ShapeMismatch(f"Expected a matrix-valued trajectory, got shape {Y.value_shape}")
    _check_applicable(B, Y)
    columns = [apply_to_function(B, Y.column(j), tolerances) for j in range(Y.value_shape[1])]
    return np.column_stack(columns)


def caputo_derivative(
    y: Trajectory, beta: float, t: float, tolerances: Tolerances | None = None
) -> np.ndarray:
    """Caputo derivative of non-integer order beta > 0 from the left end a.

    With q = ceil(beta):  (1 / Gamma(q - beta)) int_a^t (t - s)^(q-1-beta) y^(q)(s) ds.
    At t = a the integral is empty and the result is zero.
    """
    beta = float(beta)
    if not beta > 0 or beta.is_integer():
        raise DomainError(f"Caputo order must be positive and non-integer, got {beta}")
    q = math.ceil(beta)
    if q > y.max_order:
        raise OrderUnavailable(f"Caputo order {beta} needs y^({q}), trajectory supplies {y.max_order}")
    y.interval.check(t)
    a = y.interval.a
    if t <= a:
        return np.zeros(y.value_shape, dtype=complex)
    tol = resolve(tolerances)
    integral = integrate_weakly_singular(
        lambda s: y.derivative(s, q), a, float(t), q - 1.0 - beta,
        tol=tol.quad_tol, nodes=tol.gl_nodes, max_panels=tol.max_panels,
    )
    return integral / gamma(q - beta)


# -- builders -----------------------------------------------------------------


def cauchy_operator(system: DifferentialSystem) -> BoundaryOperator:
    """C y = col(y(a), y'(a), ..., y^(r-1)(a)); l = rm."""
    m, rm = system.m, system.rm
    terms = []
    for j in range(system.r):
        alpha = np.zeros((rm, m), dtype=complex)
        alpha[j * m:(j + 1) * m] = np.eye(m)
        terms.append(PointTerm(system.interval.a, j, alpha))
    return BoundaryOperator(rm, tuple(terms), system.signature, system.interval)


def padded_cauchy_operator(system: DifferentialSystem, l: int) -> BoundaryOperator:
    """C followed by l - rm zero rows (l > rm)."""
    if l < system.rm:
        raise DomainError(f"Padding needs l >= rm = {system.rm}, got {l}")
    base = cauchy_operator(system)
    terms = [PointTerm(t.point, t.order, np.vstack([t.alpha, np.zeros((l - system.rm, system.m))]))
             for t in base.terms]
    return BoundaryOperator(l, tuple(terms), base.signature, base.interval)


def truncated_cauchy_operator(system: DifferentialSystem, l: int) -> BoundaryOperator:
    """The first l rows of C (l < rm)."""
    if not 1 <= l <= system.rm:
        raise DomainError(f"Truncation needs 1 <= l <= rm = {system.rm}, got {l}")
    base = cauchy_operator(system)
    terms = [PointTerm(t.point, t.order, t.alpha[:l]) for t in base.terms]
    return BoundaryOperator(l, tuple(terms), base.signature, base.interval)


def canonical_operator(
    system: DifferentialSystem,
    alphas: Sequence[Any],
    phi: CoefficientFunction | None = None,
) -> BoundaryOperator:
    """sum_{i < len(alphas)} alpha_i y^(i)(a) + int_a^b Phi(t) y^(n+r)(t) dt."""
    if not alphas:
        raise ShapeMismatch("At least one alpha matrix is required")
    mats = [np.atleast_2d(np.array(a, dtype=complex)) for a in alphas]
    terms: list[BoundaryTerm] = [PointTerm(system.interval.a, i, a) for i, a in enumerate(mats)]
    if phi is not None:
        terms.append(IntegralTerm(phi, system.n + system.r))
    return BoundaryOperator(mats[0].shape[0], tuple(terms), system.signature, system.interval)


def two_point_operator(
    system: DifferentialSystem,
    alphas: Sequence[Any],
    betas: Sequence[Any] = (),
) -> BoundaryOperator:
    """sum_k alpha_k y^(k)(a) + beta_k y^(k)(b)."""
    if not alphas and not betas:
        raise ShapeMismatch("At least one alpha or beta matrix is required")
    interval = system.interval
    terms: list[BoundaryTerm] = []
    for k, a in enumerate(alphas):
        terms.append(PointTerm(interval.a, k, a))
    for k, b in enumerate(betas):
        terms.append(PointTerm(interval.b, k, b))
    return BoundaryOperator(terms[0].alpha.shape[0], tuple(terms), system.signature, interval)
