"""Interval and matrix/vector-valued coefficient functions on it.

A CoefficientFunction carries the coefficients A_{r-j} of the differential
expression, the right-hand side f and the kernels of integral boundary terms.
All three use the same representations: constant, polynomial in (t - a), or
sampled on a grid and interpolated by a spline.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np
from scipy.interpolate import BSpline, make_interp_spline

from app.errors import DomainError, OrderUnavailable, ShapeMismatch
from app.export import encode_complex

logger = logging.getLogger(__name__)

# Relative slack when deciding whether t lies in [a, b].
_EDGE_SLACK = 1e-12


@dataclass(frozen=True)
class Interval:
    """Finite interval [a, b] with a < b."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise DomainError(f"Interval endpoints must be finite, got [{self.a}, {self.b}]")
        if not self.a < self.b:
            raise DomainError(f"Interval needs a < b, got [{self.a}, {self.b}]")

    @property
    def length(self) -> float:
        return self.b - self.a

    def contains(self, t: float | np.ndarray) -> bool:
        slack = _EDGE_SLACK * max(1.0, self.length, abs(self.a), abs(self.b))
        ts = np.asarray(t, dtype=float)
        return bool(np.all((ts >= self.a - slack) & (ts <= self.b + slack)))

    def check(self, t: float | np.ndarray) -> None:
        if not self.contains(t):
            raise DomainError(f"t={t!r} lies outside [{self.a}, {self.b}]")

    def grid(self, points: int = 101) -> np.ndarray:
        return np.linspace(self.a, self.b, points)

    def to_dict(self) -> dict[str, Any]:
        return {"a": self.a, "b": self.b}


class CoefficientKind(str, Enum):
    CONSTANT = "constant"
    POLYNOMIAL = "polynomial"
    SAMPLED = "sampled"


@dataclass(eq=False)
class CoefficientFunction:
    """Array-valued function of t on an interval, with derivative access.

    Use the ``constant``, ``polynomial`` and ``sampled`` constructors.
    ``max_derivative`` is None when exact derivatives of every order exist.
    """

    kind: CoefficientKind
    interval: Interval
    shape: tuple[int, ...]
    # constant: value; polynomial: stacked coefficients; sampled: values at grid
    data: np.ndarray
    grid: np.ndarray | None = None
    order: int | None = None
    _splines: tuple[BSpline, BSpline] | None = field(default=None, repr=False)

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value: Any, interval: Interval) -> "CoefficientFunction":
        arr = np.array(value, dtype=complex)
        return cls(CoefficientKind.CONSTANT, interval, arr.shape, arr)

    @classmethod
    def zeros(cls, shape: tuple[int, ...], interval: Interval) -> "CoefficientFunction":
        return cls.constant(np.zeros(shape, dtype=complex), interval)

    @classmethod
    def polynomial(cls, coefficients: Sequence[Any], interval: Interval) -> "CoefficientFunction":
        """sum_p coefficients[p] * (t - a)**p."""
        arr = np.array(coefficients, dtype=complex)
        if arr.ndim < 1 or arr.shape[0] == 0:
            raise ShapeMismatch("A polynomial coefficient needs at least one term")
        return cls(CoefficientKind.POLYNOMIAL, interval, arr.shape[1:], arr)

    @classmethod
    def sampled(
        cls,
        grid: Sequence[float],
        values: Sequence[Any],
        interval: Interval,
        order: int = 3,
    ) -> "CoefficientFunction":
        """Spline of degree ``order`` through (grid[i], values[i])."""
        ts = np.asarray(grid, dtype=float)
        vals = np.array(values, dtype=complex)
        if ts.ndim != 1 or vals.shape[0] != ts.size:
            raise ShapeMismatch(
                f"Sampled data needs one value per grid point: {ts.size} points, {vals.shape[0]} values"
            )
        if order < 1:
            raise DomainError(f"Interpolation order must be >= 1, got {order}")
        if ts.size < order + 1:
            raise DomainError(f"Need at least {order + 1} samples for order {order}, got {ts.size}")
        if np.any(np.diff(ts) <= 0):
            raise DomainError("Sample grid must be strictly increasing")
        if not (np.isclose(ts[0], interval.a) and np.isclose(ts[-1], interval.b)):
            raise DomainError(f"Sample grid must span [{interval.a}, {interval.b}]")
        flat = vals.reshape(ts.size, -1)
        splines = (
            make_interp_spline(ts, flat.real, k=order),
            make_interp_spline(ts, flat.imag, k=order),
        )
        return cls(CoefficientKind.SAMPLED, interval, vals.shape[1:], vals, ts, order, splines)

    # -- queries ------------------------------------------------------------

    @property
    def max_derivative(self) -> int | None:
        if self.kind is CoefficientKind.SAMPLED:
            return self.order - 1
        return None

    def supports(self, k: int) -> bool:
        return self.max_derivative is None or k <= self.max_derivative

    @property
    def is_zero(self) -> bool:
        return self.kind is not CoefficientKind.SAMPLED and not np.any(self.data)

    @property
    def is_constant(self) -> bool:
        return self.kind is CoefficientKind.CONSTANT

    def value(self, t: float | np.ndarray) -> np.ndarray:
        return self.derivative(t, 0)

    def __call__(self, t: float | np.ndarray) -> np.ndarray:
        return self.derivative(t, 0)

    def derivative(self, t: float | np.ndarray, k: int = 0) -> np.ndarray:
        """k-th derivative at t; array t gives an array with t as leading axis."""
        if k < 0:
            raise DomainError(f"Derivative order must be >= 0, got {k}")
        if not self.supports(k):
            raise OrderUnavailable(
                f"{self.kind.value} coefficient supplies derivatives up to {self.max_derivative}, asked for {k}"
            )
        self.interval.check(t)
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind is CoefficientKind.CONSTANT:
            out = np.broadcast_to(self.data if k == 0 else np.zeros_like(self.data),
                                  (ts.size,) + self.shape).copy()
        elif self.kind is CoefficientKind.POLYNOMIAL:
            out = self._polynomial_derivative(ts, k)
        else:
            re, im = self._splines
            tc = np.clip(ts, self.interval.a, self.interval.b)
            out = (re(tc, nu=k) + 1j * im(tc, nu=k)).reshape((ts.size,) + self.shape)
        return out[0] if scalar else out

    def _polynomial_derivative(self, ts: np.ndarray, k: int) -> np.ndarray:
        degree = self.data.shape[0] - 1
        if k > degree:
            return np.zeros((ts.size,) + self.shape, dtype=complex)
        powers = np.arange(degree - k + 1)
        factors = np.array([math.perm(p + k, k) for p in powers], dtype=float)
        x = (ts - self.interval.a)[:, None] ** powers[None, :]
        coeffs = self.data[k:] * factors.reshape((-1,) + (1,) * len(self.shape))
        return np.tensordot(x, coeffs, axes=(1, 0))

    # -- algebra ------------------------------------------------------------

    def plus(self, other: "CoefficientFunction", weight: complex = 1.0) -> "CoefficientFunction":
        """self + weight * other, kept in the simplest representation that is exact."""
        if other.shape != self.shape:
            raise ShapeMismatch(f"Cannot add shapes {self.shape} and {other.shape}")
        if other.interval != self.interval:
            raise DomainError("Cannot add coefficient functions on different intervals")
        if self.kind is CoefficientKind.SAMPLED or other.kind is CoefficientKind.SAMPLED:
            base = self if self.kind is CoefficientKind.SAMPLED else other
            values = self.value(base.grid) + weight * other.value(base.grid)
            return CoefficientFunction.sampled(base.grid, values, self.interval, base.order)
        if self.is_constant and other.is_constant:
            return CoefficientFunction.constant(self.data + weight * other.data, self.interval)
        mine, theirs = self._as_polynomial_data(), other._as_polynomial_data()
        size = max(mine.shape[0], theirs.shape[0])
        total = np.zeros((size,) + self.shape, dtype=complex)
        total[: mine.shape[0]] += mine
        total[: theirs.shape[0]] += weight * theirs
        return CoefficientFunction.polynomial(total, self.interval)

    def scaled(self, weight: complex) -> "CoefficientFunction":
        return CoefficientFunction.zeros(self.shape, self.interval).plus(self, weight)

    def _as_polynomial_data(self) -> np.ndarray:
        return self.data[None] if self.is_constant else self.data

    def to_dict(self) -> dict[str, Any]:
        if self.kind is CoefficientKind.CONSTANT:
            return {"kind": "constant", "value": encode_complex(self.data)}
        if self.kind is CoefficientKind.POLYNOMIAL:
            return {"kind": "polynomial", "coefficients": encode_complex(self.data)}
        return {
            "kind": "sampled",
            "grid": [float(t) for t in self.grid],
            "values": encode_complex(self.data),
            "order": self.order,
        }
