"""The five constant-coefficient families with closed-form characteristic matrices.

``build_example`` turns ExampleParams into the (system, boundary operator)
pair the numerical pipeline consumes; matfun.oracle_characteristic_matrix
evaluates the same parameters in closed form.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from app.boundary import BoundaryOperator, PointTerm, canonical_operator, two_point_operator
from app.coefficients import CoefficientFunction, Interval
from app.errors import DomainError, ShapeMismatch
from app.matfun import ExampleParams
from app.ode_core import DifferentialSystem

logger = logging.getLogger(__name__)

EXAMPLE_IDS = (1, 2, 3, 4, 5)
DEFAULT_SEED = 20240611
# Caputo orders attached to every point of the multipoint family.
FRACTIONAL_ORDERS = (0.5, 1.5, 2.5)


def _zero(m: int) -> np.ndarray:
    return np.zeros((m, m), dtype=complex)


def build_example(example_id: int, params: ExampleParams) -> tuple[DifferentialSystem, BoundaryOperator]:
    interval, n, m = params.interval, params.n, params.m
    if example_id == 1:
        system = DifferentialSystem.constant([params.require_A()], interval, n)
        return system, canonical_operator(system, params.alphas)
    if example_id == 2:
        system = DifferentialSystem.constant([_zero(m)], interval, n)
        terms = tuple(PointTerm(t, beta, alpha) for t, beta, alpha in params.point_terms)
        return system, BoundaryOperator(params.l, terms, system.signature, interval)
    if example_id == 3:
        system = DifferentialSystem.constant([_zero(m), params.require_A()], interval, n)
        return system, two_point_operator(system, params.alphas, params.betas)
    if example_id == 4:
        system = DifferentialSystem.constant([params.require_A(), _zero(m)], interval, n)
        return system, two_point_operator(system, params.alphas, params.betas)
    if example_id == 5:
        if not params.alphas:
            raise ShapeMismatch("Family 5 needs alpha_0")
        system = DifferentialSystem.constant([_zero(m)], interval, n)
        return system, canonical_operator(system, params.alphas, params.phi)
    raise DomainError(f"Unknown example id {example_id!r}; expected one of {list(EXAMPLE_IDS)}")


def _complex(rng: np.random.Generator, shape: tuple[int, ...], scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def default_params(example_id: int, *, m: int = 2, seed: int = DEFAULT_SEED) -> ExampleParams:
    """Reproducible parameters for one family on [0, 1]."""
    rng = np.random.default_rng(seed + example_id)
    interval = Interval(0.0, 1.0)
    if example_id == 1:
        return ExampleParams(
            interval, n=2, A=_complex(rng, (m, m), 0.5),
            alphas=tuple(_complex(rng, (m, m)) for _ in range(2)),
        )
    if example_id == 2:
        points = (0.25, 0.5, 0.9)
        terms = []
        for t in points:
            terms.append((t, 0.0, _complex(rng, (m, m))))
            terms.extend((t, beta, _complex(rng, (m, m))) for beta in FRACTIONAL_ORDERS)
        return ExampleParams(interval, n=2, point_terms=tuple(terms))
    if example_id in (3, 4):
        return ExampleParams(
            interval, n=1, A=_complex(rng, (m, m), 0.5),
            alphas=tuple(_complex(rng, (2 * m, m)) for _ in range(2)),
            betas=tuple(_complex(rng, (2 * m, m)) for _ in range(2)),
        )
    if example_id == 5:
        phi = CoefficientFunction.polynomial(_complex(rng, (2, m, m)), interval)
        return ExampleParams(
            interval, n=1,
            alphas=(np.eye(m) + _complex(rng, (m, m), 0.1), _complex(rng, (m, m))),
            phi=phi,
        )
    raise DomainError(f"Unknown example id {example_id!r}; expected one of {list(EXAMPLE_IDS)}")


def antiperiodic_params(m: int = 1, interval: Interval | None = None, *, seed: int = DEFAULT_SEED) -> ExampleParams:
    """y'' + (pi / (b - a))^2 y with alpha_k = beta_k: every fundamental solution
    is antiperiodic with its derivative, so M(L, B) = O and l = 2m."""
    interval = interval or Interval(0.0, math.pi)
    rng = np.random.default_rng(seed)
    A = (math.pi / interval.length) ** 2 * np.eye(m)
    alphas = tuple(_complex(rng, (2 * m, m)) for _ in range(2))
    return ExampleParams(interval, n=1, A=A, alphas=alphas, betas=tuple(a.copy() for a in alphas))
