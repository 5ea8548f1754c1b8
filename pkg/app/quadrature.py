"""Composite Gauss quadrature for smooth and weakly singular integrands.

Integrands are vectorised: they take a 1-D array of nodes and return an
array whose leading axis runs over the nodes. Results keep the trailing
shape, so the same routine integrates scalars, vectors and matrices.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

logger = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=32)
def gauss_legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(nodes)


@lru_cache(maxsize=64)
def gauss_jacobi(nodes: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Rule for weight (1 - x)**alpha on [-1, 1]."""
    x, w = roots_jacobi(nodes, alpha, 0.0)
    return x, w


def _panel(func: Integrand, lo: float, hi: float, nodes: int) -> np.ndarray:
    x, w = gauss_legendre(nodes)
    half = 0.5 * (hi - lo)
    values = np.asarray(func(lo + half * (x + 1.0)))
    return half * np.tensordot(w, values, axes=(0, 0))


def integrate(
    func: Integrand,
    lo: float,
    hi: float,
    *,
    tol: float = 1e-10,
    nodes: int = 32,
    max_panels: int = 64,
    breakpoints: tuple[float, ...] = (),
) -> np.ndarray:
    """Adaptive composite Gauss–Legendre integral of func over [lo, hi].

    A panel is accepted once its estimate agrees with the sum over its two
    halves to within tol * max(1, |estimate|); otherwise it is split. The
    result is summed left to right, so it is reproducible bit for bit.
    """
    if hi <= lo:
        return np.zeros_like(np.asarray(func(np.array([lo])))[0])
    edges = sorted({lo, hi, *[p for p in breakpoints if lo < p < hi]})
    pending = [(edges[i], edges[i + 1], _panel(func, edges[i], edges[i + 1], nodes))
               for i in range(len(edges) - 1)]
    accepted: list[tuple[float, np.ndarray]] = []
    panels = len(pending)
    while pending:
        a, b, whole = pending.pop(0)
        mid = 0.5 * (a + b)
        left, right = _panel(func, a, mid, nodes), _panel(func, mid, b, nodes)
        refined = left + right
        err = float(np.max(np.abs(refined - whole))) if np.size(refined) else 0.0
        scale = max(1.0, float(np.max(np.abs(refined))) if np.size(refined) else 0.0)
        if err <= tol * scale or panels >= max_panels:
            if err > tol * scale:
                logger.warning(
                    "Quadrature on [%g, %g] stopped at %d panels with error estimate %.3g",
                    lo, hi, panels, err,
                )
            accepted.append((a, refined))
            continue
        panels += 1
        pending[:0] = [(a, mid, left), (mid, b, right)]
    accepted.sort(key=lambda item: item[0])
    total = accepted[0][1]
    for _, part in accepted[1:]:
        total = total + part
    logger.debug("Quadrature on [%g, %g] used %d panels", lo, hi, panels)
    return total


def grading_levels(exponent: float, tol: float) -> int:
    """Geometric panels needed toward a (t - s)**exponent singularity.

    The smallest panel has length 2**-levels times the interval; its share
    of the integral scales like that length to the power exponent + 1.
    """
    return max(1, min(60, math.ceil(-math.log2(tol) / (exponent + 1.0))))


def integrate_weakly_singular(
    func: Integrand,
    lo: float,
    hi: float,
    exponent: float,
    *,
    tol: float = 1e-10,
    nodes: int = 32,
    max_panels: int = 64,
) -> np.ndarray:
    """Integral of (hi - s)**exponent * func(s) over [lo, hi], exponent > -1.

    The mesh is graded geometrically toward hi. The panel touching hi uses a
    Gauss–Jacobi rule that absorbs the singular weight exactly; the others
    are smooth and go through ``integrate``.
    """
    if not exponent > -1.0:
        raise ValueError(f"Weakly singular exponent must exceed -1, got {exponent}")
    length = hi - lo
    if length <= 0:
        return np.zeros_like(np.asarray(func(np.array([hi])))[0])
    levels = grading_levels(exponent, tol)
    # keep the singular panel well above the spacing of doubles near hi
    levels = max(1, min(levels, int(math.log2(length / (1e-13 * max(1.0, abs(hi)))))))
    cuts = [hi - length * 2.0 ** (-j) for j in range(levels + 1)]
    # cuts[0] == lo, cuts[-1] is the start of the singular panel
    x, w = gauss_jacobi(nodes, float(exponent))
    start = cuts[-1]
    half = 0.5 * (hi - start)
    singular = half ** (exponent + 1.0) * np.tensordot(
        w, np.asarray(func(start + half * (x + 1.0))), axes=(0, 0)
    )

    def weighted(s: np.ndarray) -> np.ndarray:
        values = np.asarray(func(s))
        weights = (hi - s) ** exponent
        return values * weights.reshape((-1,) + (1,) * (values.ndim - 1))

    smooth = integrate(
        weighted, lo, start, tol=tol, nodes=nodes,
        max_panels=max_panels + levels, breakpoints=tuple(cuts[1:-1]),
    )
    return smooth + singular
