"""Matrix functions and closed-form characteristic matrices for constant coefficients.

Nothing here integrates an ODE: these are the independent references the
numerical pipeline is checked against.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Sequence

import numpy as np
import scipy.linalg

from app.coefficients import CoefficientFunction, Interval
from app.errors import DomainError, IllConditioned, ShapeMismatch

logger = logging.getLogger(__name__)

# Relative eigenvalue gap below which two eigenvalues count as one multiple node.
CLUSTER_TOL = 1e-8
# Confluent Vandermonde systems worse than this are not trusted.
COND_LIMIT = 1e10
_SERIES_EPS = 1e-16


class MatrixFunctionMethod(str, Enum):
    EIGEN_DECOMPOSITION = "EigenDecomposition"
    HERMITE_INTERPOLATION = "HermiteInterpolation"
    POWER_SERIES = "PowerSeries"
    SCALING_SQUARING = "ScalingSquaring"


@dataclass(frozen=True, eq=False)
class MatrixFunctionResult:
    value: np.ndarray
    method: MatrixFunctionMethod
    condition_estimate: float
    # Interpolating polynomial c_0 + c_1 z + ... (Hermite interpolation only).
    coefficients: np.ndarray | None = None
    fallback: bool = False


def _square(A: Any) -> np.ndarray:
    arr = np.atleast_2d(np.array(A, dtype=complex))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeMismatch(f"Expected a square matrix, got shape {arr.shape}")
    return arr


def matrix_exponential(A: Any, s: float = 1.0) -> np.ndarray:
    """exp(s A) by scaling and squaring with a Padé core."""
    return scipy.linalg.expm(s * _square(A))


def phi_function(A: Any, t: float, a: float) -> np.ndarray:
    """phi(A, t) = (I - exp(-A (t - a))) A^{-1}, defined for singular A too.

    Computed as h psi(-A h) with h = t - a and psi(X) = sum X^k / (k+1)!,
    read off the top-right block of exp([[X, h I], [0, 0]]).
    """
    A = _square(A)
    m = A.shape[0]
    h = float(t) - float(a)
    augmented = np.zeros((2 * m, 2 * m), dtype=complex)
    augmented[:m, :m] = -A * h
    augmented[:m, m:] = h * np.eye(m)
    return scipy.linalg.expm(augmented)[:m, m:]


def _even_odd_series(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """sum (-X)^k / (2k)! and sum (-X)^k / (2k+1)!, for ||X|| <= 1."""
    m = X.shape[0]
    cos_sum = np.eye(m, dtype=complex)
    sin_sum = np.eye(m, dtype=complex)
    power = np.eye(m, dtype=complex)
    for k in range(1, 40):
        power = -(power @ X)
        c_term = power / math.factorial(2 * k)
        s_term = power / math.factorial(2 * k + 1)
        cos_sum = cos_sum + c_term
        sin_sum = sin_sum + s_term
        if np.max(np.abs(c_term)) <= _SERIES_EPS * max(1.0, np.max(np.abs(cos_sum))):
            break
    return cos_sum, sin_sum


def sqrt_trig(A: Any, s: float) -> tuple[np.ndarray, np.ndarray]:
    """C = cos(sqrt(A) s) and S = sqrt(A)^{-1} sin(sqrt(A) s), both entire in A.

    Power series in A s^2 on a reduced argument, then the double-angle
    identities C(2s) = 2 C(s)^2 - I and S(2s) = 2 S(s) C(s). S sqrt(A) equals
    sin(sqrt(A) s) whenever a square root of A is chosen.
    """
    A = _square(A)
    m = A.shape[0]
    s = float(s)
    norm = float(np.linalg.norm(A, 1)) * s * s
    halvings = max(0, math.ceil(math.log(norm, 4))) if norm > 1.0 else 0
    reduced = s / 2.0 ** halvings
    cos_sum, sin_sum = _even_odd_series(A * reduced * reduced)
    C, S = cos_sum, reduced * sin_sum
    eye = np.eye(m, dtype=complex)
    for _ in range(halvings):
        C, S = 2.0 * C @ C - eye, 2.0 * S @ C
    return C, S


# -- Lagrange–Sylvester ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarFunction:
    """Entire scalar function given by its derivatives, with an optional matrix version."""

    name: str
    derivative: Callable[[complex, int], complex]
    matrix: Callable[[np.ndarray], np.ndarray] | None = None
    matrix_method: MatrixFunctionMethod = MatrixFunctionMethod.POWER_SERIES
    # Relative condition number of ``matrix`` at A; estimated by a difference quotient when absent.
    condition: Callable[[np.ndarray], float] | None = None

    def matrix_condition(self, A: np.ndarray) -> float:
        if self.condition is not None:
            return float(self.condition(A))
        return _difference_condition(self.matrix, A)


def _difference_condition(matrix: Callable[[np.ndarray], np.ndarray], A: np.ndarray) -> float:
    """||f(A + hE) - f(A)|| ||A|| / (h ||f(A)||) along E = A / ||A|| (or I for A = 0)."""
    value = matrix(A)
    scale = float(np.linalg.norm(A, 1))
    direction = A / scale if scale > 0 else np.eye(A.shape[0], dtype=complex)
    h = 1e-7 * max(1.0, scale)
    change = float(np.linalg.norm(matrix(A + h * direction) - value, 1)) / h
    size = float(np.linalg.norm(value, 1))
    return change * max(scale, 1.0) / size if size > 0 else change


def _oscillator_generator(A: np.ndarray, s: float) -> np.ndarray:
    """s [[0, I], [-A, 0]], whose exponential holds C and S of sqrt_trig in its first block column."""
    m = A.shape[0]
    G = np.zeros((2 * m, 2 * m), dtype=complex)
    G[:m, m:] = np.eye(m)
    G[m:, :m] = -A
    return s * G


def exp_function(s: float = 1.0) -> ScalarFunction:
    return ScalarFunction(
        f"exp({s:g} z)",
        lambda z, j: s**j * np.exp(s * z),
        lambda A: matrix_exponential(A, s),
        MatrixFunctionMethod.SCALING_SQUARING,
        lambda A: scipy.linalg.expm_cond(s * A),
    )


def identity_function() -> ScalarFunction:
    return ScalarFunction("z", lambda z, j: z if j == 0 else (1.0 if j == 1 else 0.0), lambda A: A.copy())


def constant_function(c: complex = 1.0) -> ScalarFunction:
    return ScalarFunction(f"{c}", lambda z, j: c if j == 0 else 0.0, lambda A: c * np.eye(A.shape[0]))


def polynomial_function(coefficients: Sequence[complex]) -> ScalarFunction:
    poly = np.polynomial.Polynomial(np.asarray(coefficients, dtype=complex))
    return ScalarFunction(
        "polynomial",
        lambda z, j: complex(poly.deriv(j)(z)) if j else complex(poly(z)),
        lambda A: _horner(poly.coef, A),
    )


def _series_derivative(z: complex, j: int, s: float, odd: bool) -> complex:
    """j-th z-derivative of sum_k (-1)^k z^k s^(2k) / (2k + odd)!."""
    total, k = 0.0 + 0.0j, j
    while True:
        term = (-1) ** k * math.perm(k, j) * z ** (k - j) * s ** (2 * k) / math.factorial(2 * k + odd)
        total += term
        if k > j + 4 and abs(term) <= _SERIES_EPS * max(1.0, abs(total)):
            return total * (s if odd else 1.0)
        k += 1
        if k > 170:
            raise IllConditioned("Series for the trigonometric matrix function did not converge")


def cos_sqrt_function(s: float) -> ScalarFunction:
    return ScalarFunction(f"cos(sqrt(z) {s:g})", lambda z, j: _series_derivative(z, j, s, False),
                          lambda A: sqrt_trig(A, s)[0],
                          condition=lambda A: scipy.linalg.expm_cond(_oscillator_generator(A, s)))


def sinc_sqrt_function(s: float) -> ScalarFunction:
    return ScalarFunction(f"sin(sqrt(z) {s:g})/sqrt(z)", lambda z, j: _series_derivative(z, j, s, True),
                          lambda A: sqrt_trig(A, s)[1],
                          condition=lambda A: scipy.linalg.expm_cond(_oscillator_generator(A, s)))


def _horner(coefficients: np.ndarray, A: np.ndarray) -> np.ndarray:
    m = A.shape[0]
    out = np.zeros((m, m), dtype=complex)
    for c in coefficients[::-1]:
        out = out @ A + c * np.eye(m)
    return out


def spectrum_nodes(A: Any, cluster_tol: float = CLUSTER_TOL) -> list[tuple[complex, int]]:
    """Distinct eigenvalues with algebraic multiplicities; near-equal ones merged."""
    eigs = sorted(scipy.linalg.eigvals(_square(A)), key=lambda z: (round(z.real, 12), round(z.imag, 12)))
    clusters: list[list[complex]] = []
    for lam in eigs:
        for cluster in clusters:
            center = np.mean(cluster)
            if abs(lam - center) <= cluster_tol * max(1.0, abs(lam)):
                cluster.append(lam)
                break
        else:
            clusters.append([lam])
    return [(complex(np.mean(c)), len(c)) for c in clusters]


def lagrange_sylvester(
    f: ScalarFunction,
    A: Any,
    *,
    cluster_tol: float = CLUSTER_TOL,
    cond_limit: float = COND_LIMIT,
) -> MatrixFunctionResult:
    """f(A) as the Hermite interpolation polynomial of f on the spectrum of A.

    The polynomial has degree at most m - 1. When the confluent Vandermonde
    system is too ill-conditioned the direct matrix version of f is used
    instead and the result is flagged.
    """
    A = _square(A)
    m = A.shape[0]
    nodes = spectrum_nodes(A, cluster_tol)
    V = np.zeros((m, m), dtype=complex)
    rhs = np.zeros(m, dtype=complex)
    row = 0
    for z, mult in nodes:
        for j in range(mult):
            for k in range(j, m):
                V[row, k] = math.perm(k, j) * z ** (k - j)
            rhs[row] = f.derivative(z, j)
            row += 1
    try:
        cond = float(np.linalg.cond(V))
    except np.linalg.LinAlgError:
        cond = math.inf
    if not np.isfinite(cond) or cond > cond_limit:
        if f.matrix is None:
            raise IllConditioned(
                f"Spectrum of A too clustered for Hermite interpolation (condition {cond:.3g})"
            )
        logger.warning(
            "Hermite interpolation of %s ill-conditioned (%.3g); using %s instead",
            f.name, cond, f.matrix_method.value,
        )
        if not np.isfinite(cond):
            # singular Vandermonde: report how well the direct evaluation is conditioned
            cond = f.matrix_condition(A)
        return MatrixFunctionResult(f.matrix(A), f.matrix_method, cond, None, fallback=True)
    coefficients = np.linalg.solve(V, rhs)
    return MatrixFunctionResult(
        _horner(coefficients, A), MatrixFunctionMethod.HERMITE_INTERPOLATION, cond, coefficients
    )


# -- closed-form characteristic matrices ------------------------------------------


@dataclass(eq=False)
class ExampleParams:
    """Data of one of the five constant-coefficient families.

    1: y' + A y, B = sum_k alphas[k] y^(k)(a).
    2: y' = f, B = sum over point_terms (t_k, beta_kj, alpha_kj) of Caputo terms.
    3: y'' + A y', B = sum_k alphas[k] y^(k)(a) + betas[k] y^(k)(b).
    4: y'' + A y, same B as 3.
    5: y' = f, B = sum_i alphas[i] y^(i)(a) + int Phi y^(n+1).
    """

    interval: Interval
    n: int
    A: np.ndarray | None = None
    alphas: tuple[np.ndarray, ...] = ()
    betas: tuple[np.ndarray, ...] = ()
    point_terms: tuple[tuple[float, float, np.ndarray], ...] = ()
    phi: CoefficientFunction | None = None
    m: int = field(init=False)
    l: int = field(init=False)

    def __post_init__(self) -> None:
        self.alphas = tuple(np.atleast_2d(np.array(a, dtype=complex)) for a in self.alphas)
        self.betas = tuple(np.atleast_2d(np.array(b, dtype=complex)) for b in self.betas)
        self.point_terms = tuple(
            (float(t), float(beta), np.atleast_2d(np.array(alpha, dtype=complex)))
            for t, beta, alpha in self.point_terms
        )
        if self.A is not None:
            self.A = _square(self.A)
        mats = list(self.alphas) + list(self.betas) + [p[2] for p in self.point_terms]
        if not mats:
            raise ShapeMismatch("Example parameters need at least one boundary matrix")
        self.l, self.m = mats[0].shape
        for mat in mats:
            if mat.shape != (self.l, self.m):
                raise ShapeMismatch(f"Boundary matrix of shape {mat.shape}, expected {(self.l, self.m)}")
        if self.A is not None and self.A.shape != (self.m, self.m):
            raise ShapeMismatch(f"A has shape {self.A.shape}, boundary matrices act on C^{self.m}")
        if self.phi is not None and self.phi.shape != (self.l, self.m):
            raise ShapeMismatch(f"Phi has shape {self.phi.shape}, expected {(self.l, self.m)}")

    def require_A(self) -> np.ndarray:
        if self.A is None:
            raise ShapeMismatch("This family needs the matrix A")
        return self.A


def _padded(mats: Sequence[np.ndarray], size: int, shape: tuple[int, int]) -> list[np.ndarray]:
    out = list(mats) + [np.zeros(shape, dtype=complex)] * (size - len(mats))
    return out[:size] if size else out


def _first_order_one_point(params: ExampleParams) -> np.ndarray:
    A = params.require_A()
    total = np.zeros((params.l, params.m), dtype=complex)
    power = np.eye(params.m, dtype=complex)
    for alpha in params.alphas:
        total = total + alpha @ power
        power = power @ (-A)
    return total


def _caputo_multipoint(params: ExampleParams) -> np.ndarray:
    # Caputo derivatives of positive order annihilate the constant Y = I.
    total = np.zeros((params.l, params.m), dtype=complex)
    for _, beta, alpha in params.point_terms:
        if beta == 0.0:
            total = total + alpha
    return total


def _damped_two_point(params: ExampleParams) -> np.ndarray:
    A = params.require_A()
    l, m = params.l, params.m
    a, b = params.interval.a, params.interval.b
    size = max(len(params.alphas), len(params.betas))
    alphas = _padded(params.alphas, size, (l, m))
    betas = _padded(params.betas, size, (l, m))
    decay = matrix_exponential(A, -(b - a))
    # Y_1 = I; Y_2 = phi(A, t) with Y_2^(k) = (-A)^(k-1) exp(-A (t - a)) for k >= 1
    block1 = alphas[0] + betas[0]
    block2 = betas[0] @ phi_function(A, b, a)
    power = np.eye(m, dtype=complex)
    for k in range(1, size):
        block2 = block2 + (alphas[k] + betas[k] @ decay) @ power
        power = power @ (-A)
    return np.hstack([block1, block2])


def oscillator_derivative_table(A: np.ndarray, h: float, order: int) -> tuple[list[np.ndarray], ...]:
    """Derivatives 0..order of the fundamental pair of y'' + A y = 0 at a and at a + h.

    Y_1 = C, Y_2 = S with C' = -A S and S' = C.
    """
    m = A.shape[0]
    C, S = sqrt_trig(A, h)
    zero = np.zeros((m, m), dtype=complex)
    y1_a, y1_b, y2_a, y2_b = [], [], [], []
    for k in range(order + 1):
        j = k // 2
        neg_power = np.linalg.matrix_power(-A, j)
        if k % 2 == 0:
            y1_a.append(neg_power.copy())
            y1_b.append(neg_power @ C)
            y2_a.append(zero.copy())
            y2_b.append(neg_power @ S)
        else:
            y1_a.append(zero.copy())
            y1_b.append(neg_power @ (-A) @ S)
            y2_a.append(neg_power.copy())
            y2_b.append(neg_power @ C)
    return y1_a, y1_b, y2_a, y2_b


def _oscillator_two_point(params: ExampleParams) -> np.ndarray:
    A = params.require_A()
    l, m = params.l, params.m
    size = max(len(params.alphas), len(params.betas))
    alphas = _padded(params.alphas, size, (l, m))
    betas = _padded(params.betas, size, (l, m))
    y1_a, y1_b, y2_a, y2_b = oscillator_derivative_table(A, params.interval.length, max(size - 1, 0))
    block1 = sum((alphas[k] @ y1_a[k] + betas[k] @ y1_b[k] for k in range(size)),
                 np.zeros((l, m), dtype=complex))
    block2 = sum((alphas[k] @ y2_a[k] + betas[k] @ y2_b[k] for k in range(size)),
                 np.zeros((l, m), dtype=complex))
    return np.hstack([block1, block2])


def _canonical_first_order(params: ExampleParams) -> np.ndarray:
    # Y = I: every derivative and the integral term vanish.
    return params.alphas[0].copy()


_ORACLES: dict[int, Callable[[ExampleParams], np.ndarray]] = {
    1: _first_order_one_point,
    2: _caputo_multipoint,
    3: _damped_two_point,
    4: _oscillator_two_point,
    5: _canonical_first_order,
}


def oracle_characteristic_matrix(example_id: int, params: ExampleParams) -> np.ndarray:
    """Closed-form M(L, B) for family ``example_id`` (1..5)."""
    try:
        oracle = _ORACLES[int(example_id)]
    except (KeyError, ValueError):
        raise DomainError(f"Unknown example id {example_id!r}; expected one of {sorted(_ORACLES)}") from None
    if example_id in (2, 5) and params.A is not None and np.any(params.A):
        raise ShapeMismatch(f"Family {example_id} has A = 0")
    if example_id == 5 and not params.alphas:
        raise ShapeMismatch("Family 5 needs alpha_0")
    return oracle(params)
