import logging
import math

import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from app.catalog import build_example
from app.coefficients import Interval
from app.errors import DomainError, IllConditioned, ShapeMismatch
from app.fredholm import characteristic_matrix
from app.matfun import (
    ExampleParams,
    MatrixFunctionMethod,
    ScalarFunction,
    cos_sqrt_function,
    exp_function,
    identity_function,
    lagrange_sylvester,
    matrix_exponential,
    oracle_characteristic_matrix,
    phi_function,
    polynomial_function,
    sinc_sqrt_function,
    spectrum_nodes,
    sqrt_trig,
)


def complex_matrix(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def test_exponential_of_diagonal():
    assert_allclose(matrix_exponential(np.diag([1.0, 2.0]), 0.5), np.diag([math.exp(0.5), math.e]))


def test_phi_function_scalar_closed_form():
    a, h = 0.7, 1.3
    assert phi_function([[a]], 2.0 + h, 2.0)[0, 0] == pytest.approx((1 - math.exp(-a * h)) / a, rel=1e-13)
    assert phi_function([[0.0]], h, 0.0)[0, 0] == pytest.approx(h)
    assert_allclose(phi_function(np.eye(3), 1.0, 1.0), np.zeros((3, 3)))


def test_phi_function_derivative_is_decay(rng):
    A = complex_matrix(rng, (3, 3), 0.5)
    h = 1e-5
    fd = (phi_function(A, 0.6 + h, 0.0) - phi_function(A, 0.6 - h, 0.0)) / (2 * h)
    assert_allclose(fd, scipy.linalg.expm(-0.6 * A), atol=1e-8)


@pytest.mark.parametrize("scale", [0.1, 1.0, 10.0])
def test_sqrt_trig_matches_first_order_exponential(rng, scale):
    m = 3
    A = complex_matrix(rng, (m, m), scale)
    s = 0.8
    big = np.zeros((2 * m, 2 * m), dtype=complex)
    big[:m, m:] = np.eye(m)
    big[m:, :m] = -A
    E = scipy.linalg.expm(big * s)
    C, S = sqrt_trig(A, s)
    assert_allclose(C, E[:m, :m], rtol=1e-8, atol=1e-8 * np.abs(E).max())
    assert_allclose(S, E[:m, m:], rtol=1e-8, atol=1e-8 * np.abs(E).max())


def test_sqrt_trig_scalar():
    C, S = sqrt_trig([[4.0]], 0.3)
    assert C[0, 0] == pytest.approx(math.cos(0.6))
    assert S[0, 0] == pytest.approx(math.sin(0.6) / 2.0)
    C, S = sqrt_trig([[0.0]], 0.3)
    assert (C[0, 0], S[0, 0]) == (pytest.approx(1.0), pytest.approx(0.3))


def test_spectrum_nodes_merge_repeated_eigenvalues():
    nodes = spectrum_nodes(np.diag([1.0, 3.0, 1.0]))
    assert [(round(z.real, 12), k) for z, k in nodes] == [(1.0, 2), (3.0, 1)]


def test_lagrange_sylvester_agrees_with_expm(rng):
    A = complex_matrix(rng, (4, 4), 0.5)
    result = lagrange_sylvester(exp_function(0.9), A)
    assert result.method is MatrixFunctionMethod.HERMITE_INTERPOLATION
    assert not result.fallback
    assert result.coefficients.shape == (4,)
    assert_allclose(result.value, scipy.linalg.expm(0.9 * A), rtol=1e-8, atol=1e-9)


def test_lagrange_sylvester_on_jordan_block():
    A = np.array([[2.0, 1.0], [0.0, 2.0]])
    result = lagrange_sylvester(exp_function(), A)
    assert_allclose(result.value, math.exp(2.0) * np.array([[1.0, 1.0], [0.0, 1.0]]), rtol=1e-12)


def test_lagrange_sylvester_reproduces_polynomials(rng):
    A = complex_matrix(rng, (3, 3))
    result = lagrange_sylvester(polynomial_function([1.0, -2.0, 0.5, 0.25]), A)
    expected = np.eye(3) - 2.0 * A + 0.5 * A @ A + 0.25 * A @ A @ A
    assert_allclose(result.value, expected, rtol=1e-9, atol=1e-9)


def test_trigonometric_functions_by_interpolation():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    C, S = sqrt_trig(A, 1.2)
    assert_allclose(lagrange_sylvester(cos_sqrt_function(1.2), A).value, C, atol=1e-11)
    assert_allclose(lagrange_sylvester(sinc_sqrt_function(1.2), A).value, S, atol=1e-11)


def test_ill_conditioned_interpolation_falls_back(caplog):
    A = np.diag([0.0, 1.0])
    with caplog.at_level(logging.WARNING, logger="app.matfun"):
        result = lagrange_sylvester(exp_function(), A, cond_limit=1.0)
    assert result.fallback
    assert result.method is MatrixFunctionMethod.SCALING_SQUARING
    assert result.condition_estimate > 1.0
    assert_allclose(result.value, np.diag([1.0, math.e]))
    assert "ill-conditioned" in caplog.text

    bare = ScalarFunction("exp", lambda z, j: np.exp(z))
    with pytest.raises(IllConditioned):
        lagrange_sylvester(bare, A, cond_limit=1.0)


def test_singular_interpolation_reports_fallback_condition(monkeypatch):
    A = np.array([[0.3, 1.0], [0.0, 0.8]])
    monkeypatch.setattr(np.linalg, "cond", lambda V: math.inf)
    result = lagrange_sylvester(exp_function(0.5), A)
    assert result.fallback
    assert result.condition_estimate == pytest.approx(scipy.linalg.expm_cond(0.5 * A))
    assert_allclose(result.value, scipy.linalg.expm(0.5 * A))
    for f in (cos_sqrt_function(1.2), identity_function(), polynomial_function([1.0, 2.0, 0.5])):
        estimate = lagrange_sylvester(f, A).condition_estimate
        assert math.isfinite(estimate) and estimate >= 0.0


@pytest.mark.parametrize("example_id", [1, 2, 3])
def test_one_point_conditions_ignore_right_endpoint(example_id, rng):
    A = complex_matrix(rng, (2, 2), 0.5)
    alphas = tuple(complex_matrix(rng, (2, 2)) for _ in range(3 if example_id == 3 else 2))

    def params(b):
        iv = Interval(0.0, b)
        if example_id == 2:
            return ExampleParams(iv, n=1, point_terms=((0.3, 0.0, alphas[0]), (0.6, 0.5, alphas[1])))
        return ExampleParams(iv, n=1, A=A, alphas=alphas)

    near, far = params(1.0), params(1.7)
    gap = np.max(np.abs(oracle_characteristic_matrix(example_id, near) - oracle_characteristic_matrix(example_id, far)))
    assert gap <= 1e-12
    if example_id != 2:
        numeric = [characteristic_matrix(*build_example(example_id, p)).data for p in (near, far)]
        assert_allclose(numeric[0], numeric[1], atol=1e-10)


def test_two_point_oscillator_depends_on_right_endpoint():
    A = np.array([[1.0, 0.2], [0.1, 0.5]])
    alphas, betas = (np.eye(2), 0.5 * np.eye(2)), (np.eye(2), np.eye(2))
    near, far = (ExampleParams(Interval(0.0, b), n=1, A=A, alphas=alphas, betas=betas) for b in (1.0, 1.3))
    assert np.max(np.abs(oracle_characteristic_matrix(4, near) - oracle_characteristic_matrix(4, far))) > 1e-6
    numeric = [characteristic_matrix(*build_example(4, p)).data for p in (near, far)]
    assert np.max(np.abs(numeric[0] - numeric[1])) > 1e-6
    for params, M in zip((near, far), numeric):
        assert_allclose(M, oracle_characteristic_matrix(4, params), atol=1e-6)


def test_first_order_oracle_scalar():
    params = ExampleParams(Interval(0.0, 1.0), n=1, A=[[0.5]], alphas=([[1.0]], [[2.0]]))
    assert oracle_characteristic_matrix(1, params)[0, 0] == pytest.approx(1.0 - 2.0 * 0.5)


def test_damped_oracle_scalar():
    a = 0.4
    params = ExampleParams(Interval(0.0, 1.0), n=1, A=[[a]], alphas=([[1.0]], [[1.0]]), betas=([[1.0]], [[1.0]]))
    M = oracle_characteristic_matrix(3, params)
    assert M.shape == (1, 2)
    assert M[0, 0] == pytest.approx(2.0)
    assert M[0, 1] == pytest.approx((1 - math.exp(-a)) / a + 1.0 + math.exp(-a))


def test_oscillator_oracle_antiperiodic_is_zero():
    iv = Interval(0.0, 1.0)
    params = ExampleParams(iv, n=1, A=[[math.pi**2]], alphas=([[1.0]], [[1.0]]), betas=([[1.0]], [[1.0]]))
    assert_allclose(oracle_characteristic_matrix(4, params), np.zeros((1, 2)), atol=1e-12)


def test_caputo_oracle_keeps_only_order_zero():
    params = ExampleParams(
        Interval(0.0, 2.0), n=1,
        point_terms=((0.5, 0.0, [[2.0]]), (0.5, 0.5, [[7.0]]), (1.5, 0.0, [[3.0]]), (1.5, 1.5, [[9.0]])),
    )
    assert oracle_characteristic_matrix(2, params)[0, 0] == pytest.approx(5.0)


def test_oracle_argument_errors():
    iv = Interval(0.0, 1.0)
    params = ExampleParams(iv, n=1, A=[[1.0]], alphas=([[1.0]],))
    with pytest.raises(DomainError):
        oracle_characteristic_matrix(6, params)
    with pytest.raises(ShapeMismatch):
        oracle_characteristic_matrix(5, params)
    with pytest.raises(ShapeMismatch):
        oracle_characteristic_matrix(3, ExampleParams(iv, n=1, alphas=([[1.0]],)))
    with pytest.raises(ShapeMismatch):
        ExampleParams(iv, n=1, alphas=(np.eye(2), np.eye(3)))
    with pytest.raises(ShapeMismatch):
        ExampleParams(iv, n=1, A=np.eye(3), alphas=(np.eye(2),))
