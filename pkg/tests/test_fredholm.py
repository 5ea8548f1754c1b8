import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.boundary import (
    BoundaryOperator,
    PointTerm,
    apply_to_function,
    canonical_operator,
    cauchy_operator,
    truncated_cauchy_operator,
)
from app.coefficients import Interval
from app.errors import ShapeMismatch
from app.fredholm import (
    brute_force_kernel_dimension,
    characteristic_matrix,
    cokernel_basis,
    fredholm_report,
    kernel_basis_functions,
    null_space,
)
from app.ode_core import DifferentialSystem, ode_residual


def test_identity_boundary_gives_identity(unit):
    system = DifferentialSystem.constant([np.zeros((2, 2))], unit, n=0)
    M = characteristic_matrix(system, canonical_operator(system, [np.eye(2)]))
    assert_allclose(M.data, np.eye(2), atol=1e-14)
    report = fredholm_report(M)
    assert (report.index, report.dim_ker, report.dim_coker, report.invertible) == (0, 0, 0, True)


def test_cauchy_operator_characteristic_matrix_is_identity(make_system):
    system = make_system(m=2, r=3, n=0)
    M = characteristic_matrix(system, cauchy_operator(system))
    assert M.data.shape == (6, 6)
    assert_allclose(M.data, np.eye(6), atol=1e-14)
    assert len(M.block_columns) == 3


def test_zero_matrix_has_largest_fredholm_numbers():
    m = 3
    report = fredholm_report(np.zeros((2 * m, m)))
    assert report.rank == 0
    assert report.index == m - 2 * m
    assert (report.dim_ker, report.dim_coker) == (m, 2 * m)
    assert not report.invertible


def test_random_wide_matrix(rng):
    report = fredholm_report(rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4)))
    assert (report.index, report.rank, report.dim_ker, report.dim_coker) == (1, 3, 1, 0)
    assert report.dim_ker - report.dim_coker == report.index


def test_rank_is_non_increasing_in_tolerance():
    M = np.diag([1.0, 1e-6, 1e-12])
    ranks = [fredholm_report(M, rank_tol=tol, rank_atol=0.0).rank for tol in (1e-14, 1e-10, 1e-3, 0.5)]
    assert ranks == sorted(ranks, reverse=True)
    assert ranks[1] == 2 and ranks[2] == 1


def test_absolute_floor_treats_noise_as_zero():
    noise = fredholm_report(1e-9 * np.ones((2, 2)))
    assert noise.rank == 0
    assert (noise.threshold, noise.threshold_source) == (1e-8, "absolute")
    scaled = fredholm_report(np.diag([1e3, 1.0]), rank_tol=1e-10, rank_atol=1e-8)
    assert scaled.threshold_source == "relative"
    assert scaled.threshold == pytest.approx(2e-7)


def test_borderline_singular_values_are_logged(caplog):
    with caplog.at_level(logging.WARNING, logger="app.fredholm"):
        fredholm_report(np.diag([1.0, 5e-9]))
    assert "borderline" in caplog.text


def test_null_space_and_cokernel(rng):
    M = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 3))
    N = null_space(M)
    W = cokernel_basis(M)
    assert N.shape == (3, 1) and W.shape == (4, 2)
    assert_allclose(M @ N, 0, atol=1e-12)
    assert_allclose(W.conj().T @ M, 0, atol=1e-12)
    assert_allclose(N.conj().T @ N, np.eye(1), atol=1e-12)
    pivot = N[np.argmax(np.abs(N[:, 0])), 0]
    assert pivot.imag == 0 and pivot.real > 0


def test_report_statements_and_json_keys():
    report = fredholm_report(np.eye(2))
    lines = report.statements()
    assert "solvable for every right-hand side" in lines
    assert "homogeneous problem has only trivial solution" in lines
    assert "invertible: true" in lines
    data = report.to_dict()
    assert set(data) == {
        "index", "rank", "dim_ker", "dim_coker", "singular_values", "rank_tol", "invertible", "diagnostics",
    }
    assert data["diagnostics"] == {"threshold": report.threshold, "threshold_source": report.threshold_source}


def test_periodic_scalar_problem_has_constant_kernel():
    iv = Interval(0.0, 1.0)
    system = DifferentialSystem.constant([[[0.0]]], iv, n=0)
    B = BoundaryOperator(1, (PointTerm(1.0, 0, [[1.0]]), PointTerm(0.0, 0, [[-1.0]])), system.signature, iv)
    M = characteristic_matrix(system, B)
    assert fredholm_report(M).dim_ker == 1
    (y,) = kernel_basis_functions(system, B, M)
    assert_allclose(y(iv.grid(5))[:, 0], np.ones(5), atol=1e-12)


def test_kernel_functions_solve_the_homogeneous_problem(make_system):
    system = make_system(m=2, r=2, n=0)
    B = truncated_cauchy_operator(system, 2)
    M = characteristic_matrix(system, B)
    report = fredholm_report(M)
    basis = kernel_basis_functions(system, B, M)
    assert len(basis) == report.dim_ker == 2
    for y in basis:
        assert ode_residual(system, y) < 1e-8
        assert np.linalg.norm(apply_to_function(B, y)) < 1e-8


def test_invertible_problem_has_empty_kernel(make_system):
    system = make_system(m=2, r=1, n=0)
    B = cauchy_operator(system)
    assert kernel_basis_functions(system, B, characteristic_matrix(system, B)) == []


def test_brute_force_agrees(make_system, rng):
    system = make_system(m=2, r=2, n=0)
    B = BoundaryOperator(
        3,
        (PointTerm(0.0, 0, rng.standard_normal((3, 2))), PointTerm(1.0, 1, rng.standard_normal((3, 2)))),
        system.signature,
        system.interval,
    )
    M = characteristic_matrix(system, B)
    assert brute_force_kernel_dimension(system, B) == fredholm_report(M).dim_ker == 1


def test_mismatched_operator_is_rejected(make_system):
    system = make_system(m=2, r=1)
    other = make_system(m=2, r=2)
    with pytest.raises(ShapeMismatch):
        characteristic_matrix(system, cauchy_operator(other))
