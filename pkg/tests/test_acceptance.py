"""End-to-end checks of the Fredholm pipeline against closed forms and brute force."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app import cli
from app.boundary import BoundaryOperator, PointTerm, apply_to_function
from app.catalog import FRACTIONAL_ORDERS, antiperiodic_params, build_example, default_params
from app.coefficients import CoefficientFunction, Interval
from app.fredholm import (
    analyze,
    brute_force_kernel_dimension,
    characteristic_matrix,
    fredholm_report,
    kernel_basis_functions,
)
from app.limits import DEFAULT_K_VALUES, SobolevNorm, coefficient_family, finite_rank_instability_demo, run_sequence
from app.matfun import ExampleParams, oracle_characteristic_matrix
from app.ode_core import DifferentialSystem, ode_residual, solve_inhomogeneous_cauchy
from app.problem_file import load_problem
from app.solver import SolutionStatus, solve_bvp


def _complex(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _random_system(rng, m, r, n=0):
    iv = Interval(0.0, 1.0)
    coeffs = tuple(CoefficientFunction.polynomial(_complex(rng, (2, m, m), 0.5), iv) for _ in range(r))
    return DifferentialSystem(iv, m, r, n, coeffs)


def _random_two_point(rng, system, l, inner=None):
    """Point conditions at a and b; with ``inner`` every alpha factors through C^inner."""
    terms = []
    for point in (system.interval.a, system.interval.b):
        for order in range(system.r):
            alpha = _complex(rng, (l, system.m))
            if inner is not None:
                alpha = _complex(rng, (l, inner)) @ _complex(rng, (inner, system.m))
            terms.append(PointTerm(point, order, alpha))
    return BoundaryOperator(l, tuple(terms), system.signature, system.interval)


@pytest.mark.slow
def test_index_is_rm_minus_l():
    rng = np.random.default_rng(101)
    shapes = set()
    for _ in range(50):
        m, r = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        rm = m * r
        l = int(rng.integers(1, rm + 2))
        system = _random_system(rng, m, r)
        _, report = analyze(system, _random_two_point(rng, system, l))
        assert report.index == rm - l
        assert report.dim_ker - report.dim_coker == rm - l
        shapes.add(np.sign(rm - l))
    assert shapes == {-1, 0, 1}


@pytest.mark.parametrize("case", range(10))
def test_first_order_family_matches_closed_form(case):
    rng = np.random.default_rng(200 + case)
    m, n = (2, 3)[case % 2], 1 + case % 3
    params = ExampleParams(
        Interval(0.0, 1.0), n=n, A=_complex(rng, (m, m), 0.5),
        alphas=tuple(_complex(rng, (m, m)) for _ in range(n + 1)),
    )
    system, B = build_example(1, params)
    numeric = characteristic_matrix(system, B).data
    assert np.max(np.abs(numeric - oracle_characteristic_matrix(1, params))) <= 1e-6


def test_caputo_terms_do_not_contribute():
    params = default_params(2)
    numeric = characteristic_matrix(*build_example(2, params)).data
    expected = sum(alpha for _, beta, alpha in params.point_terms if beta == 0.0)
    assert np.max(np.abs(numeric - expected)) <= 1e-7

    rng = np.random.default_rng(7)
    moved = {0.25: 0.1, 0.5: 0.6, 0.9: 0.95}
    terms = tuple(
        (moved[t], beta, alpha if beta == 0.0 else _complex(rng, alpha.shape))
        for t, beta, alpha in params.point_terms
    )
    other = ExampleParams(params.interval, params.n, point_terms=terms)
    assert {beta for _, beta, _ in terms} == {0.0, *FRACTIONAL_ORDERS}
    assert np.max(np.abs(characteristic_matrix(*build_example(2, other)).data - numeric)) <= 1e-7


@pytest.mark.parametrize("example_id", [3, 4])
def test_two_point_families_match_closed_form(example_id):
    params = default_params(example_id)
    numeric = characteristic_matrix(*build_example(example_id, params)).data
    assert np.max(np.abs(numeric - oracle_characteristic_matrix(example_id, params))) <= 1e-6


def test_antiperiodic_family_has_largest_fredholm_numbers():
    params = antiperiodic_params(m=2)
    system, B = build_example(4, params)
    M, report = analyze(system, B)
    assert max(report.singular_values) <= 1e-8
    assert (report.dim_ker, report.dim_coker) == (system.rm, B.l)


def test_canonical_family_well_posedness():
    params = default_params(5)
    system, B = build_example(5, params)
    M, report = analyze(system, B)
    assert_allclose(M.data, params.alphas[0], atol=1e-9)
    assert report.invertible

    singular = ExampleParams(params.interval, params.n, alphas=(np.ones((2, 2)), params.alphas[1]), phi=params.phi)
    M, report = analyze(*build_example(5, singular))
    assert_allclose(M.data, np.ones((2, 2)), atol=1e-9)
    assert not report.invertible
    assert (report.dim_ker, report.dim_coker) == (1, 1)


@pytest.mark.slow
def test_kernel_matches_brute_force():
    rng = np.random.default_rng(303)
    for _ in range(20):
        m, r = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        rm = m * r
        l = int(rng.integers(max(1, rm - 1), rm + 2))
        inner = int(rng.integers(1, min(l, rm) + 1))
        system = _random_system(rng, m, r)
        B = _random_two_point(rng, system, l, inner)
        M, report = analyze(system, B)
        assert report.dim_ker == brute_force_kernel_dimension(system, B)
        basis = kernel_basis_functions(system, B, M)
        assert len(basis) == report.dim_ker
        for y in basis:
            assert ode_residual(system, y) <= 1e-8
            assert np.linalg.norm(apply_to_function(B, y)) <= 1e-8


@pytest.mark.slow
def test_solver_is_sound_on_consistent_data():
    rng = np.random.default_rng(404)
    for _ in range(20):
        m, r = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        rm = m * r
        system = _random_system(rng, m, r)
        B = _random_two_point(rng, system, int(rng.integers(max(1, rm - 1), rm + 2)))
        f = CoefficientFunction.polynomial(_complex(rng, (3, m)), system.interval)
        exact = solve_inhomogeneous_cauchy(system, f, _complex(rng, (rm,)))
        c = apply_to_function(B, exact)
        solution = solve_bvp(system, B, f, c)
        assert solution.status is not SolutionStatus.INCONSISTENT
        assert ode_residual(system, solution.particular, f) <= 1e-7
        assert np.linalg.norm(apply_to_function(B, solution.particular) - c) <= 1e-7


def test_inconsistent_fixture_residual(fixtures_dir):
    problem = load_problem(fixtures_dir / "solve_inconsistent.json")
    solution = solve_bvp(problem.system, problem.B, problem.f, problem.c)
    assert solution.status is SolutionStatus.INCONSISTENT
    assert abs(solution.residual - 1.0) <= 1e-9


@pytest.mark.slow
def test_characteristic_matrices_converge_under_coefficient_perturbation():
    A = np.array([[0.5, 0.2], [-0.1, 0.3]])
    system, B = build_example(1, ExampleParams(Interval(0.0, 1.0), n=0, A=A, alphas=(np.eye(2), np.eye(2))))
    seq = coefficient_family(system, B, [1e-5 * np.eye(2)], k_values=DEFAULT_K_VALUES)
    report = run_sequence(seq, SobolevNorm(0), expect_converge=True)
    gaps = report.gaps
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 1e-6
    assert -1.3 <= report.fitted_rate <= -0.7
    assert report.settled_rows and report.semicontinuity_holds
    assert report.passed


def test_rank_one_perturbation_moves_fredholm_numbers():
    system, B = build_example(4, antiperiodic_params(m=1))
    demo = finite_rank_instability_demo(system, B, 1e-6)
    assert (demo.before.dim_ker, demo.before.dim_coker) == (2, 2)
    assert (demo.after.dim_ker, demo.after.dim_coker) == (1, 1)
    assert demo.after.index == demo.before.index == 0

    iv = Interval(0.0, 1.0)
    flat = DifferentialSystem.constant([np.zeros((2, 2))], iv, n=0)
    alpha = np.outer([1.0, 2.0, -1.0], [1.0, 1.0])
    tall = BoundaryOperator(3, (PointTerm(0.0, 0, alpha),), flat.signature, iv)
    demo = finite_rank_instability_demo(flat, tall, 1e-6)
    assert (demo.before.dim_ker, demo.before.dim_coker) == (1, 2)
    assert (demo.after.dim_ker, demo.after.dim_coker) == (0, 1)
    assert demo.after.index == demo.before.index == -1
    perturbed = characteristic_matrix(flat, demo.perturbed).data
    assert math.isclose(np.linalg.norm(perturbed - alpha, 2), 1e-6, rel_tol=1e-6)


@pytest.mark.parametrize("command, fixture", [("analyze", "analyze_example5.json"), ("limits", "limits_kinv.json")])
def test_reports_are_deterministic(fixtures_dir, tmp_path, command, fixture):
    outputs = []
    for run in ("first", "second"):
        out = tmp_path / run
        assert cli.main([command, str(fixtures_dir / fixture), "--out", str(out)]) == cli.EXIT_OK
        outputs.append(sorted((p.relative_to(out), p.read_bytes()) for p in out.rglob("*") if p.is_file()))
    assert outputs[0] == outputs[1]
    assert outputs[0]
