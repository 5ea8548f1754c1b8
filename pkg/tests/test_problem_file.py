import copy
import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.boundary import IntegralTerm
from app.errors import ProblemFileError
from app.limits import PerturbationSequence
from app.problem_file import dump_problem, load_example_params, load_problem, parse_example_params, parse_problem
from app.tolerances import ENV_PROFILE, get_profile


@pytest.fixture
def payload(fixtures_dir):
    return json.loads((fixtures_dir / "solve_cauchy.json").read_text())


def test_load_solve_fixture(fixtures_dir):
    problem = load_problem(fixtures_dir / "solve_cauchy.json")
    assert problem.system.signature == (1, 2, 0)
    assert problem.B.l == 2
    assert_allclose(problem.c, [0.0, 1.0])
    assert problem.f is not None
    assert problem.p == 2.0
    assert problem.tolerances == get_profile("default")


def test_complex_pairs_and_integral_terms(fixtures_dir):
    problem = load_problem(fixtures_dir / "analyze_example5.json")
    kernel_term = problem.B.terms[-1]
    assert isinstance(kernel_term, IntegralTerm)
    assert kernel_term.derivative_order == 2
    assert kernel_term.kernel(1.0)[1, 0] == pytest.approx(1j)


def test_perturbation_block_builds_a_sequence(fixtures_dir):
    problem = load_problem(fixtures_dir / "limits_rank_drop.json")
    norm = problem.norm()
    assert norm.n == 0 and math.isinf(norm.p)
    seq = problem.sequence()
    assert isinstance(seq, PerturbationSequence)
    assert seq.k_values == (1, 2, 4, 8, 16)
    _, B = seq.build(2)
    assert_allclose(B.terms[0].alpha, np.diag([1.0, 5e-4]))


def test_dump_is_canonical(fixtures_dir):
    problem = load_problem(fixtures_dir / "limits_kinv.json")
    text = dump_problem(problem)
    reloaded = parse_problem(json.loads(text))
    assert dump_problem(reloaded) == text
    assert json.loads(text)["coefficients"][0]["value"][0][1] == [0.2, 0.0]


def test_example_params_with_complex_entries(fixtures_dir):
    params = load_example_params(fixtures_dir / "params_example2.json")
    assert (params.m, params.l, params.n) == (2, 2, 1)
    assert len(params.point_terms) == 4
    assert params.point_terms[2][2][1, 0] == 1j
    assert params.point_terms[3][1] == 1.5


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("version"),
        lambda d: d.update(extra=1),
        lambda d: d.update(r=3),
        lambda d: d.update(p=0.5),
        lambda d: d["interval"].update(b=-1.0),
        lambda d: d["boundary"]["terms"][0].update(alpha=[[1, 0]]),
        lambda d: d["boundary"]["terms"][0].update(type="corner"),
        lambda d: d.update(c=[0, 1, 2]),
        lambda d: d["coefficients"][0].update(value=[[[1, 2, 3]]]),
        lambda d: d["coefficients"][0].update(value=[[True]]),
        lambda d: d["boundary"]["terms"][1].update(point=7.0),
    ],
)
def test_schema_errors(payload, mutate):
    broken = copy.deepcopy(payload)
    mutate(broken)
    with pytest.raises(ProblemFileError):
        parse_problem(broken)


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ProblemFileError):
        load_problem(path)


def test_missing_perturbation_block(payload):
    with pytest.raises(ProblemFileError):
        parse_problem(payload).sequence()


def test_tolerance_precedence(payload, monkeypatch):
    monkeypatch.setenv(ENV_PROFILE, "loose")
    assert parse_problem(payload).tolerances == get_profile("loose")
    payload["tolerances"] = {"profile": "strict", "rank_tol": 1e-9}
    tolerances = parse_problem(payload).tolerances
    assert tolerances == get_profile("strict").updated(rank_tol=1e-9)


def test_unknown_profile_is_a_file_error(payload):
    payload["tolerances"] = {"profile": "reckless"}
    with pytest.raises(ProblemFileError):
        parse_problem(payload)


def test_example_params_errors():
    with pytest.raises(ProblemFileError):
        parse_example_params({"interval": {"a": 0, "b": 1}, "n": 1})
    with pytest.raises(ProblemFileError):
        parse_example_params({"interval": {"a": 0, "b": 1}, "n": 1, "alphas": [[[1, 0]], [[1]]]})


def _sampled_forcing(order):
    return {"kind": "sampled", "grid": [0.0, 0.75, 1.5, 2.25, 3.0],
            "values": [[0.0], [1.0], [2.0], [1.0], [0.0]], "order": order}


def test_forcing_must_be_as_smooth_as_the_coefficients(payload):
    payload["n"] = 2
    payload["f"] = _sampled_forcing(2)
    with pytest.raises(ProblemFileError, match="f supplies 1 derivatives"):
        parse_problem(payload)
    payload["f"] = _sampled_forcing(3)
    assert parse_problem(payload).f.max_derivative == 2
