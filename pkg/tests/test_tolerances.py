import pytest

from app.errors import DomainError
from app.tolerances import ENV_PROFILE, PROFILES, Tolerances, get_profile, resolve, tolerances_from_env


def test_profiles_are_ordered_by_strictness():
    strict, default, loose = (get_profile(name) for name in ("strict", "default", "loose"))
    assert strict.rtol < default.rtol < loose.rtol
    assert strict.rank_atol < default.rank_atol < loose.rank_atol
    assert get_profile() is PROFILES["default"]


def test_unknown_profile():
    with pytest.raises(DomainError, match="loose"):
        get_profile("fast")


def test_environment_selects_profile(monkeypatch):
    assert tolerances_from_env() == get_profile("default")
    monkeypatch.setenv(ENV_PROFILE, "strict")
    assert resolve(None) == get_profile("strict")
    explicit = Tolerances(rank_tol=1e-6)
    assert resolve(explicit) is explicit


def test_updated_ignores_none():
    tol = Tolerances().updated(rtol=1e-8, quad_tol=None)
    assert tol.rtol == 1e-8 and tol.quad_tol == Tolerances().quad_tol


@pytest.mark.parametrize("field, value", [("rtol", 0.0), ("rank_atol", -1.0), ("gl_nodes", 1)])
def test_invalid_values(field, value):
    with pytest.raises(DomainError):
        Tolerances(**{field: value})
