from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from app.coefficients import CoefficientFunction, Interval
from app.ode_core import DifferentialSystem
from app.tolerances import ENV_PROFILE, Tolerances, get_profile

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(autouse=True)
def _default_profile(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv(ENV_PROFILE, raising=False)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def tol() -> Tolerances:
    return get_profile("default")


@pytest.fixture
def unit() -> Interval:
    return Interval(0.0, 1.0)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def complex_matrix(rng: np.random.Generator, shape: tuple[int, ...], scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@pytest.fixture
def make_system(rng: np.random.Generator) -> Callable[..., DifferentialSystem]:
    """Random system with linear-in-t coefficients of moderate size."""

    def build(m: int = 2, r: int = 1, n: int = 1, interval: Interval | None = None,
              constant: bool = False) -> DifferentialSystem:
        interval = interval or Interval(0.0, 1.0)
        coeffs = []
        for _ in range(r):
            if constant:
                coeffs.append(CoefficientFunction.constant(complex_matrix(rng, (m, m), 0.5), interval))
            else:
                coeffs.append(CoefficientFunction.polynomial(complex_matrix(rng, (2, m, m), 0.5), interval))
        return DifferentialSystem(interval, m, r, n, tuple(coeffs))

    return build
