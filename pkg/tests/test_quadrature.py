import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.quadrature import grading_levels, integrate, integrate_weakly_singular


def test_polynomials_are_exact():
    assert integrate(lambda t: t**5, 0.0, 2.0) == pytest.approx(64.0 / 6.0, rel=1e-14)


def test_smooth_integrand():
    assert integrate(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-12)


def test_array_valued_integrand_keeps_shape():
    result = integrate(lambda t: np.stack([t, t**2], axis=-1), 0.0, 1.0)
    assert result.shape == (2,)
    assert_allclose(result, [0.5, 1.0 / 3.0], rtol=1e-13)


def test_empty_range_is_zero():
    assert integrate(lambda t: np.ones_like(t), 1.0, 1.0) == 0.0


def test_integrand_with_kink_refines():
    value = integrate(lambda t: np.abs(t - 0.3), 0.0, 1.0, tol=1e-10, max_panels=200)
    assert value == pytest.approx(0.5 * 0.3**2 + 0.5 * 0.7**2, abs=1e-9)


@pytest.mark.parametrize(
    "exponent, func, expected",
    [
        (-0.5, lambda s: np.ones_like(s), 2.0),
        (-0.5, lambda s: s, 4.0 / 3.0),
        (0.5, lambda s: np.ones_like(s), 2.0 / 3.0),
    ],
)
def test_weakly_singular_beta_integrals(exponent, func, expected):
    assert integrate_weakly_singular(func, 0.0, 1.0, exponent) == pytest.approx(expected, abs=1e-9)


def test_weakly_singular_rejects_non_integrable_exponent():
    with pytest.raises(ValueError):
        integrate_weakly_singular(lambda s: s, 0.0, 1.0, -1.0)


def test_grading_levels_are_bounded():
    assert grading_levels(0.5, 1e-10) == math.ceil(-math.log2(1e-10) / 1.5)
    assert grading_levels(-0.999999, 1e-16) == 60
    assert grading_levels(10.0, 1e-2) == 1
