import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.coefficients import CoefficientFunction
from app.export import decode_complex, dumps_json, encode_complex, trajectory_rows, write_json


def test_encode_complex_nests_pairs():
    assert encode_complex(1 + 2j) == [1.0, 2.0]
    assert encode_complex(np.array([1.0, 2j])) == [[1.0, 0.0], [0.0, 2.0]]


def test_decode_uses_the_declared_rank():
    assert_allclose(decode_complex([1, 2], 1), [1.0, 2.0])
    assert_allclose(decode_complex([1, 2], 0), 1 + 2j)
    assert_allclose(decode_complex([[1, [0, 1]], [2, 3]], 2), [[1, 1j], [2, 3]])


@pytest.mark.parametrize("data, ndim", [([[1, 2], [3]], 2), ([1, 2, 3], 0), ([[True]], 2), ("x", 1)])
def test_decode_rejects_malformed(data, ndim):
    with pytest.raises(ValueError):
        decode_complex(data, ndim)


def test_json_text_is_stable(tmp_path):
    payload = {"b": [0.1, 1e-12], "a": {"z": 1, "y": None}}
    assert dumps_json(payload) == dumps_json(json.loads(dumps_json(payload)))
    assert dumps_json(payload).index('"a"') < dumps_json(payload).index('"b"')
    path = write_json(payload, tmp_path / "nested" / "out.json")
    assert json.loads(path.read_text()) == payload


def test_trajectory_rows(unit):
    f = CoefficientFunction.polynomial([[0.0, 1.0], [1.0, 0.0]], unit)
    header, rows = trajectory_rows([f], np.array([0.0, 0.5]))
    assert header == ["t", "Re y_1", "Im y_1", "Re y_2", "Im y_2"]
    assert rows[1] == [0.5, 0.5, 0.0, 1.0, 0.0]
