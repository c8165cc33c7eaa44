import json
import math

import numpy as np
import sympy

from utils_formatting import format_csv, format_json, format_number, records_to_csv, to_plain


def test_format_number():
    assert format_number(None) == ""
    assert format_number(True) == "true"
    assert format_number(np.int64(7)) == "7"
    assert float(format_number(0.1)) == 0.1
    assert format_number(1 / 3) == format(1 / 3, ".17g")
    assert format_number(math.inf) == "inf"
    assert format_number(float("nan")) == "nan"


def test_to_plain_handles_numpy_and_sympy():
    doc = to_plain({"a": np.array([1.0, np.inf]), "b": sympy.sqrt(5), "c": (np.float64(2.5), np.bool_(False))})
    assert doc == {"a": [1.0, None], "b": "sqrt(5)", "c": [2.5, False]}


def test_json_floats_read_back_exactly():
    x = 0.1 + 0.2
    text = format_json({"x": x, "y": math.nan})
    assert text.endswith("\n")
    doc = json.loads(text)
    assert doc["x"] == x
    assert doc["y"] is None


def test_csv_layout():
    text = format_csv(["j", "E"], [[1, 2.5], [2, None]])
    assert text == "j,E\n1,2.5\n2,\n"
    assert records_to_csv([{"j": 1, "E": 2.5}], ["E"]) == "E\n2.5\n"
    assert records_to_csv([], ["j"]) == "j\n"
