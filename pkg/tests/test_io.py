import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraclab import build_interval_grid
from fraclab.io import fmt, to_jsonable, write_csv, write_evidence, write_json, write_matrix, write_nodes


@pytest.mark.parametrize(
    "value, text",
    [
        (0.1, "0.1"),
        (np.float64(1e-20), "1e-20"),
        (3, "3"),
        (np.int64(-4), "-4"),
        (True, "true"),
        (np.bool_(False), "false"),
        (float("nan"), "nan"),
        (float("inf"), "inf"),
        (-float("inf"), "-inf"),
        (None, ""),
        ("abc", "abc"),
    ],
)
def test_fmt(value, text):
    assert fmt(value) == text


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trip(x):
    assert float(fmt(x)) == x


def test_jsonable_nonfinite():
    out = to_jsonable({"a": np.array([1.0, np.nan]), "b": (np.int32(2), np.inf)})
    assert out == {"a": [1.0, "nan"], "b": [2, "inf"]}


def test_csv_line_endings(tmp_path):
    p = write_csv(tmp_path / "sub" / "t.csv", ["a", "b"], [[1, 0.5], [2, float("nan")]])
    assert p.read_bytes() == b"a,b\n1,0.5\n2,nan\n"


def test_json_sorted_and_stable(tmp_path):
    p = write_json(tmp_path / "r.json", {"b": 1, "a": {"d": np.float64(2.5), "c": [np.nan]}})
    text = p.read_text(encoding="utf-8")
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert text.index('"c"') < text.index('"d"')
    assert json.loads(text) == {"a": {"c": ["nan"], "d": 2.5}, "b": 1}
    q = write_json(tmp_path / "r2.json", {"a": {"c": [np.nan], "d": 2.5}, "b": 1})
    assert q.read_bytes() == p.read_bytes()


def test_evidence_spacing(tmp_path):
    p = write_evidence(tmp_path / "e.csv", [1.0, 2.5, 4.5])
    lines = p.read_text(encoding="utf-8").splitlines()
    assert lines == ["index,location,spacing", "1,1.0,nan", "2,2.5,1.5", "3,4.5,2.0"]


def test_evidence_empty(tmp_path):
    p = write_evidence(tmp_path / "e.csv", [])
    assert p.read_text(encoding="utf-8") == "index,location,spacing\n"


def test_nodes_and_matrix(tmp_path):
    g = build_interval_grid(0.0, 1.0, 4)
    lines = write_nodes(tmp_path / "n.csv", g).read_text(encoding="utf-8").splitlines()
    assert lines[0] == "id,x,boundary"
    assert lines[1] == "0,0.0,1"
    assert lines[3] == "2,0.5,0"
    A = np.array([[2.0, 0.0], [-1.0, 1e-30]])
    rows = write_matrix(tmp_path / "m.csv", A, tol=1e-20).read_text(encoding="utf-8").splitlines()
    assert rows == ["i,j,value", "0,0,2.0", "1,0,-1.0"]
    assert math.isclose(float(rows[1].split(",")[2]), 2.0)
