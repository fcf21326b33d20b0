import json
import math
import os

from hypothesis import given, strategies as st

from unionspec.io import atomic_write, complex_pair, dump_json, fmt, write_json


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_fmt_fixed_width():
    assert fmt(1 / 3) == "0.33333333333333331"
    assert fmt(2.0) == "2"


def test_complex_pair():
    assert complex_pair(1 - 2j) == [1.0, -2.0]


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "sub" / "a.txt"
    atomic_write(p, "one")
    atomic_write(p, "two")
    assert p.read_text() == "two"
    assert os.listdir(p.parent) == ["a.txt"]


def test_write_json_is_deterministic(tmp_path):
    obj = {"b": [math.pi, 1e-300], "a": True}
    write_json(tmp_path / "x.json", obj)
    first = (tmp_path / "x.json").read_bytes()
    write_json(tmp_path / "x.json", obj)
    assert (tmp_path / "x.json").read_bytes() == first
    assert json.loads(first) == obj
    assert dump_json(obj).endswith("\n")
