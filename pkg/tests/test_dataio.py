import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icsqr import NonFiniteInput, ShapeError
from icsqr.dataio import (
    DatasetFile,
    Orientation,
    ParseError,
    format_float,
    read_dataset,
    to_jsonable,
    write_json,
    write_matrix,
    write_table,
)


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_read_with_header(tmp_path):
    ds = read_dataset(DatasetFile(write(tmp_path, "a,b\n1,2\n3,4\n5,6\n")))
    assert ds.names == ("a", "b")
    assert np.array_equal(ds.x, [[1, 3, 5], [2, 4, 6]])
    assert (ds.p, ds.n) == (2, 3)


def test_read_without_header_and_blank_lines(tmp_path):
    ds = read_dataset(DatasetFile(write(tmp_path, "1,2\n\n3,4\n")))
    assert ds.names == ("x1", "x2")
    assert ds.x.shape == (2, 2)


def test_read_vars_rows_and_delimiter(tmp_path):
    path = write(tmp_path, "1;2;3\n4;5;6\n")
    ds = read_dataset(DatasetFile(path, Orientation.VARS_ROWS, header=False, delimiter=";"))
    assert np.array_equal(ds.x, [[1, 2, 3], [4, 5, 6]])


def test_forced_header_flag(tmp_path):
    path = write(tmp_path, "1,2\n3,4\n5,6\n")
    ds = read_dataset(DatasetFile(path, header=True))
    assert ds.names == ("1", "2") and ds.n == 2


@pytest.mark.parametrize(
    "text, exc",
    [
        ("1,2\n3\n", ParseError),
        ("1,2\n3,x\n", ParseError),
        ("a,b\n", ParseError),
        ("", ParseError),
        ("1,nan\n3,4\n", NonFiniteInput),
        ("1,inf\n3,4\n", NonFiniteInput),
        ("1,2\n", ShapeError),
    ],
)
def test_read_errors(tmp_path, text, exc):
    with pytest.raises(exc):
        read_dataset(DatasetFile(write(tmp_path, text)))


def test_read_missing_file(tmp_path):
    with pytest.raises(ParseError):
        read_dataset(DatasetFile(tmp_path / "nope.csv"))


def test_format_float():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.0) == "1"
    assert format_float(float("nan")) == "nan"
    assert format_float(-math.inf) == "-inf"


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_roundtrip(v):
    assert float(format_float(v)) == v


def test_matrix_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((3, 50)) * np.logspace(-200, 200, 3)[:, None]
    path = tmp_path / "m.csv"
    write_matrix(path, x.T, ["a", "b", "c"])
    ds = read_dataset(DatasetFile(path))
    assert np.array_equal(ds.x, x)
    first = path.read_bytes()
    write_matrix(path, x.T, ["a", "b", "c"])
    assert path.read_bytes() == first


def test_write_table_types(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path, ["i", "v", "s"], [[1, 0.5, "ok"], [np.int64(2), np.float64(2.0), "x"]])
    assert path.read_text() == "i,v,s\n1,0.5,ok\n2,2,x\n"


def test_write_matrix_row_labels(tmp_path):
    path = tmp_path / "t.csv"
    write_matrix(path, np.eye(2), ["a", "b"], row_label="row", row_ids=["r1", "r2"])
    assert path.read_text() == "row,a,b\nr1,1,0\nr2,0,1\n"


def test_json_helpers(tmp_path):
    from icsqr.ics import Algorithm

    obj = {"a": np.arange(3), "b": np.float64("nan"), "c": Algorithm.QR, "d": (np.bool_(True), 1.5)}
    assert to_jsonable(obj) == {"a": [0, 1, 2], "b": None, "c": "qr", "d": [True, 1.5]}
    path = tmp_path / "o.json"
    write_json(path, obj)
    assert json.loads(path.read_text())["b"] is None
