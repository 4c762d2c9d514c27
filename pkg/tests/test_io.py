import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from willmore_tori.immersion import build_willmore_torus, evaluate_r4
from willmore_tori.io import csv_text, dumps_json, mesh_grid, obj_text, read_json, to_jsonable, write_json


def test_complex_and_nonfinite_encoding():
    out = to_jsonable({"z": 1 + 2j, "nan": float("nan"), "inf": -np.inf, "arr": np.arange(3),
                       "flag": np.bool_(True), "n": np.int64(5)})
    assert out == {"z": {"re": 1.0, "im": 2.0}, "nan": "nan", "inf": "-inf", "arr": [0, 1, 2],
                   "flag": True, "n": 5}


def test_sorted_keys_and_trailing_newline():
    text = dumps_json({"b": 1, "a": {"d": 2, "c": 3}})
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"') and text.index('"c"') < text.index('"d"')


@given(st.dictionaries(st.text(min_size=1, max_size=5),
                       st.one_of(st.floats(allow_nan=False, allow_infinity=False), st.integers(),
                                 st.text(max_size=5), st.booleans())))
def test_json_round_trip(d):
    assert json.loads(dumps_json(d)) == d


def test_write_read(tmp_path):
    write_json({"x": 0.1 + 0j}, tmp_path / "a.json")
    assert read_json(tmp_path / "a.json") == {"x": {"re": 0.1, "im": 0.0}}


def test_csv_full_precision():
    x = 0.1 + 0.2
    text = csv_text([{"a": x, "b": "q,uote"}], ["a", "b"])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["a", "b"]
    assert float(rows[1][0]) == x
    assert rows[1][1] == "q,uote"
    assert "\r\n" in text


@pytest.fixture(scope="module")
def torus():
    return build_willmore_torus(0.5 + 1.2j, 3, seed=0)


def test_mesh_grid_seam(torus):
    X, seam, st_ = mesh_grid(torus, 8)
    assert X.shape == (81, 4)
    Xg = X.reshape(9, 9, 4)
    assert np.array_equal(Xg[-1], Xg[0]) and np.array_equal(Xg[:, -1], Xg[:, 0])
    assert seam.sum() == 17


def test_obj_structure(torus):
    n = 6
    text = obj_text(torus, n)
    lines = text.splitlines()
    verts = [ln for ln in lines if ln.startswith("v ")]
    tex = [ln for ln in lines if ln.startswith("vt ")]
    faces = [ln for ln in lines if ln.startswith("f ")]
    x4 = [ln for ln in lines if ln.startswith("# x4 ")]
    seam = sum(len(ln.split()) - 2 for ln in lines if ln.startswith("# seam"))
    assert len(verts) == len(tex) == len(x4) == (n + 1) ** 2
    assert len(faces) == n * n
    assert seam == 2 * n + 1
    idx = [int(t.split("/")[0]) for f in faces for t in f.split()[1:]]
    assert min(idx) == 1 and max(idx) == (n + 1) ** 2
    # vertex coordinates are the map values
    X = evaluate_r4(torus, torus.lattice.point(0.5, 0.5))
    mid = (n // 2) * (n + 1) + n // 2
    v = [float(t) for t in verts[mid].split()[1:]]
    assert np.allclose(v, X[:3], rtol=1e-15)
    assert float(x4[mid].split()[2]) == pytest.approx(X[3], rel=1e-15)
