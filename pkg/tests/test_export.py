import numpy as np
import pytest

from pinned_gl import __version__, export
from pinned_gl.errors import ValidationError
from pinned_gl.structure import ScalarFieldGrid


def test_config_hash_ignores_key_order_and_numpy_types():
    a = export.config_hash({"x": np.float64(1.5), "y": [1, 2]})
    b = export.config_hash({"y": (1, 2), "x": 1.5})
    assert a == b and len(a) == 16
    assert export.config_hash({"x": 1.5000001}) != a


def test_stamp():
    out = export.stamp({"value": 1.0}, {"seed": 0})
    assert out["version"] == __version__
    assert out["config_hash"] == export.config_hash({"seed": 0})


def test_field_roundtrip_and_layout(tmp_path):
    vals = np.arange(24, dtype=float).reshape(2, 3, 4)  # nz, ny, nx
    fld = ScalarFieldGrid(np.array([-1.0, 0.0, 0.5]), 0.25, (4, 3, 2), vals)
    p = tmp_path / "f.field"
    export.write_field(p, fld, {"a": 1})
    origin, h, dims, back, header = export.read_field(p)
    np.testing.assert_array_equal(back, vals)
    assert dims == (4, 3, 2) and h == 0.25
    np.testing.assert_array_equal(origin, [-1.0, 0.0, 0.5])
    assert header["config_hash"] == export.config_hash({"a": 1})
    raw = p.read_bytes()
    payload = raw[raw.index(b"end\n") + 4:]
    assert len(payload) == 24 * 8
    # x fastest, little endian
    assert np.frombuffer(payload[:16], "<f8").tolist() == [0.0, 1.0]


def test_field_bytes_are_deterministic():
    vals = np.random.default_rng(0).normal(size=(3, 3, 3))
    a = export.field_bytes([0, 0, 0], 0.1, (3, 3, 3), vals, {"k": 1})
    b = export.field_bytes([0, 0, 0], 0.1, (3, 3, 3), vals.copy(), {"k": 1})
    assert a == b


def test_read_field_rejects_garbage(tmp_path):
    p = tmp_path / "x"
    p.write_bytes(b"hello world\nend\n")
    with pytest.raises(ValidationError):
        export.read_field(p)


def test_obj_polylines():
    txt = export.obj_text([np.zeros((2, 3)), np.ones((3, 3))], {"c": 1}, tags=[["outside"], ["inside", "outside"]])
    lines = txt.splitlines()
    assert lines.count("o curve1") == 1 and "o curve2" in lines
    assert "l 1 2" in lines and "l 3 4 5" in lines
    assert sum(line.startswith("v ") for line in lines) == 5


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "m.csv"
    M = np.array([[0.1, 0.2], [0.3, 1 / 3]])
    export.write_csv(p, ["n1", "n2"], M.tolist(), {"c": 2})
    assert p.read_text().startswith("# version=")
    np.testing.assert_array_equal(export.read_matrix_csv(p), M)


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3,x\n")
    with pytest.raises(ValidationError):
        export.read_matrix_csv(p)
    p.write_text("1,2\n3\n")
    with pytest.raises(ValidationError):
        export.read_matrix_csv(p)
