import json
from pathlib import Path

import numpy as np
import pytest

from pinned_gl import export
from pinned_gl.cli import main

SCENES = Path(__file__).resolve().parents[1] / "scenes"
SYM = str(SCENES / "symmetric.json")
TWO = str(SCENES / "two_pair.json")


def run(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate(capsys):
    code, out, _ = run(capsys, "validate", SYM)
    assert code == 0
    doc = json.loads(out)
    assert doc["valid"] and doc["clearance"] == 0.5
    assert "config_hash" in doc and "version" in doc


def test_validate_failure(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"omega": {"type": "ball", "center": [0, 0, 0], "radius": 1},
                               "inclusion": {"type": "ball", "center": [0, 0, 0], "radius": 1.5}, "b": 0.5}))
    code, out, err = run(capsys, "validate", str(bad))
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "InvalidScene"


def test_distance_value(capsys):
    code, out, _ = run(capsys, "distance", SYM, "--from", "-0.9,0,0", "--to", "0.9,0,0")
    assert code == 0
    doc = json.loads(out)
    assert doc["value"] == pytest.approx(1.05, abs=1e-12)
    assert doc["phases"] == ["outside", "inside", "outside"]


def test_geodesic_writes_obj(capsys, tmp_path):
    code, _, _ = run(capsys, "--out", str(tmp_path), "geodesic", TWO, "--from", "0.9,0.1,0", "--to", "-0.8,0.2,0.1")
    assert code == 0
    obj = (tmp_path / "geodesic.obj").read_text()
    assert obj.startswith("# pinned-gl") and "\nl 1 2 3 4\n" in obj


def test_bad_point_is_validation_error(capsys):
    code, _, err = run(capsys, "distance", SYM, "--from", "1,2", "--to", "0,0,0")
    assert code == 2 and "error" in json.loads(err)


def test_connection_from_matrix(capsys, tmp_path):
    m = tmp_path / "d.csv"
    m.write_text("3,1\n1,3\n")
    code, out, _ = run(capsys, "connection", "--matrix", str(m))
    doc = json.loads(out)
    assert code == 0 and doc["sigma"] == [2, 1] and doc["length"] == 2.0


def test_connection_rejects_negative(capsys, tmp_path):
    m = tmp_path / "d.csv"
    m.write_text("-1,1\n1,3\n")
    code, _, err = run(capsys, "connection", "--matrix", str(m))
    assert code == 2 and json.loads(err)["error"] == "NegativeEntry"


def test_link_and_potential(capsys):
    code, out, _ = run(capsys, "link", TWO, "--no-probe")
    doc = json.loads(out)
    assert code == 0 and len(doc["curves"]) == 2
    code, out, _ = run(capsys, "potential", TWO)
    pot = json.loads(out)
    assert pot["gap"] == pytest.approx(doc["length"], abs=1e-9)
    assert pot["lipschitz_slack"] >= -1e-9


def test_radial_artifacts_are_byte_identical(capsys, tmp_path):
    outs = []
    for d in ("a", "b"):
        code, out, _ = run(capsys, "--out", str(tmp_path / d), "radial", "--eps", "1e-2", "--nodes", "25")
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    for name in ("radial.csv", "radial.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    doc = json.loads(outs[0])
    assert {"energy", "eps_energy", "gamma", "C"} <= set(doc)


def test_radial_non_convergence_exit_code(capsys, monkeypatch):
    from pinned_gl import profile
    from pinned_gl.errors import NoConvergence

    def boom(*a, **k):
        raise NoConvergence("forced")
    monkeypatch.setattr(profile, "solve_radial", boom)
    code, _, err = run(capsys, "radial")
    assert code == 3 and json.loads(err)["error"] == "NoConvergence"


def test_testfn_energy_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "--out", str(tmp_path), "testfn-energy", SYM, "--policy", "exact-profile")
    assert code == 0
    doc = json.loads(out)
    assert doc["rel_err"] < 0.05
    lines = (tmp_path / "testfn-energy.csv").read_text().splitlines()
    assert lines[1] == "eps,ln_term,core,caps,strip,total" and len(lines) == 5


def test_structure_field_export(capsys, tmp_path):
    code, out, _ = run(capsys, "--out", str(tmp_path), "structure", SYM, "--eta", "0.05", "--grid", "16")
    assert code == 0
    cert = json.loads(out)["certificate"]
    assert cert["gap_ok"] and cert["slack_ok"]
    origin, h, dims, vals, header = export.read_field(tmp_path / "structure.field")
    assert h == 1 / 16 and vals.shape == dims[::-1]
    assert header["config_hash"] == json.loads(out)["config_hash"]


def test_export_kinds(capsys, tmp_path):
    for what in ("obj", "csv", "json"):
        code, _, _ = run(capsys, "--out", str(tmp_path), "export", TWO, "--what", what)
        assert code == 0
    M = export.read_matrix_csv(tmp_path / "export.csv")
    assert M.shape == (2, 2) and np.all(M > 0)
    assert json.loads((tmp_path / "export.json").read_text())["b"] == 0.5


def test_acceptance_subset(capsys):
    code, out, err = run(capsys, "acceptance", SYM, "--only", "1,4")
    assert code == 0
    doc = json.loads(out)
    assert doc["passed"] and [c["number"] for c in doc["criteria"]] == [1, 4]
    assert "[PASS]" in err


def test_unknown_command(capsys):
    code, _, err = run(capsys, "nope")
    assert code == 2 and json.loads(err)["error"] == "UsageError"
