import json
import subprocess
import sys

import pytest

from willmore_tori import __version__
from willmore_tori.cli import RunConfig, build_config, main, parse_complex
from willmore_tori.errors import ValidationError


def run_main(args, capsys):
    rc = main(args)
    out = capsys.readouterr()
    return rc, out.out, out.err


@pytest.mark.parametrize("text,val", [("0.5+1.2i", 0.5 + 1.2j), ("i", 1j), ("1.2j", 1.2j),
                                      ({"re": 0.3, "im": 1.1}, 0.3 + 1.1j)])
def test_parse_complex(text, val):
    assert parse_complex(text) == val


def test_parse_complex_rejects_garbage():
    with pytest.raises(ValidationError):
        parse_complex("abc")


def test_precedence_defaults_file_flags():
    cfg = build_config("energy", None, {"omega": "0.2+1.3i", "k": 5, "grid": 64},
                       {"k": 6, "grid": None})
    assert cfg.omega == 0.2 + 1.3j and cfg.k == 6 and cfg.grid == 64
    assert cfg.refine == RunConfig("energy").refine


def test_grid_defaults_depend_on_command():
    assert build_config("perturb", None, {}, {}).grid == 256
    assert build_config("energy", None, {}, {}).grid == 512


def test_tolerance_override_merges():
    cfg = build_config("verify", "elliptic", {"tolerances": {"elliptic": 1e-9}}, {})
    assert cfg.tolerances["elliptic"] == 1e-9 and cfg.tolerances["algebra"] == 1e-8


@pytest.mark.parametrize("args", [
    ["energy", "--omega", "0.5-1i"],
    ["construct", "--k", "2"],
    ["energy", "--grid", "100"],
    ["bogus"],
    [],
    ["verify", "nothing"],
    ["perturb", "--eps-list", "0.1,0.2"],
    ["energy", "--omega", "x+y"],
])
def test_invalid_input_exit_code_1(args, capsys):
    rc, _, err = run_main(args, capsys)
    assert rc == 1
    assert json.loads(err)["pass"] is False


def test_verify_elliptic(capsys):
    rc, out, _ = run_main(["verify", "elliptic", "--omega", "0.5+1.2i"], capsys)
    rep = json.loads(out)
    assert rc == 0 and rep["pass"]
    assert rep["version"] == __version__
    assert rep["config"]["omega"] == {"re": 0.5, "im": 1.2}
    assert rep["tolerances"]["elliptic"] == 1e-10


def test_impossible_tolerance_gives_exit_code_2(tmp_path, capsys):
    cfgf = tmp_path / "c.json"
    cfgf.write_text(json.dumps({"tolerances": {"elliptic": 1e-30}}))
    rc, out, _ = run_main(["verify", "elliptic", "--config", str(cfgf)], capsys)
    assert rc == 2 and json.loads(out)["pass"] is False


def test_unreadable_config(capsys):
    rc, _, _ = run_main(["verify", "elliptic", "--config", "/nonexistent.json"], capsys)
    assert rc == 1


def test_construct_then_energy_and_mesh(tmp_path, capsys):
    imm = tmp_path / "imm.json"
    assert main(["construct", "--omega", "1i", "--k", "3", "--out", str(imm)]) == 0
    rep = json.loads(imm.read_text())
    assert rep["summary"]["density_at_origin"] == 3
    e = tmp_path / "e.json"
    assert main(["energy", "--in", str(imm), "--grid", "128", "--refine", "2", "--out", str(e)]) == 0
    assert json.loads(e.read_text())["relative_error"] < 1e-2
    m = tmp_path / "m.obj"
    assert main(["mesh", "--in", str(imm), "--n", "8", "--out", str(m)]) == 0
    assert m.read_text().count("\nf ") == 64
    assert json.loads((tmp_path / "m.json").read_text())["mesh"]["faces"] == 64


def test_sweep_csv(tmp_path):
    out = tmp_path / "s.json"
    assert main(["sweep", "--omegas", "1i", "--ks", "3", "--grid", "128", "--refine", "1",
                 "--out", str(out)]) == 0
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("omega_re,omega_im,k") and len(lines) == 2


def test_reports_byte_identical(tmp_path):
    paths = []
    p = tmp_path / "r.json"
    for _ in range(2):
        assert main(["construct", "--omega", "0.3+1.1i", "--k", "5", "--seed", "4", "--out", str(p)]) == 0
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "willmore_tori", "verify", "branch-algebra"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["pass"]
