import csv
import io
import json

import numpy as np
import pytest

from qdepth.cli import load_config, main
from qdepth.depth import REPORT_KEYS, DepthReport
from qdepth.errors import ConfigError


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_depth_fock_one(capsys):
    code, out, err = run(capsys, "depth", "--state.kind", "fock", "--state.n", "1")
    assert code == 0
    rep = json.loads(out)
    assert list(rep) == list(REPORT_KEYS)
    assert rep["s_m"] == -1 and rep["tau_m"] == 1 and rep["degree"] == 1
    assert rep["status"] == "conclusive"
    assert "status=conclusive" in err


def test_scan_vacuum_positive(capsys):
    code, out, _ = run(capsys, "scan", "--state.kind", "fock", "--state.n", "0")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["s", "w"]
    s = np.array([float(r[0]) for r in rows[1:]])
    w = np.array([float(r[1]) for r in rows[1:]])
    assert len(s) == 39 and s[0] == -1 and s[-1] == pytest.approx(0.9)
    assert np.all(w > 0)
    np.testing.assert_allclose(w, 2 / (1 - s), rtol=1e-14)


def test_depth_subtracted_thermal_boundary(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[state]\nkind = "thermal"\nnbar = 1.0\nmodifiers = ["subtract_photon"]\n')
    out = tmp_path / "report.json"
    code, stdout, _ = run(capsys, "depth", "--config", str(cfg), "--out", str(out))
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["status"] == "conclusive"
    assert rep["s_m"] == pytest.approx(1, abs=1e-3) and rep["tau_m"] == pytest.approx(0, abs=1e-3)
    assert "boundary_limited=true" in stdout
    back = DepthReport.from_dict(rep)
    assert back.s_m == rep["s_m"] and back.status == "conclusive"


def test_determinism(tmp_path, capsys):
    args = ["grid", "--state.kind", "superposition", "--state.amplitudes",
            "[{re=1, im=0}, {re=0, im=1}]", "--s", "-0.5", "--resolution", "21"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    ja, jb = tmp_path / "a.json", tmp_path / "b.json"
    dep = ["depth", "--state.kind", "fock", "--state.n", "2"]
    assert main(dep + ["--out", str(ja)]) == 0
    assert main(dep + ["--out", str(jb)]) == 0
    assert ja.read_bytes() == jb.read_bytes()
    capsys.readouterr()


def test_grid_header(capsys):
    code, out, _ = run(capsys, "grid", "--state.kind", "fock", "--state.n", "1",
                       "--resolution", "5", "--half_width", "2")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "re,im,w"
    assert len(lines) == 1 + 25


def test_eval_text_and_json(capsys):
    code, out, _ = run(capsys, "eval", "--state.kind", "fock", "--state.n", "1", "--s", "0")
    assert code == 0 and float(out) == pytest.approx(-2)
    code, out, _ = run(capsys, "eval", "--state.kind", "coherent", "--state.alpha",
                       "{re=1, im=0}", "--alpha", "{re=1, im=0}", "--s", "0",
                       "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["w"] == pytest.approx(2.0)


def test_oracle_check(capsys):
    code, out, _ = run(capsys, "oracle-check", "--state.kind", "fock", "--state.n", "2")
    assert code == 0
    doc = json.loads(out)
    assert doc["max_deviation"] < 1e-6 and len(doc["per_s"]) == 3


@pytest.mark.parametrize("argv", [
    ["depth", "--state.kind", "squeezed"],
    ["eval"],
    ["eval", "--state.kind", "fock", "--state.n", "1", "--s", "1"],
    ["scan", "--state.kind", "spsts_closed_form", "--state.nbar", "1", "--s_max", "3.5"],
    ["eval", "--state.kind", "fock", "--state.n", "1", "--bogus", "1"],
    ["eval", "--state.kind", "fock", "--state.n", "1", "--format", "xml"],
    ["eval", "--state.kind", "fock", "--state.n", "1", "--out", "/nonexistent/dir/x"],
    ["depth", "--state.kind", "fock", "--state.n", "1", "--depth.s_lower", "0.5",
     "--depth.s_upper", "0.1"],
])
def test_config_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "configuration error" in err


def test_numerical_failure_exit_3(capsys):
    code, _, err = run(capsys, "oracle-check", "--state.kind", "thermal",
                       "--state.nbar", "3", "--state.n_max", "20")
    assert code == 3 and "numerical failure" in err


def test_config_file_and_override_precedence(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[state]\nkind = "fock"\nn = 3\n[eval]\ns = -0.5\n')
    cfg = load_config("eval", str(p), ["--state.n", "1", "--s", "0.25"])
    assert cfg["state"] == {"kind": "fock", "n": 1}
    assert cfg["eval"]["s"] == 0.25
    with pytest.raises(ConfigError):
        load_config("eval", str(p), ["--state.n"])
    with pytest.raises(ConfigError):
        load_config("eval", str(tmp_path / "missing.toml"), [])
