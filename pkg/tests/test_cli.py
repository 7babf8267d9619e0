import json
import subprocess
import sys

import numpy as np
import pytest

from heatlq.cli import main, run

from .conftest import DEFAULT_CONFIG


def test_solve_writes_outputs(tmp_path, capsys):
    code, files = run(["solve", "--config", str(DEFAULT_CONFIG), "--out-dir", str(tmp_path),
                       "--dump-operators"])
    assert code == 0
    names = {f.name for f in files}
    assert {"run_manifest.json", "gains.csv", "value.txt", "Atot.csv"} <= names
    gains = np.loadtxt(tmp_path / "gains.csv", delimiter=",", skiprows=1)
    assert gains.shape == (2001, 7)
    text = (tmp_path / "value.txt").read_text().split()
    assert float(text[1]) == pytest.approx(801.26, abs=0.05)
    assert "value" in capsys.readouterr().out


def test_manifest(tmp_path):
    run(["solve", "--config", str(DEFAULT_CONFIG), "--out-dir", str(tmp_path), "--seed", "17",
         "--modes", "4"])
    m = json.loads((tmp_path / "run_manifest.json").read_text())
    assert m["command"] == "solve" and m["seed"] == 17
    assert m["config"]["discretization"]["N"] == 4
    assert m["backend"] in ("cython", "python")


def test_simulate_with_field(tmp_path):
    code, _ = run(["simulate", "--config", str(DEFAULT_CONFIG), "--out-dir", str(tmp_path),
                   "--field", "--field-every", "100"])
    assert code == 0
    head = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert head == "t,X_0,U,V,z_0,z_1,z_2,z_3"
    field = np.loadtxt(tmp_path / "u_field.csv", delimiter=",", skiprows=1)
    assert field.shape == (11 * 256, 3)


def test_bad_delta_exits_one(tmp_path, capsys):
    cfg = json.loads(DEFAULT_CONFIG.read_text())
    cfg["cost"]["delta"] = 0.0
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(cfg))
    assert main(["solve", "--config", str(p), "--out-dir", str(tmp_path)]) == 1
    assert "delta must be positive" in capsys.readouterr().err


def test_missing_config_is_io_failure(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "none.json")]) == 3


def test_unknown_flag_and_command():
    assert main(["solve", "--bogus"]) == 1
    assert main(["frobnicate"]) == 1
    assert main([]) == 1


def test_bad_ns_list(tmp_path):
    assert main(["converge", "--config", str(DEFAULT_CONFIG), "--out-dir", str(tmp_path),
                 "--Ns", "2,x"]) == 1


def test_unwritable_out_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["solve", "--config", str(DEFAULT_CONFIG), "--out-dir", str(blocker / "x")]) == 3


def test_converge(tmp_path):
    code, _ = run(["converge", "--config", str(DEFAULT_CONFIG), "--out-dir", str(tmp_path),
                   "--Ns", "2,4", "--n-ref", "8"])
    assert code == 0
    rows = np.loadtxt(tmp_path / "convergence.csv", delimiter=",", skiprows=1)
    assert rows.shape == (3, 5) and rows[-1, 0] == 8


def test_montecarlo(tmp_path):
    code, _ = run(["montecarlo", "--config", str(DEFAULT_CONFIG), "--out-dir", str(tmp_path),
                   "--paths", "2000", "--workers", "2"])
    assert code == 0
    assert (tmp_path / "compare.csv").read_text().startswith("check,observed,reference,tolerance,passed")


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "heatlq.cli", "solve", "--config",
                          str(DEFAULT_CONFIG), "--out-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("value ")
