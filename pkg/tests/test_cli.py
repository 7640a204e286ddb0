import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from multiscat import cli


@pytest.fixture
def step_profile(tmp_path):
    path = tmp_path / "step.json"
    assert cli.main(["make-profile", "step", str(path), "--depth", "3"]) == 0
    return path


@pytest.fixture
def random_profile(tmp_path):
    path = tmp_path / "random.json"
    assert cli.main(["make-profile", "random", str(path), "--seed", "5", "--channels", "2"]) == 0
    return path


def test_parse_range():
    assert cli.parse_range("-5:-1:11") == (-5.0, -1.0, 11, "linear")
    assert cli.parse_range("1:100:3:log")[3] == "log"
    for bad in ("1", "a:b", "1:2:0", "-1:1:5:log", "1:2:3:cubic"):
        with pytest.raises(Exception):
            cli.parse_range(bad)


def test_parse_tolerances():
    tol = cli.parse_tolerances(["check_tol=1e-6"])
    assert tol.check_tol == 1e-6
    with pytest.raises(ValueError):
        cli.parse_tolerances(["nonsense=1"])


def test_scatter_outputs(step_profile, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["scatter", "--profile", str(step_profile), "--lambda", "-1", "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "smatrix.csv").open()))
    t1 = next(r for r in rows if r["block"] == "t1")
    assert float(t1["re"]) == pytest.approx(2 / 3, abs=1e-9)
    cls = json.loads((out / "classification.json").read_text())
    assert cls["open_left"] == [0] and cls["closed_right"] == []
    residuals = {r["check_name"]: float(r["residual"]) for r in csv.DictReader((out / "residuals.csv").open())}
    assert max(residuals.values()) <= 1e-8


def test_scatter_json(step_profile, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["scatter", "--profile", str(step_profile), "--lambda", "-1", "--out", str(out),
                     "--format", "json"]) == 0
    doc = json.loads((out / "transition.json").read_text())
    assert {d["matrix"] for d in doc} == {"Phi_plus", "Phi_minus", "Psi_plus", "Psi_minus"}


def test_threshold_exit_code(step_profile, tmp_path):
    assert cli.main(["scatter", "--profile", str(step_profile), "--lambda", "3", "--out", str(tmp_path)]) == 3


def test_malformed_profile_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"channels": 1}')
    assert cli.main(["scatter", "--profile", str(bad), "--lambda", "0", "--out", str(tmp_path)]) == 2


def test_sweep_skips_threshold(step_profile, tmp_path):
    assert cli.main(["sweep", "--profile", str(step_profile), "--lambda-range=-1:5:7", "--out", str(tmp_path),
                     "--threads", "2"]) == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    lams = [float(r["lambda"]) for r in rows]
    # 0 and 3 are thresholds
    assert lams == [-1.0, 1.0, 2.0, 4.0, 5.0]
    for r in rows:
        if int(r["l_o"]):
            assert float(r["unitarity_residual"]) <= 1e-8


def test_bound_command(tmp_path, capsys):
    well = tmp_path / "well.json"
    cli.main(["make-profile", "well", str(well), "--depth", "3"])
    assert cli.main(["bound", "--profile", str(well), "--lambda-range", "0.01:2.9", "--out", str(tmp_path)]) == 0
    states = json.loads((tmp_path / "bound_states.json").read_text())
    np.testing.assert_allclose([s["lambda"] for s in states], [0.061320966892886493, 2.0518006510275195],
                               atol=1e-9)
    assert "2 bound state(s)" in capsys.readouterr().out


def test_verify_passes_and_detects_corruption(random_profile, tmp_path):
    ok = cli.main(["verify", "--profile", str(random_profile), "--out", str(tmp_path / "a"), "--no-monodromy"])
    assert ok == 0
    rows = list(csv.DictReader((tmp_path / "a" / "verify.csv").open()))
    assert rows and all(r["status"] == "PASS" for r in rows)
    bad = cli.main(["verify", "--profile", str(random_profile), "--out", str(tmp_path / "b"), "--no-monodromy",
                    "--corrupt-s"])
    assert bad == 1
    assert cli.SCATTERING_HOOK is None


def test_module_entry_point(step_profile, tmp_path):
    res = subprocess.run([sys.executable, "-m", "multiscat", "scatter", "--profile", str(step_profile),
                          "--lambda", "-1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and "l_o=1" in res.stdout
