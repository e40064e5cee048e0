import json
import subprocess
import sys

import pytest

from constrained_risk.cli import EXIT_CONFIG, EXIT_OK, main

COMMANDS = [
    ["affinity", "--p1", "gauss:0.3:1^n:4", "--p0", "gauss:0:1^n:4"],
    ["affinity", "--p1", "gauss:0.3:1", "--p0", "gauss:0:1", "--method", "mc", "--count", "5000",
     "--seed", "3"],
    ["affinity", "--p1", "tilt:gauss:0:1:hermite2:0.2", "--p0", "gauss:0:1", "--method", "quad"],
    ["bound", "--loss", "abs", "--p0", "gauss:0:1^n:100", "--p1", "gauss:0.0758714:1^n:100",
     "--delta", "0.001"],
    ["simulate", "--est", "hodges:0.1", "--model", "gauss:0.05:1^n:100", "--loss", "thresh:0.1",
     "--reps", "2000", "--seed", "4"],
    ["simulate", "--est", "mean", "--model", "tilt:gauss:0:1:id:0.3^n:5", "--loss", "sq",
     "--reps", "500", "--seed", "5"],
    ["oracle", "--instances", "50", "--loss", "sq", "--seed", "6"],
]


def run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr().out


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: a[0])
def test_deterministic_json(capsys, argv):
    code1, out1 = run(capsys, argv)
    code2, out2 = run(capsys, argv)
    assert code1 == code2 == EXIT_OK
    assert out1 == out2
    json.loads(out1)


def test_affinity_value(capsys):
    _, out = run(capsys, ["affinity", "--p1", "gauss:1:1", "--p0", "gauss:0:1", "--method",
                          "closed"])
    assert json.loads(out)["value"] == pytest.approx(2.718281828459045)


def test_bound_value(capsys):
    _, out = run(capsys, COMMANDS[3])
    rep = json.loads(out)
    assert rep["branch"] == "power_small_k"
    assert rep["value"] == pytest.approx(0.0544186, abs=1e-6)


@pytest.mark.parametrize("argv", [
    ["affinity", "--p1", "gauss:0", "--p0", "gauss:0:1"],
    ["bound", "--loss", "huber", "--p0", "gauss:0:1", "--p1", "gauss:1:1", "--delta", "0.1"],
    ["simulate", "--est", "median", "--model", "gauss:0:1", "--loss", "sq"],
    ["simulate", "--est", "mean", "--model", "gauss:0:1", "--loss", "sq", "--reps", "10"],
])
def test_bad_input_exit_code(capsys, argv):
    assert main(argv) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_experiment_roundtrip(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "prop2", "parameters": {"reps": 500}}))
    out, csv_path = tmp_path / "r.json", tmp_path / "r.csv"
    argv = ["experiment", "prop2", "--config", str(cfg), "--out", str(out), "--csv", str(csv_path)]
    code, stdout = run(capsys, argv)
    first = out.read_text()
    assert code == EXIT_OK
    run(capsys, argv)
    assert out.read_text() == first
    assert csv_path.read_text().splitlines()[0] == "n,param,affinity,delta_sep,bound,emp_risk,emp_se,seed"
    assert json.loads(stdout)["ok"] is True


def test_experiment_config_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"parameters": {"delta_rule": "const:0.001", "n_grid": [10000]}}))
    assert main(["experiment", "prop3", "--config", str(cfg)]) == EXIT_CONFIG


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "constrained_risk.cli", "affinity", "--p1",
                          "gauss:0.5:1", "--p0", "gauss:0:1", "--method", "closed"],
                         capture_output=True, text=True, check=True).stdout
    assert json.loads(out)["method"] == "closed_form"
