import csv
import json
import os
import subprocess
import sys

import pytest

from qfamp.cli import main
from qfamp.schema import RESULT_SCHEMA, validate_result


def write_config(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["--config", "x.json"]])
def test_unknown_subcommand(argv, capsys):
    assert main(argv) == 64
    assert "usage: qfamp" in capsys.readouterr().err


def test_gain_csv(tmp_path, capsys):
    out = tmp_path / "gain.csv"
    assert main(["gain", "--points", "5", "--omega-range", "-1", "1", "--output", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["omega", "re", "im", "gain_db", "phase_deg"]
    assert len(rows) == 6 and rows[3][:3] == ["0", "-1", "20"]
    line = capsys.readouterr().out.strip()
    assert line.startswith("peak gain_db = 26.0314") and str(out) in line
    assert os.listdir(tmp_path) == ["gain.csv"]


def test_gain_single_omega_to_stdout(capsys):
    assert main(["gain", "--omega", "0"]) == 0
    captured = capsys.readouterr()
    assert captured.out.splitlines()[1].startswith("0,-1,20,")
    assert "peak gain_db" in captured.err


def test_precedence_flag_over_file_over_default(tmp_path):
    cfg = write_config(tmp_path, {"controller": {"type": "beam_splitter", "beta": 0.05},
                                  "grid": {"n_points": 3}})
    out = tmp_path / "g.json"
    assert main(["gain", "--config", cfg, "--beta", "0.1", "--format", "json", "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    validate_result(doc)
    echoed = doc["metadata"]["config"]
    assert echoed["controller"]["beta"] == 0.1
    assert echoed["grid"] == {"omega_min": -1.0, "omega_max": 1.0, "n_points": 3}
    assert echoed["plant"]["lambda"] == 5.0
    assert doc["command"] == "gain" and doc["columns"][0] == "omega"


@pytest.mark.parametrize("content", ["{not json", json.dumps({"plant": {"type": "laser"}}),
                                     json.dumps({"bogus": 1}), json.dumps({"grid": {"n_points": 1}})])
def test_config_errors(tmp_path, content, capsys):
    path = tmp_path / "bad.json"
    path.write_text(content)
    out = tmp_path / "o.csv"
    assert main(["gain", "--config", str(path), "--output", str(out)]) == 2
    assert not out.exists()
    captured = capsys.readouterr()
    assert captured.out == "" and "config" in captured.err


def test_missing_config_and_bad_flag(tmp_path):
    assert main(["gain", "--config", str(tmp_path / "none.json")]) == 2
    assert main(["gain", "--points", "many"]) == 2
    assert main(["gain", "--omega-range", "1", "0"]) == 2


def test_unstable_exit_code(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["stability", "--beta", "0.5", "--output", str(out)]) == 3
    captured = capsys.readouterr()
    assert not out.exists() and captured.out == ""
    assert captured.err.startswith("unstable")


def test_stability_and_poles(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert main(["poles", "--beta", "0.1", "--output", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["system", "re", "im"]
    assert sum(r[0] == "closed_loop" for r in rows) == 2
    assert main(["stability", "--beta", "0.1"]) == 0


def test_pole_on_axis_exit_code(tmp_path):
    cfg = write_config(tmp_path, {"plant": {"type": "ndpa", "kappa": 1, "lambda": 0.5}})
    assert main(["sensitivity", "--config", cfg, "--omega", "0"]) == 4
    assert main(["constraints", "--config", cfg, "--points", "3"]) == 4


def test_noise_sensitivity_bode_constraints(tmp_path):
    for cmd, first in (("noise", "a_value"), ("sensitivity", "bound"), ("bode", "phase_unwrapped_deg"),
                       ("constraints", "residual")):
        out = tmp_path / f"{cmd}.csv"
        assert main([cmd, "--beta", "0.1", "--alpha", "0.9", "--gamma", "0.05", "--points", "11",
                     "--output", str(out)]) == 0
        assert first in read_csv(out)[0]


def test_montecarlo_json_byte_identical(tmp_path):
    out = tmp_path / "mc.json"
    args = ["montecarlo", "--seed", "5", "--samples", "8", "--format", "json", "--output", str(out)]
    assert main(args) == 0
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first
    doc = json.loads(first)
    validate_result(doc)
    assert doc["metadata"]["config"]["experiment"]["seed"] == 5
    assert len(doc["per_sample"]) == 8 and doc["kind"] == "robustness"


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("QFA_SEED", "5")
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    assert main(["montecarlo", "--samples", "4", "--output", str(a)]) == 0
    assert main(["montecarlo", "--seed", "5", "--samples", "4", "--output", str(b)]) == 0
    assert main(["montecarlo", "--seed", "6", "--samples", "4", "--output", str(c)]) == 0
    assert a.read_text() == b.read_text() != c.read_text()
    monkeypatch.setenv("QFA_SEED", "abc")
    assert main(["montecarlo", "--samples", "4"]) == 2


def test_montecarlo_noise_sweep(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "plant": {"type": "detuned_ndpa", "kappa": 1, "lambda": 5},
        "controller": {"type": "beam_splitter", "beta": 0.1},
        "feedback": {"alpha1": 0.5, "alpha2": 0.5},
        "experiment": {"kind": "noise", "seed": 1, "n_samples": 3, "sweep": {"axis": "gamma", "values": [0, 0.1]}},
    })
    out = tmp_path / "n.csv"
    assert main(["montecarlo", "--config", cfg, "--output", str(out)]) == 0
    assert len(read_csv(out)) == 7
    assert "A_fb < A_o for all stable samples: True" in capsys.readouterr().out


def test_montecarlo_needs_detuned_plant(tmp_path):
    cfg = write_config(tmp_path, {"plant": {"type": "ndpa", "lambda": 0.2}})
    assert main(["montecarlo", "--config", cfg]) == 2


def test_result_schema_requires_command():
    assert "command" in RESULT_SCHEMA["required"]


def test_module_entry_point(tmp_path):
    out = tmp_path / "g.csv"
    proc = subprocess.run([sys.executable, "-m", "qfamp", "gain", "--points", "3", "--output", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run([sys.executable, "-m", "qfamp", "nope"], capture_output=True, text=True)
    assert proc.returncode == 64
