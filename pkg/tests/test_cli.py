import csv
import json
import math
import subprocess
import sys

import pytest

from shlab.cli import main

# small settings so every experiment runs in well under a second
QUICK = {
    "potential-profile": ["--variant", "regularized", "--eps", "0.01", "--samples", "50"],
    "hardy": ["--levels", "200:1e-6,400:1e-8", "--test-functions", "10"],
    "eigen": ["--grid", "500", "--mu", "0.3", "--variant", "regularized", "--eps", "0.01"],
    "eps-sweep": ["--grid", "500", "--eps-list", "0.1,0.01,0.001"],
    "heat": ["--grid", "300", "--T", "0.05"],
    "blowup-scan": ["--grid", "300", "--T", "0.05", "--N-list", "10,100,1000"],
    "cost-sweep": ["--grid", "500", "--eps-list", "1e-4,1e-5"],
}


def rows(path):
    return list(csv.reader(open(path)))


def test_eigen_example(tmp_path, capsys):
    assert main(["eigen", "--n", "3", "--mu", "0", "--grid", "4000", "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "eigen.csv")
    assert table[0] == ["M", "lambda1", "residual", "iterations", "h1_window_norm"]
    assert float(table[1][1]) == pytest.approx(math.pi ** 2, rel=5e-3)
    side = json.load(open(tmp_path / "eigen.json"))
    assert side["parameters"]["grid"] == 4000 and "versions" in side["meta"]
    assert "compute_s" in side["meta"]["timings"]
    assert capsys.readouterr().out.strip().endswith("eigen.csv")


def test_profile_example(tmp_path):
    assert main(["potential-profile", "--n", "3", "--variant", "exact", "--samples", "100",
                 "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "potential-profile.csv")
    assert table[0] == ["r", "psi"] and len(table) == 101
    at_half = [float(p) for r, p in table[1:] if float(r) == 0.5]
    assert at_half == [pytest.approx(16.0)]
    assert table[-1] == ["1.0", "inf"]


def test_cost_sweep_refuses_subcritical_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "cost-sweep", "parameters": {"mu": 0.2}, "output": str(tmp_path)}))
    code = main(["run", "--config", str(cfg)])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert "mu must exceed ((n-2)/2)^2" in err["error"]["message"]
    assert err["error"]["experiment"] == "cost-sweep" and err["error"]["exit_code"] == 1
    assert not (tmp_path / "cost-sweep.csv").exists()


@pytest.mark.parametrize("experiment", sorted(QUICK))
def test_csv_is_deterministic(experiment, tmp_path):
    for d in ("a", "b"):
        assert main([experiment, *QUICK[experiment], "--seed", "5", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / f"{experiment}.csv").read_bytes()
    assert a == (tmp_path / "b" / f"{experiment}.csv").read_bytes()
    assert a.count(b"\n") >= 2


@pytest.mark.parametrize("experiment", ["eigen", "hardy", "cost-sweep"])
def test_sidecar_round_trip(experiment, tmp_path):
    assert main([experiment, *QUICK[experiment], "--seed", "3", "--out", str(tmp_path / "a")]) == 0
    side = tmp_path / "a" / f"{experiment}.json"
    assert main(["run", "--config", str(side), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / f"{experiment}.csv").read_bytes() == (tmp_path / "b" / f"{experiment}.csv").read_bytes()
    again = json.load(open(tmp_path / "b" / f"{experiment}.json"))
    first = json.load(open(side))
    assert again["parameters"] == first["parameters"] and again["seed"] == 3


def test_flags_override_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "eigen", "parameters": {"grid": 300, "mu": 0.1}}))
    assert main(["eigen", "--config", str(cfg), "--mu", "0", "--out", str(tmp_path)]) == 0
    side = json.load(open(tmp_path / "eigen.json"))
    assert side["parameters"]["grid"] == 300 and side["parameters"]["mu"] == 0.0


def test_shl_out_overrides_out(tmp_path, monkeypatch):
    monkeypatch.setenv("SHL_OUT", str(tmp_path / "env"))
    assert main(["eigen", "--grid", "200", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "eigen.csv").exists()
    assert not (tmp_path / "flag").exists()


@pytest.mark.parametrize("payload", [
    {"experiment": "eigen", "parameters": {"bogus": 1}},
    {"experiment": "eigen", "extra": 1},
    {"experiment": "nonsense"},
    {"experiment": "eigen", "parameters": {"grid": "many"}},
    {"experiment": "heat", "parameters": {"u0": "twos"}},
    {"experiment": "eigen", "parameters": {"variant": "regularized"}},
])
def test_invalid_configs_exit_with_usage_error(payload, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(payload))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "ConfigError" and err["error"]["exit_code"] == 2
    assert list(tmp_path.iterdir()) == [cfg]


def test_run_needs_config(capsys):
    assert main(["run"]) == 2
    assert "--config" in json.loads(capsys.readouterr().err)["error"]["message"]


def test_blowup_sidecar_is_strict_json(tmp_path):
    assert main(["blowup-scan", *QUICK["blowup-scan"], "--out", str(tmp_path)]) == 0
    text = (tmp_path / "blowup-scan.json").read_text()
    data = json.loads(text, parse_constant=lambda c: pytest.fail(f"non-strict constant {c}"))
    assert data["meta"]["results"]["header"]["hardy_threshold"] == 0.25


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "shlab.cli", "eigen", "--grid", "200", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "eigen.csv").exists()
