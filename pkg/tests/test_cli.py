import hashlib
import json
import subprocess
import sys

import pytest

from eulerarnold.cli import main
from eulerarnold.svg import read_paths
from eulerarnold.welding import read_curve_csv

WUNSCH = """equation = "wunsch"
N = 64
M = 128
dt = 1e-3
t_fin = 0.5
snapshots = [0, 0.1]
[initial]
modes = [[2, 1.0, "sin"], [3, 0.5, "cos"]]
[detect]
cadence = 0.01
"""


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def wunsch_cfg(tmp_path):
    p = tmp_path / "wunsch.toml"
    p.write_text(WUNSCH)
    return p


def _manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_simulate_wunsch(tmp_path, wunsch_cfg, capsys):
    out = tmp_path / "o"
    code, stdout, _ = run(["simulate", "--config", wunsch_cfg, "--out", out], capsys)
    assert code == 0
    assert json.loads(stdout)["status"] == "ok"
    m = _manifest(out)
    lo, hi = m["verdict"]["bracket"]
    assert m["verdict"]["blowup"] and 0.125 < lo <= hi < 0.25
    paths = {f["path"] for f in m["files"]}
    assert {"trajectory.csv", "summary.json", "u_profiles.svg", "eta_profiles.svg",
            "snapshots/t0.000000_u.csv", "snapshots/t0.100000_grid.csv",
            "snapshots/last_healthy_grid.csv"} <= paths
    for f in m["files"]:
        data = (out / f["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == f["sha256"] and len(data) == f["bytes"]
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,energy,min_u_theta,max_abs_u,tail_fraction,min_eta_theta"


def test_simulate_ewp_reports_energy_drift(tmp_path, capsys):
    cfg = tmp_path / "ewp.toml"
    cfg.write_text(WUNSCH.replace('"wunsch"', '"ewp"').replace("[0, 0.1]", "[0, 0.5]"))
    code, _, _ = run(["simulate", "--config", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["verdict"]["blowup"] is False
    assert summary["energy_drift_relative"] < 1e-6
    assert summary["min_eta_theta"] > 0
    assert summary["growth_monitor"]["slack"] >= 0


def test_weld_after_simulate(tmp_path, wunsch_cfg, capsys):
    out = tmp_path / "o"
    assert run(["simulate", "--config", wunsch_cfg, "--out", out], capsys)[0] == 0
    code, _, err = run(["weld", "--config", wunsch_cfg, "--out", out], capsys)
    assert code == 0, err
    report = json.loads((out / "weld_report.json").read_text())
    tags = [c["snapshot"] for c in report["curves"]]
    assert "t0.000000" in tags and "t0.100000" in tags
    th, z = read_curve_csv(out / "curves" / "t0.000000.csv")
    assert abs(abs(z) - 1).max() < 1e-12
    assert len(read_paths((out / "curves" / "all.svg").read_text())) == len(tags)
    side = json.loads((out / "curves" / "t0.100000.json").read_text())
    assert side["config_hash"] == _manifest(out)["config_digest"]


def test_weld_without_snapshots_simulates_first(tmp_path, wunsch_cfg, capsys):
    out = tmp_path / "o"
    code, _, err = run(["weld", "--config", wunsch_cfg, "--out", out], capsys)
    assert code == 0, err
    assert (out / "trajectory.csv").exists() and (out / "curves" / "t0.100000.csv").exists()


def test_verify_seed_zero_passes(tmp_path, capsys):
    out = tmp_path / "v"
    code, _, err = run(["verify", "--seed", 0, "--out", out], capsys)
    assert code == 0, err
    report = json.loads((out / "verify_report.json").read_text())
    assert report["passed"] and report["trials"] == 100 and report["seed"] == 0
    assert all(s["failures"] == 0 for s in report["suites"].values())


def test_certify(tmp_path, wunsch_cfg, capsys):
    out = tmp_path / "c"
    assert run(["certify", "--config", wunsch_cfg, "--out", out], capsys)[0] == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["u0_slope"] < 0 and abs(cert["omega0_value"]) <= cert["tolerance"]


def test_manifest_is_deterministic(tmp_path, wunsch_cfg, capsys):
    hashes = []
    for d in ("a", "b"):
        out = tmp_path / d
        assert run(["simulate", "--config", wunsch_cfg, "--out", out, "--override", "weld.enabled=true"],
                   capsys)[0] == 0
        hashes.append([(f["path"], f["sha256"]) for f in _manifest(out)["files"]])
    assert hashes[0] == hashes[1]


def test_missing_config_is_exit_two(tmp_path, capsys):
    code, _, err = run(["simulate", "--out", tmp_path], capsys)
    assert code == 2
    doc = json.loads(err)
    assert doc["exit_code"] == 2 and doc["field"] == "--config"


def test_parse_error_carries_line(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('equation = "wunsch"\nN = 64\ndt = 1e-3 1e-4\n[initial]\nmodes = [[2, 1.0, "sin"]]\n')
    code, _, err = run(["simulate", "--config", bad, "--out", tmp_path / "o"], capsys)
    assert code == 2
    doc = json.loads(err)
    assert doc["error"] == "ParseError" and doc["line"] == 3


def test_validation_error_via_override(tmp_path, wunsch_cfg, capsys):
    code, _, err = run(["simulate", "--config", wunsch_cfg, "--override", "t_fin=-1"], capsys)
    assert code == 2
    assert json.loads(err) == {"error": "ValidationError", "message": "t_fin must be positive",
                               "exit_code": 2, "field": "t_fin"}


def test_numerical_failure_is_exit_three(tmp_path, capsys):
    rough = tmp_path / "rough.toml"
    rough.write_text('equation = "wunsch"\nN = 16\ndt = 1e-3\nt_fin = 0.01\n'
                     '[initial]\nmodes = [[14, 1.0, "sin"]]\n')
    code, _, err = run(["simulate", "--config", rough, "--out", tmp_path / "o"], capsys)
    assert code == 3
    assert json.loads(err)["error"] == "InconclusiveResolution"


def test_failed_weld_of_requested_snapshot_is_exit_three(tmp_path, wunsch_cfg, capsys):
    code, _, err = run(["simulate", "--config", wunsch_cfg, "--out", tmp_path / "o",
                        "--override", "weld.enabled=true", "--override", "weld.prefactor=[0, 3.14]"],
                       capsys)
    assert code == 3
    assert json.loads(err)["error"] == "WeldingFailed"
    report = json.loads((tmp_path / "o" / "weld_report.json").read_text())
    assert any(f["fatal"] and f["error"] == "HolomorphyViolation" for f in report["failures"])


def test_reproduce_paper_small(tmp_path, capsys):
    out = tmp_path / "r"
    code, _, err = run(["reproduce-paper", "--out", out, "--override", "N=64", "--override", "M=256",
                        "--override", "dt=1e-3"], capsys)
    assert code == 0, err
    rep = json.loads((out / "reproduce_report.json").read_text())
    assert set(rep["figures"]) == {"wunsch_eulerian", "ewp_eulerian", "wunsch_lagrangian",
                                   "ewp_lagrangian", "wunsch_welding", "ewp_welding"}
    for rel in rep["figures"].values():
        assert (out / rel).exists()
    lo, hi = rep["runs"]["wunsch"]["summary"]["verdict"]["bracket"]
    assert 0.125 < lo <= hi < 0.25
    assert rep["runs"]["ewp"]["summary"]["verdict"]["blowup"] is False


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "eulerarnold", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "eulerarnold" in r.stdout


def test_unknown_verb_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["explode"])
    assert e.value.code == 2
