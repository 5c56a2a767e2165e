import json
import subprocess
import sys

import numpy as np
import pytest

from branchsel.cli import main, parse_args, UsageError
from branchsel.dynamics import Trajectory
from branchsel.estimator import rows_from_csv

SPEED_FIELDS = {"command", "p", "N", "steps", "burnin", "batches", "seed", "v_hat", "stderr",
                "v_inf", "gap_hat", "max_diameter"}


def run_json(capsys, argv, code=0):
    assert main(argv) == code
    return json.loads(capsys.readouterr().out)


def test_parse_theory():
    cmd = parse_args(["theory", "--p", "0.25"])
    assert cmd.command == "theory" and cmd.p == 0.25


@pytest.mark.parametrize("argv", [
    ["speed", "--p", "1.5", "--N", "2", "--steps", "100"],
    ["speed", "--p", "0.3", "--N", "0", "--steps", "100"],
    ["speed", "--p", "0.3", "--N", "2", "--steps", "100", "--burnin", "100"],
    ["speed", "--p", "0.3", "--N", "2", "--steps", "100", "--batches", "4"],
    ["sweep"],
    ["sweep", "--p", "0.3", "--Ns", "8,4"],
    ["theory", "--p", "0.3", "--bogus"],
    ["admissible", "--p", "0.25", "--m", "125", "--beta", "1"],
    ["checks", "--suite", "nope"],
    [],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(UsageError):
        parse_args(argv)
    assert main(argv) == 2
    assert "usage error" in capsys.readouterr().err


def test_seed_env(monkeypatch):
    monkeypatch.setenv("BRANCHSEL_SEED", "17")
    assert parse_args(["speed", "--p", "0.3", "--N", "2", "--steps", "100"]).seed == 17
    assert parse_args(["speed", "--p", "0.3", "--N", "2", "--steps", "100", "--seed", "3"]).seed == 3
    monkeypatch.delenv("BRANCHSEL_SEED")
    assert parse_args(["speed", "--p", "0.3", "--N", "2", "--steps", "100"]).seed == 0
    monkeypatch.setenv("BRANCHSEL_SEED", "x")
    with pytest.raises(UsageError):
        parse_args(["speed", "--p", "0.3", "--N", "2", "--steps", "100"])


def test_theory_json(capsys):
    d = run_json(capsys, ["theory", "--p", "0.25"])
    assert d["q"] == 5 and abs(d["v"] - 0.810710) < 1e-6 and abs(d["gamma"] - 0.077829) < 1e-6
    d = run_json(capsys, ["theory", "--p", "0.75"])
    assert d["v"] == 1.0 and d["q"] is None


def test_exact_json(capsys):
    d = run_json(capsys, ["exact", "--p", "0.25", "--N", "1"])
    assert d["v_N"] == pytest.approx(0.4375)
    assert main(["exact", "--p", "0.25", "--N", "9"]) == 3
    assert main(["exact", "--p", "0.25", "--N", "6", "--max-states", "3"]) == 3


def test_speed_json(capsys):
    d = run_json(capsys, ["speed", "--p", "0.25", "--N", "4", "--steps", "20000"])
    assert set(d) == SPEED_FIELDS
    assert (d["steps"] - d["burnin"]) % d["batches"] == 0
    assert main(["speed", "--p", "0.25", "--N", "4", "--steps", "20000", "--burnin", "3"]) == 2


def test_simulate_roundtrip(tmp_path, capsys):
    out = tmp_path / "t.csv"
    d = run_json(capsys, ["simulate", "--p", "0.4", "--N", "6", "--steps", "300",
                          "--record-every", "3", "--seed", "5", "--out", str(out)])
    traj = Trajectory.from_csv(out.read_text())
    assert d["records"] == len(traj.records) == 100 and traj.seed == 5
    assert d["max_diameter"] <= d["diameter_bound"]
    assert main(["simulate", "--p", "0.4", "--N", "6", "--steps", "10"]) == 0
    assert capsys.readouterr().out.startswith("# p=0.4")


def test_sweep_bytes_and_fit(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["sweep", "--p", "0.5", "--Ns", "8,16,32", "--steps", "20000", "--seed", "7",
            "--replicates", "2"]
    d = run_json(capsys, base + ["--out", str(a)])
    assert d["rows"] == 6 and d["seed"] == 7
    run_json(capsys, base + ["--out", str(b), "--jobs", "2"])
    assert a.read_bytes() == b.read_bytes()
    assert len(rows_from_csv(a.read_text())) == 6
    # three N cannot support a fit
    assert main(["fit", "--in", str(a), "--regime", "critical"]) == 4
    assert "noise floor" in capsys.readouterr().err


def test_fit_writes_plot(tmp_path, capsys):
    src = tmp_path / "s.csv"
    run_json(capsys, ["sweep", "--p", "0.5", "--Ns", "8,16,32,64", "--steps", "200000",
                      "--replicates", "1", "--seed", "1", "--out", str(src)])
    d = run_json(capsys, ["fit", "--in", str(src), "--regime", "critical"])
    assert set(d) >= {"regime", "slope", "intercept", "r2", "points", "band_ratio", "plot"}
    data = np.loadtxt(d["plot"])
    assert data.shape == (4, 2)
    assert main(["fit", "--in", str(tmp_path / "missing.csv"), "--regime", "critical"]) == 2


def test_admissible_json(tmp_path, capsys):
    dump = tmp_path / "nu.csv"
    d = run_json(capsys, ["admissible", "--p", "0.25", "--m", "125", "--A", "8",
                          "--dump-measures", str(dump)])
    assert d["admissible"] and d["tilted_cross_check"] <= 1e-9
    assert d["N"] == d["N_star"] and d["lemma_bound"] <= 1
    lines = dump.read_text().splitlines()
    assert lines[1] == "i,x,value" and lines[2] == "0,0,1.0"
    d = run_json(capsys, ["admissible", "--p", "0.25", "--m", "8", "--A", "4"])
    assert not d["admissible"] and d["certificate"] is None


def test_admissible_event_B(capsys):
    d = run_json(capsys, ["admissible", "--p", "0.25", "--m", "125", "--trials", "50"])
    assert d["event_B"]["consistent"] and d["event_B"]["trials"] == 50


def test_checks_suite(capsys):
    d = run_json(capsys, ["checks", "--suite", "monotone_path", "--suite", "hitting",
                          "--seed", "3"])
    assert d["passed"] and set(d["suites"]) == {"monotone_path", "hitting"}


def test_checks_failure_exit_code(monkeypatch, capsys):
    from branchsel import proof_checks
    monkeypatch.setitem(proof_checks.SUITES, "hitting", lambda seed: {"passed": False})
    assert main(["checks", "--suite", "hitting"]) == 1
    assert json.loads(capsys.readouterr().out)["passed"] is False


def test_internal_error_exit_code(monkeypatch, capsys):
    from branchsel import cli
    from branchsel.errors import InvariantViolation

    def boom(cmd):
        raise InvariantViolation("broken")
    monkeypatch.setitem(cli.COMMANDS, "theory", boom)
    assert main(["theory", "--p", "0.3"]) == 5


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "branchsel", "theory", "--p", "0.25"],
                       capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["q"] == 5
    r = subprocess.run([sys.executable, "-m", "branchsel", "speed", "--p", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 2
