import json
import math
import subprocess
import sys

import numpy as np
import pytest

from armle.asymptotics import fisher_info
from armle.cli import run


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_unknown_flag_and_missing_command_exit_1(capsys):
    assert _run(capsys, "estimate", "--bogus")[0] == 1
    assert _run(capsys, "frobnicate")[0] == 1
    assert _run(capsys)[0] == 1


def test_invalid_inputs_exit_1(capsys, tmp_path):
    code, _, err = _run(capsys, "fisher", "--theta", "1.0")
    assert code == 1 and "stability" in err
    assert _run(capsys, "simulate", "--theta", "0.5", "--n", "10", "--seed", "1", "--noise", "fgn:1.5")[0] == 1
    assert _run(capsys, "verify", "mle-vs-gls")[0] == 1
    out = tmp_path / "never.csv"
    assert _run(capsys, "simulate", "--theta", "x", "--n", "10", "--seed", "1", "--out", str(out))[0] == 1
    assert not out.exists()


def test_numerical_failure_exit_2(capsys, tmp_path):
    data = tmp_path / "zeros.csv"
    data.write_text("0\n" * 20)
    code, _, err = _run(capsys, "estimate", "--data", str(data), "--p", "1")
    assert code == 2 and "insufficient excitation" in err
    code, _, err = _run(capsys, "laplace", "--theta", "0.5,0.0", "--n", "8", "--mu", "0.1")
    assert code == 2 and "monte_carlo" in err


def test_simulate_and_estimate_round_trip(capsys, tmp_path):
    path = tmp_path / "x.csv"
    assert _run(capsys, "simulate", "--theta", "0.5,0.2", "--noise", "ma1:0.4", "--n", "300",
                "--seed", "7", "--out", str(path))[0] == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "n,eps,xi,x" and len(lines) == 301
    code, out, _ = _run(capsys, "estimate", "--data", str(path), "--p", "2", "--noise", "ma1:0.4", "--lse")
    doc = json.loads(out)
    assert code == 0
    assert {"theta_hat", "bracket", "loglik", "N", "p", "theta_lse", "noise"} <= set(doc)
    code, out, _ = _run(capsys, "estimate", "--theta", "0.5,0.2", "--noise", "ma1:0.4", "--n", "300", "--seed", "7")
    sim = json.loads(out)
    np.testing.assert_allclose(sim["theta_hat"], doc["theta_hat"], rtol=1e-12)
    assert "M" in sim and "theta_true" in sim


def test_fisher_and_laplace(capsys):
    code, out, _ = _run(capsys, "fisher", "--theta", "0.5")
    assert code == 0 and json.loads(out)["info"][0][0] == pytest.approx(1 / 0.75, rel=1e-15)
    code, out, _ = _run(capsys, "laplace", "--theta", "0.5", "--noise", "fgn:0.8", "--n", "16,64", "--mu-over-n")
    rows = out.strip().splitlines()
    assert code == 0 and rows[0] == "N,mu,L,target,method" and len(rows) == 3
    N, mu, L, target, method = rows[2].split(",")
    assert float(mu) == pytest.approx(1 / 64) and method == "explicit"
    assert float(target) == pytest.approx(math.exp(-0.5 * fisher_info([0.5]).info[0, 0]))
    code, out, _ = _run(capsys, "laplace", "--theta", "0.5", "--n", "16", "--mu", "0.1", "--method", "p1_closed_form")
    code2, out2, _ = _run(capsys, "laplace", "--theta", "0.5", "--n", "16", "--mu", "0.1")
    assert code == code2 == 0
    assert float(out.splitlines()[1].split(",")[2]) == pytest.approx(float(out2.splitlines()[1].split(",")[2]),
                                                                     rel=1e-12)


def test_verify_cholesky(capsys):
    code, out, _ = _run(capsys, "verify", "cholesky")
    assert code == 0 and "FAIL" not in out and "checks passed" in out


def test_help_documents_units_and_defaults():
    res = subprocess.run([sys.executable, "-m", "armle", "experiment", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    text = " ".join(res.stdout.split())
    for needle in ("default: 1", "at least 10p", "64-bit", "dimensionless", "fgn:H"):
        assert needle in text


def _experiment(tmp_path, name, threads, monkeypatch, capsys):
    d = tmp_path / name
    monkeypatch.setenv("ARMLE_OUTPUT_DIR", str(d))
    code = run(["experiment", "--theta", "0.3", "--noise", "fgn:0.7", "--n", "80", "--m", "150", "--seed", "5",
                "--estimators", "mle,lse", "--chunk", "16", "--threads", str(threads)])
    capsys.readouterr()
    assert code == 0
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_experiment_outputs_independent_of_threads(tmp_path, monkeypatch, capsys):
    a = _experiment(tmp_path, "a", 1, monkeypatch, capsys)
    b = _experiment(tmp_path, "b", 4, monkeypatch, capsys)
    assert sorted(a) == ["experiment.csv", "experiment.json", "experiment_hist.csv", "experiment_lse.csv"]
    assert a == b
    doc = json.loads(a["experiment.json"])
    assert doc["runtime_seconds"] is None and doc["config"]["M"] == 150
