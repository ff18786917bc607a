import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from opengauge.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_simulate_weak_model_keeps_ON_zero(models_dir, tmp_path, capsys):
    out = tmp_path / "sim.csv"
    code, _, _ = run(["simulate", "--model", os.path.join(models_dir, "two_body_loss.lgm"), "--out", str(out)], capsys)
    assert code == 0
    rows = read_csv(out)
    assert float(rows[-1]["t"]) == pytest.approx(50.0)
    assert max(abs(float(r["ON_direct"])) for r in rows) < 1e-9
    summary = json.loads((tmp_path / "sim.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["N_drift"] > 0.1 and summary["ON_drift"] < 1e-9


def test_simulate_closed_keeps_N(models_dir, tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run(["simulate", "--model", os.path.join(models_dir, "hubbard_closed.lgm"), "--T", "2",
                      "--out", str(out)], capsys)
    assert code == 0
    N = np.array([float(r["N"]) for r in read_csv(out)])
    assert np.ptp(N) < 1e-10


def test_malformed_model(tmp_path, capsys):
    bad = tmp_path / "bad.lgm"
    bad.write_text("[lattice]\nsites = 2\n[dissipators]\nx: 0.1 * c(0,up) *\n")
    code, _, err = run(["simulate", "--model", str(bad)], capsys)
    assert code == 2
    assert ":4:" in err


def test_input_errors(models_dir, capsys):
    m = os.path.join(models_dir, "two_body_loss.lgm")
    assert run(["simulate", "--model", m, "--dt", "-1"], capsys)[0] == 2
    assert run(["simulate", "--model", m, "--gamma", "-0.5"], capsys)[0] == 2
    assert run(["simulate"], capsys)[0] == 2
    assert run(["bogus"], capsys)[0] == 2
    assert run(["simulate", "--model", "/nonexistent.lgm"], capsys)[0] == 2


@pytest.mark.parametrize("name, cls", [("two_body_loss", "Weak"), ("dephasing", "Strong"), ("pair_jump", "None")])
def test_classify(models_dir, capsys, name, cls):
    code, out, _ = run(["classify", "--model", os.path.join(models_dir, name + ".lgm"), "--T", "10"], capsys)
    rep = json.loads(out)
    assert rep["class"] == cls
    assert code == 0
    assert set(rep["simulation"]) >= {"N_drift", "ON_drift", "verdict"}


def test_bcs_without_loss(tmp_path, capsys):
    out = tmp_path / "b.csv"
    code, _, _ = run(["bcs", "--gamma", "0", "--T", "10", "--grid", "256", "--out", str(out)], capsys)
    assert code == 0
    d = np.array([float(r["absDelta"]) for r in read_csv(out)])
    assert np.ptp(d) < 1e-6


def test_wtcheck(capsys):
    code, out, _ = run(["wtcheck", "--samples", "1000", "--seed", "3"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["samples"] == 1000 and rep["max_residual"] < 1e-12 and rep["gauge_shift_max_delta"] < 1e-14


def test_ngmode_default(tmp_path, capsys):
    out = tmp_path / "ng.csv"
    code, _, _ = run(["ngmode", "--out", str(out)], capsys)
    rep = json.loads((tmp_path / "ng.json").read_text())
    assert rep["rel_err"]["v_s"] < 0.01
    assert set(rep) >= {"v_s_fit", "v_s_analytic", "D_fit", "D_analytic", "rel_err"}
    assert code == (0 if rep["rel_err"]["D"] < 0.1 else 1)
    assert read_csv(out)[0].keys() == {"q", "q0_root", "f_q", "D_est", "D_analytic"}


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"samples": 50, "seed": 9}))
    rep = json.loads(run(["wtcheck", "--config", str(cfg)], capsys)[1])
    assert rep["samples"] == 50 and rep["config"]["seed"] == 9
    rep = json.loads(run(["wtcheck", "--config", str(cfg), "--samples", "20"], capsys)[1])
    assert rep["samples"] == 20


def test_byte_identical_reruns(models_dir, tmp_path, capsys):
    m = os.path.join(models_dir, "two_body_loss.lgm")
    texts = []
    for _ in range(2):
        run(["simulate", "--model", m, "--T", "5", "--init", "generic", "--seed", "4",
             "--out", str(tmp_path / "r.csv")], capsys)
        texts.append(((tmp_path / "r.csv").read_bytes(), (tmp_path / "r.json").read_bytes()))
    assert texts[0] == texts[1]
    a = run(["wtcheck", "--samples", "100", "--seed", "1"], capsys)[1]
    b = run(["wtcheck", "--samples", "100", "--seed", "1"], capsys)[1]
    assert a == b


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "opengauge", "wtcheck", "--samples", "10"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["samples"] == 10
