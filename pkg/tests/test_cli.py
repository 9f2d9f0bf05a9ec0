import json
import subprocess
import sys

import pytest

from dol.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_roots_csv(capsys):
    code, out, _ = run(capsys, "roots", "--mu", "0", "--beta", "0.1", "--kmax", "1")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "k,re,im,residual"
    assert len(lines) == 4  # two real roots + strip 1
    assert float(lines[1].split(",")[1]) == pytest.approx(-0.111833, abs=1e-6)


def test_roots_json(capsys):
    code, out, _ = run(capsys, "roots", "--beta", "2", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["schema"] == "dol/1" and len(data["roots"]) == 4


def test_roots_missing_beta(capsys):
    code, _, err = run(capsys, "roots")
    assert code == 1 and "beta" in err


def test_simulate_csv(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    code, _, _ = run(capsys, "simulate", "--model", "tanh:1", "--phi", "const:1",
                     "--T", "2", "--stride", "1", "--out", str(out))
    rows = out.read_text().splitlines()
    assert code == 0 and rows[0] == "t,x,dxdt" and len(rows) == 5


def test_classify_json(capsys):
    code, out, _ = run(capsys, "classify", "--phi", "const:0.5", "--horizon", "20")
    v = json.loads(out)
    assert code == 0 and v["schema"] == "dol/1"
    assert v["kind"] == "eventually_slow" and v["entry_time"] == 1.0


def test_monotone(capsys):
    code, out, _ = run(capsys, "monotone-test", "--phi", "lin:1,0.5", "--T", "10")
    assert code == 0 and json.loads(out)["first_violation"] is None
    code, out, _ = run(capsys, "monotone-test", "--phi", "sin:3,1", "--phitilde", "sin:3,1",
                       "--T", "5")
    assert code == 0 and set(json.loads(out)["verdicts"]) == {"equal"}


def test_ratio(capsys):
    code, out, _ = run(capsys, "ratio", "--T", "10")
    assert code == 0 and out.startswith("t,ratio,flagged")


def test_sweep_and_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"count": 3, "horizon": 30, "rerun-horizon": 60, "seed": 4}))
    code, out, _ = run(capsys, "sweep", "--config", str(cfg))
    rep = json.loads(out)
    assert code == 0 and rep["count"] == 3 and rep["seed"] == 4
    # explicit flags win over config values
    code, out, _ = run(capsys, "sweep", "--config", str(cfg), "--count", "2")
    assert json.loads(out)["count"] == 2


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "classify", "--config", str(cfg))
    assert code == 1 and "bogus" in err


def test_perturb_with_list_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epsilons": [0.01, 0.1], "horizon": 100}))
    code, out, _ = run(capsys, "perturb", "--config", str(cfg))
    rep = json.loads(out)
    assert code == 0 and rep["epsilons"] == [0.01, 0.1]


def test_kappa(capsys):
    code, out, _ = run(capsys, "kappa", "--model", "tanh:2")
    rep = json.loads(out)
    assert code == 0 and rep["kappa_hat"] > 0 and rep["kappa_safe"] == rep["kappa_hat"] / 2


def test_bad_model(capsys):
    code, _, err = run(capsys, "classify", "--model", "cubic:1")
    assert code == 1 and "family" in err


def test_run_exit_codes(capsys, tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"experiment": "density", "model": "tanh:2", "count": 2,
                                "horizon": 20}))
    assert main(["run", str(good), "--outdir", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / "report.json").exists()
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    assert main(["run", str(bad), "--outdir", str(tmp_path / "b")]) == 1
    viol = tmp_path / "viol.json"
    viol.write_text(json.dumps({"experiment": "dissipativity", "model": "tanh:1",
                                "phi": "const:5", "T": 10, "burn": 0, "tolerance": 0}))
    assert main(["run", str(viol), "--outdir", str(tmp_path / "c")]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "dol", "roots", "--beta", "1.5707963267948966",
                          "--kmax", "1"], capture_output=True, text=True)
    assert res.returncode == 0
    k0 = res.stdout.splitlines()[1].split(",")
    assert abs(float(k0[1])) < 1e-12 and float(k0[2]) == pytest.approx(1.5707963267948966)
