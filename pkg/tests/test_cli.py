import json

import pytest

from cmdplab.cli import main
from cmdplab.core_mdp import t1_cmdp
from cmdplab.model_io import save_cmdp


@pytest.fixture
def t1_file(tmp_path):
    path = tmp_path / "t1.json"
    save_cmdp(path, t1_cmdp())
    return path


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_solve(capsys, t1_file):
    rc, out, _ = run(capsys, "solve", "--model", t1_file)
    d = json.loads(out)
    assert rc == 0
    assert d["optimal_value"] == pytest.approx(0.2, abs=1e-9)
    assert d["lambda_star"] == pytest.approx(2.0, abs=1e-9)
    assert d["slater_constant"] == pytest.approx(0.1, abs=1e-9)


def test_solve_bad_file_exits_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"gamma": 0.5}')
    rc, _, err = run(capsys, "solve", "--model", bad)
    assert rc == 2 and "missing required field" in err


def test_sample_then_run_pd(capsys, tmp_path, t1_file):
    emp = tmp_path / "emp.json"
    rc, out, _ = run(capsys, "--seed", 3, "sample", "--model", t1_file, "--n", 50, "--out", emp)
    assert rc == 0 and json.loads(out)["queries"] == 200
    res = tmp_path / "res.json"
    rc, _, _ = run(capsys, "run-pd", "--emp", emp, "--mode", "manual", "--U", 10, "--eps-net", 0.01,
                   "--T", 500, "--eta", 0.1, "--out", res)
    d = json.loads(res.read_text())
    assert rc == 0
    assert d["config"]["T"] == 500 and len(d["trace"]["lambdas"]) == 500
    assert sum(m["weight"] for m in d["mixture"]) == pytest.approx(1.0)


def test_run_pd_preset_with_cap(capsys, tmp_path, t1_file):
    emp = tmp_path / "emp.json"
    run(capsys, "sample", "--model", t1_file, "--n", 100, "--mode", "relaxed", "--epsilon", 1.0,
        "--out", emp)
    res = tmp_path / "res.json"
    rc, _, err = run(capsys, "run-pd", "--emp", emp, "--mode", "relaxed", "--epsilon", 1.0,
                     "--t-cap", 5000, "--no-trace", "--out", res)
    d = json.loads(res.read_text())
    assert rc == 0 and d["config"]["T"] == 5000 and d["config"]["capped"]
    assert "lambdas" not in d["trace"]


def test_missing_epsilon(capsys, tmp_path, t1_file):
    rc, _, err = run(capsys, "sample", "--model", t1_file, "--n", 10, "--mode", "strict")
    assert rc == 2 and "--epsilon" in err


def test_manual_mode_requires_fields(capsys, tmp_path, t1_file):
    emp = tmp_path / "emp.json"
    run(capsys, "sample", "--model", t1_file, "--n", 10, "--out", emp)
    rc, _, err = run(capsys, "run-pd", "--emp", emp, "--mode", "manual", "--U", 1)
    assert rc == 2 and "--eps-net" in err


def test_hard_instance_report_and_file(capsys, tmp_path):
    rc, out, _ = run(capsys, "hard-instance", "--m", 1, "--gamma", 0.9, "--zeta", 0.2, "--report")
    d = json.loads(out)
    assert rc == 0 and d["valid"] and d["v_alt"] > d["v_null"]
    model = tmp_path / "h.json"
    rc, _, _ = run(capsys, "hard-instance", "--m", 1, "--gamma", 0.9, "--zeta", 0.2, "--variant", "1,0",
                   "--out", model)
    assert rc == 0 and len(json.loads(model.read_text())["rho"]) == 11


def test_hard_instance_invalid(capsys):
    rc, _, err = run(capsys, "hard-instance", "--m", 1, "--gamma", 0.3, "--zeta", 0.2)
    assert rc == 2 and "gamma >=" in err


def test_estimate_zeta_exit_codes(capsys, t1_file):
    rc, out, _ = run(capsys, "estimate-zeta", "--model", t1_file)
    assert rc == 0 and json.loads(out)["zeta_hat"] == pytest.approx(0.1)
    rc, out, _ = run(capsys, "estimate-zeta", "--model", t1_file, "--b", 1.0, "--max-rounds", 2)
    assert rc == 3 and not json.loads(out)["halted"]


def test_sweep_and_plot(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mode": "relaxed", "model": {"kind": "t1"}, "n_schedule": [100, 400],
                               "seeds": [0, 1], "epsilon": 1.0, "t_cap": 5000}))
    rc, out, _ = run(capsys, "--out-dir", tmp_path, "sweep", "--config", cfg)
    d = json.loads(out)
    assert rc == 0 and len(d["summary"]) == 2
    rc, out, _ = run(capsys, "--out-dir", tmp_path, "plot", "--csv", tmp_path / "sweep.csv")
    assert rc == 0 and (tmp_path / "sweep.svg").exists()


def test_sweep_bad_config(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{nope")
    rc, _, _ = run(capsys, "sweep", "--config", cfg)
    assert rc == 2
