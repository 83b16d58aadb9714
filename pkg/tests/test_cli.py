import json
import math
import subprocess
import sys

import numpy as np
import pytest

from netctrl.cli import main
from netctrl.experiments import read_csv_table
from netctrl.sysmodel import load_system, make_system, save_system


@pytest.fixture
def path_file(tmp_path):
    out = tmp_path / "path.json"
    assert main(["gen", "--graph", "path", "--n", "3", "--rho", "0.9", "--out", str(out)]) == 0
    return out


@pytest.fixture
def scalar_file(tmp_path):
    out = tmp_path / "scalar.json"
    save_system(make_system([[2.0]]), out)
    return out


def test_gen_path(path_file):
    sys = load_system(path_file)
    np.testing.assert_allclose(sys.A, 0.3 * np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]]))


def test_gen_er(tmp_path):
    out = tmp_path / "er.json"
    assert main(["gen", "--graph", "er", "--n", "30", "--p", "0.2", "--seed", "4", "--out", str(out)]) == 0
    assert load_system(out).spectral_radius == pytest.approx(1.0, abs=1e-10)


def test_gen_singular_path(tmp_path, caplog):
    out = tmp_path / "p.json"
    assert main(["gen", "--n", "50", "--out", str(out)]) == 1
    assert "singular" in caplog.text
    assert main(["gen", "--n", "50", "--allow-singular", "--out", str(out)]) == 0


def test_cost_json(scalar_file, capsys):
    assert main(["cost", "--system", str(scalar_file), "--actuators", "0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["P"][0] == pytest.approx(2 + math.sqrt(5), abs=1e-9)
    assert doc["trace"] == doc["lambda_max"] == doc["average"]
    assert doc["converged"] and doc["horizon"] == "infinite"


def test_cost_finite_horizon_csv(scalar_file, tmp_path):
    out = tmp_path / "cost.csv"
    assert main(["cost", "--system", str(scalar_file), "--actuators", "all", "--horizon", "2",
                 "--format", "csv", "--out", str(out)]) == 0
    meta, table = read_csv_table(out)
    assert meta["horizon"] == "2"
    assert table["p0"][0] == pytest.approx(4.0, abs=1e-12)


def test_cost_not_stabilizable(scalar_file, caplog):
    assert main(["cost", "--system", str(scalar_file), "--actuators", "none"]) == 1
    assert "stabilizable" in caplog.text


def test_bound_all(scalar_file, capsys):
    assert main(["bound", "--system", str(scalar_file), "--k", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["reports"]["unstable"]["bound"] == pytest.approx(0.75)
    assert doc["reports"]["symmetric"]["bound"] == pytest.approx(0.75)
    assert "stable" in doc["errors"]
    assert doc["hypotheses"]["detectable"] and doc["hypotheses"]["unstable"]


def test_bound_stable_csv(path_file, capsys):
    assert main(["bound", "--system", str(path_file), "--k", "1", "--which", "stable", "--empirical",
                 "--format", "csv"]) == 0
    text = capsys.readouterr().out
    assert "reports.stable.alpha" in text and "reports.stable.empirical_ratio" in text


def test_bound_inapplicable(path_file):
    assert main(["bound", "--system", str(path_file), "--k", "1", "--which", "unstable"]) == 1


@pytest.mark.parametrize("method,expected", [("greedy", [1]), ("antigreedy", [0])])
def test_select_greedy(path_file, capsys, method, expected):
    assert main(["select", "--system", str(path_file), "--k", "1", "--method", method]) == 0
    (res,) = json.loads(capsys.readouterr().out)
    assert res["subset"] == expected


def test_select_exhaustive_csv(path_file, capsys):
    assert main(["select", "--system", str(path_file), "--k", "1", "--method", "exhaustive", "--format", "csv"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if not l.startswith("#")]
    assert lines[0] == "method,subset,value,objective,feasible"
    assert lines[1].startswith("exhaustive_best,1,")


def test_select_random_deterministic(path_file, capsys):
    args = ["select", "--system", str(path_file), "--k", "2", "--method", "random", "--trials", "5", "--seed", "3"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first
    assert len(json.loads(first)["draws"]) == 5


def test_experiment(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 10, "rho_list": [0.9, 1.005], "m_list": [1, 2]}))
    assert main(["experiment", "fig1", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "2"]) == 0
    meta, table = read_csv_table(tmp_path / "o" / "fig1_costs.csv")
    assert meta["seed"] == "2" and len(table["trace"]) == 4
    assert main(["experiment", "fig1", "--config", str(cfg), "--out", str(tmp_path / "j"), "--format", "json"]) == 0
    assert json.loads((tmp_path / "j" / "fig1.json").read_text())["kind"] == "fig1"


def test_experiment_failed_cells_exit_code(tmp_path, monkeypatch):
    import netctrl.cli as cli
    from netctrl.experiments import run_experiment

    def flaky(cfg, n_jobs=1):
        res = run_experiment(cfg, n_jobs)
        res.failed_cells = 1
        return res

    monkeypatch.setattr(cli, "run_experiment", flaky)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 5, "m_list": [1], "rho_list": [0.9]}))
    assert main(["experiment", "fig1", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert (tmp_path / "fig1_costs.csv").exists()


def test_bad_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 10, "bogus": 1}))
    assert main(["experiment", "fig1", "--config", str(cfg)]) == 1
    assert main(["experiment", "fig1", "--config", str(tmp_path / "none.json")]) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "netctrl", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.startswith("netctrl ")
