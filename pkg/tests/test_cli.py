import csv
import json

import pytest

from treebvm.cli import main
from treebvm.config import content_hash, resolve, validate


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


SMALL = {
    "dataset": {"family": "lipschitz", "n": 128, "seed": 3},
    "sampler": {"iterations": 700, "burn_in": 100},
}


def with_experiment(**exp):
    cfg = json.loads(json.dumps(SMALL))
    cfg["experiment"] = exp
    return cfg


def report(out):
    return json.loads((out / "report.json").read_text())


def test_bvm_run(tmp_path):
    out = tmp_path / "bvm"
    cfg = with_experiment(mode="bvm", centering_mode="global_psi_n")
    code = main(["run", write(tmp_path, cfg), "--out", str(out)])
    rep = report(out)
    assert code in (0, 3)
    assert rep["mode"] == "bvm" and {"ks_stat", "w1_stat", "V0"} <= set(rep["result"])
    assert rep["result"]["V0"] == 1.0
    assert (code == 3) == rep["result"]["inconclusive"]
    assert rep["input_hash"] == content_hash(rep["config"])
    assert (out / "tau_hist.csv").exists() and (out / "tau_qq.csv").exists()


def test_missing_required_field(tmp_path, capsys):
    cfg = with_experiment(mode="coverage", n_reps=3)
    assert main(["coverage", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2
    assert "experiment.nominal_level" in capsys.readouterr().err


def test_override_recorded(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", write(tmp_path, SMALL), "--set", "dataset.seed=7", "--out", str(out)]) == 0
    rep = report(out)
    assert rep["config"]["dataset"]["seed"] == 7
    rows = list(csv.reader((out / "dataset.csv").open()))
    assert len(rows) == 129


def test_reports_reproducible(tmp_path):
    cfg = write(tmp_path, SMALL)
    for name in ("a", "b"):
        assert main(["sample", cfg, "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "draws.csv").read_bytes() == (tmp_path / "b" / "draws.csv").read_bytes()


def test_sample_with_forests(tmp_path):
    out = tmp_path / "s"
    cfg = write(tmp_path, SMALL)
    assert main(["sample", cfg, "--set", "experiment.keep_forests=true", "--set", "prior.n_trees=2",
                 "--out", str(out)]) == 0
    lines = (out / "forests.jsonl").read_text().splitlines()
    assert len(lines) == 600 and len(json.loads(lines[0])["trees"]) == 2


def test_validate_messages(tmp_path, capsys):
    assert main(["validate", write(tmp_path, SMALL)]) == 0
    assert "config is valid" in capsys.readouterr().out
    bad = json.loads(json.dumps(SMALL))
    bad["weight"] = {"gamma": 1.5}
    assert main(["validate", write(tmp_path, bad)]) == 2
    assert "gamma must lie in (0,1]" in capsys.readouterr().out
    bad = json.loads(json.dumps(SMALL))
    bad["prior"] = {"leaf": {"kind": "laplace_scaled"}}
    bad["experiment"] = {"c_lambda": 0}
    assert main(["validate", write(tmp_path, bad)]) == 2
    assert "c_lambda must be positive" in capsys.readouterr().out


def test_validate_cross_field():
    assert validate({"sampler": {"iterations": 10, "burn_in": 10}})
    assert validate({"dataset": {"n": -1}})
    assert validate({"bogus": {}})
    assert validate({"dataset": 3})
    assert validate({}, "sample") == []
    assert resolve({}, "sample")["prior"]["n_trees"] == 1


def test_io_error(tmp_path):
    assert main(["sample", str(tmp_path / "missing.json")]) == 1
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["validate", str(tmp_path / "broken.json")]) == 2


def test_selfsim_regularity_concentration(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "ss"
    assert main(["selfsim", cfg, "--set", "experiment.M=0.01", "--set", "experiment.D=0.3",
                 "--set", "experiment.partition_budget=5", "--out", str(out)]) == 0
    res = report(out)["result"]
    assert res["tested_partitions"] > 0 and isinstance(res["verdict"], bool)
    out = tmp_path / "reg"
    assert main(["regularity", cfg, "--set", "experiment.max_depth_s=4", "--set", "experiment.M=4",
                 "--out", str(out)]) == 0
    assert report(out)["result"]["regular"] is True
    out = tmp_path / "conc"
    code = main(["concentration", cfg, "--set", "experiment.grid_of_n=[64,128]",
                 "--set", "prior.leaf={\"kind\":\"laplace_scaled\"}", "--out", str(out)])
    assert code in (0, 3)
    assert len(list(csv.DictReader((out / "concentration.csv").open()))) == 2


def test_coverage_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("TREEBVM_THREADS", "2")
    cfg = with_experiment(mode="coverage", nominal_level=0.9, n_reps=2)
    out = tmp_path / "cov"
    assert main(["run", write(tmp_path, cfg), "--out", str(out)]) in (0, 3)
    res = report(out)["result"]
    assert res["n_reps"] == 2 and 0 <= res["hits"] <= 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "treebvm" in capsys.readouterr().out
