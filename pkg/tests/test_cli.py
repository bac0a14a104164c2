import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from prescript_opt import experiment
from prescript_opt.cli import main
from prescript_opt.experiment import quick_config


def write_config(path, **overrides):
    path.write_text(json.dumps(quick_config(**overrides).to_dict()))
    return str(path)


@pytest.fixture(scope="module")
def quick_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = write_config(root / "cfg.json", instances=1)
    assert main(["run", "--config", cfg, "--out", str(root / "a")]) == 0
    return root, cfg


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    root = tmp_path_factory.mktemp("gen")
    cfg = write_config(root / "cfg.json")
    assert main(["generate", "--config", cfg, "--out", str(root / "inst")]) == 0
    assert main(["fit", "--config", cfg, "--train", str(root / "inst" / "train.csv"),
                 "--out", str(root / "model.json")]) == 0
    return root, cfg


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_expected_files(quick_run):
    root, _ = quick_run
    out = root / "a"
    for name in ("results.csv", "summary.csv", "timings.csv", "manifest.json"):
        assert (out / name).is_file()
    rows = read_csv(out / "results.csv")
    # one instance, two levels, four methods
    assert len(rows) == 8
    assert {r["status"] for r in rows} == {"ok"}
    assert all(r["wall_time_ms"] == "" for r in rows)
    assert len(list((out / "costs").iterdir())) == 8
    for r in rows:
        assert float(r["oos_pcr"]) <= 1.0
    summary = experiment.read_summary(out / "summary.csv")
    assert {(s.method, s.perturbation) for s in summary} == {
        (m, lvl) for m in ("cso", "drcso", "drcro", "drpcr") for lvl in (0.0, 0.6)}


def test_run_is_deterministic(quick_run):
    root, cfg = quick_run
    assert main(["run", "--config", cfg, "--out", str(root / "b")]) == 0
    assert (root / "a" / "results.csv").read_bytes() == (root / "b" / "results.csv").read_bytes()
    assert (root / "a" / "summary.csv").read_bytes() == (root / "b" / "summary.csv").read_bytes()


def test_evaluate_rechecks_run(quick_run, capsys):
    root, _ = quick_run
    assert main(["evaluate", "--run", str(root / "a")]) == 0
    assert capsys.readouterr().out.strip() == "ok"
    costs = sorted((root / "a" / "costs").iterdir())[0]
    assert main(["evaluate", "--costs", str(costs)]) == 0
    value = capsys.readouterr().out.strip()
    stored = {experiment.cost_file_name(r): r.oos_pcr
              for r in experiment.read_results(root / "a" / "results.csv")}
    assert float(value) == pytest.approx(stored[costs.name])


def test_evaluate_detects_tampering(quick_run, tmp_path):
    import shutil
    root, _ = quick_run
    copy = tmp_path / "copy"
    shutil.copytree(root / "a", copy)
    victim = sorted((copy / "costs").iterdir())[0]
    lines = victim.read_text().splitlines()
    parts = lines[1].split(",")
    parts[0] = repr(float(parts[0]) + 100.0)
    lines[1] = ",".join(parts)
    victim.write_text("\n".join(lines) + "\n")
    assert main(["evaluate", "--run", str(copy)]) == 1


def test_plot_from_summary(quick_run, tmp_path):
    root, _ = quick_run
    out = tmp_path / "s.svg"
    assert main(["plot", "--summary", str(root / "a" / "summary.csv"), "--out", str(out)]) == 0
    assert out.read_text().lstrip().startswith("<?xml")
    out2 = tmp_path / "b.svg"
    assert main(["plot", "--results", str(root / "a" / "results.csv"), "--out", str(out2)]) == 0


def test_generate_is_byte_identical(generated, tmp_path):
    root, cfg = generated
    assert main(["generate", "--config", cfg, "--out", str(tmp_path / "again")]) == 0
    for name in ("graph.json", "train.csv", "validation.csv", "test.csv", "manifest.json"):
        assert (root / "inst" / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_solve_drpcr_at_alpha_zero_matches_cso(generated, tmp_path):
    root, cfg = generated
    inst = root / "inst"
    common = ["--config", cfg, "--graph", str(inst / "graph.json"), "--train",
              str(inst / "train.csv"), "--model", str(root / "model.json"),
              "--data", str(inst / "test.csv")]
    assert main(["solve", *common, "--method", "cso", "--out", str(tmp_path / "cso.csv")]) == 0
    assert main(["solve", *common, "--method", "drpcr", "--alpha", "0",
                 "--out", str(tmp_path / "drpcr.csv")]) == 0
    assert main(["solve", *common, "--method", "drpcr", "--alpha", "0", "--nearest-policy",
                 "--out", str(tmp_path / "nearest.csv")]) == 0
    assert len(read_csv(tmp_path / "nearest.csv")) == len(read_csv(tmp_path / "drpcr.csv"))
    cso = np.array([float(r["objective"]) for r in read_csv(tmp_path / "cso.csv")])
    dr = np.array([float(r["objective"]) for r in read_csv(tmp_path / "drpcr.csv")])
    assert np.allclose(cso, dr, atol=1e-9)
    # the decision files feed back into evaluate
    assert main(["evaluate", "--graph", str(inst / "graph.json"), "--train",
                 str(inst / "train.csv"), "--data", str(inst / "test.csv"), "--decisions",
                 str(tmp_path / "cso.csv"), "--out", str(tmp_path / "triple.csv")]) == 0
    assert (tmp_path / "triple.csv").is_file()


def test_calibrate_writes_report(generated, tmp_path, capsys):
    root, cfg = generated
    inst = root / "inst"
    out = tmp_path / "report.csv"
    assert main(["calibrate", "--config", cfg, "--graph", str(inst / "graph.json"),
                 "--train", str(inst / "train.csv"), "--model", str(root / "model.json"),
                 "--validation", str(inst / "validation.csv"), "--method", "drcso",
                 "--alphas", "0,0.5", "--out", str(out)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["alpha_star"] in (0.0, 0.5)
    assert len(read_csv(out)) == 2


def test_usage_errors_exit_two(tmp_path, capsys):
    assert main(["fit", "--train", str(tmp_path / "missing.csv"), "--out",
                 str(tmp_path / "m.json")]) == 2
    assert "not found" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("z_1,c_1\n1.0,-3.0\n")
    assert main(["fit", "--train", str(bad), "--out", str(tmp_path / "m.json")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["solve", "--method", "nope"])
    assert info.value.code == 2


def test_jobs_environment_variable_wins(monkeypatch):
    monkeypatch.setenv(experiment.JOBS_ENV, "3")
    assert experiment.resolve_jobs(1) == 3
    monkeypatch.setenv(experiment.JOBS_ENV, "x")
    with pytest.raises(Exception):
        experiment.resolve_jobs(1)
    monkeypatch.delenv(experiment.JOBS_ENV)
    assert experiment.resolve_jobs(None) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "prescript_opt", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for command in ("run", "generate", "fit", "calibrate", "solve", "evaluate", "plot"):
        assert command in proc.stdout
