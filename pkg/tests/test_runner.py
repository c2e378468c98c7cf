"""Experiment runner artifacts, sweeps, and the command line."""

import json
import subprocess
import sys

import numpy as np
import pytest

from bridgekit.cli import main
from bridgekit.config import parse_config
from bridgekit.datasets import GmmSpec, ManifoldSampler, StandardNormal
from bridgekit.errors import ConfigError
from bridgekit.network import load_checkpoint
from bridgekit.runner import (METRICS_SCHEMA_VERSION, build_problem,
                              build_settings, emit_plot_data, run_experiment,
                              run_sweep)


def tiny_config(out_dir, **ipf_overrides):
    ipf = {"iterations": 2, "steps": 15, "n_traj": 8, "n_steps": 10,
           "batch_points": 16, "buffer_capacity": 32}
    ipf.update(ipf_overrides)
    return parse_config({
        "ipf": ipf,
        "output": {"dir": str(out_dir), "eval_n": 16,
                   "dump_trajectories": True}})


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = tiny_config(out)
    return cfg, run_experiment(cfg), out


# --- problem / settings construction ----------------------------------------

def test_build_problem_gmm():
    cfg = parse_config({})
    problem = build_problem(cfg)
    assert problem.dim == 1
    assert isinstance(problem.pi0, GmmSpec)
    assert isinstance(problem.pi1, GmmSpec)
    np.testing.assert_array_equal(problem.pi1.means, [[-2.0], [2.0]])
    assert problem.sigma == 1.0
    assert problem.grid.n_steps == 100


def test_build_problem_manifold():
    cfg = parse_config({"problem": {"kind": "manifold_bridge",
                                    "parts": ["swiss_roll", "moons"]}})
    problem = build_problem(cfg)
    assert problem.dim == 5
    assert isinstance(problem.pi0, StandardNormal)
    assert isinstance(problem.pi1, ManifoldSampler)


def test_build_problem_csv_dimension_mismatch(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("1,2\n3,4\n")
    b.write_text("1\n2\n")
    cfg = parse_config({"problem": {"kind": "csv_bridge",
                                    "pi0_path": str(a),
                                    "pi1_path": str(b)}})
    with pytest.raises(ConfigError, match="disagree on dimension"):
        build_problem(cfg)
    b.write_text("5,6\n7,8\n")
    assert build_problem(cfg).dim == 2


def test_build_settings_maps_config():
    cfg = parse_config({"ipf": {"estimator": {"kind": "stein",
                                              "sigma_z": 0.2}},
                        "output": {"eval_n": 99}})
    settings = build_settings(cfg, threads=0)
    assert settings.estimator.kind == "stein"
    assert settings.estimator.sigma_z == 0.2
    assert settings.eval_n == 99
    assert settings.threads == 1
    assert build_settings(parse_config({})).estimator is None


# --- run_experiment artifacts -------------------------------------------------

def test_metrics_document_shape(tiny_run):
    cfg, metrics, out = tiny_run
    on_disk = json.loads((out / "metrics.json").read_text())
    assert on_disk == metrics
    assert metrics["schema_version"] == METRICS_SCHEMA_VERSION
    assert parse_config(metrics["config"]) == cfg
    assert len(metrics["records"]) == 4
    summary = metrics["summary"]
    f, b = summary["final_w1_forward"], summary["final_w1_backward"]
    assert summary["mean_w1"] == 0.5 * (f + b)
    assert summary["dim"] == 1
    assert summary["estimator"]["kind"] == "auto (dimension rule)"
    versions = summary["versions"]
    assert set(versions) == {"bridgekit", "numpy", "python",
                             "compiled_kernels"}
    assert isinstance(versions["compiled_kernels"], bool)


def test_checkpoints_reload(tiny_run):
    _, _, out = tiny_run
    for name in ("forward.npz", "backward.npz"):
        net = load_checkpoint(out / name)
        assert net.dim == 1
        y = net.evaluate(np.zeros((3, 1)), np.full(3, 0.5))
        assert y.shape == (3, 1)
        assert np.isfinite(y).all()


def test_trajectory_dump_toggle(tiny_run, tmp_path):
    _, _, out = tiny_run
    assert (out / "trajectories_forward.csv").exists()
    assert (out / "trajectories_backward.csv").exists()
    cfg = parse_config({"ipf": {"iterations": 1, "steps": 2, "n_traj": 4,
                                "n_steps": 5, "batch_points": 8,
                                "buffer_capacity": 8},
                        "output": {"dir": str(tmp_path), "eval_n": 4}})
    run_experiment(cfg)
    assert not (tmp_path / "trajectories_forward.csv").exists()


def test_metrics_deterministic_apart_from_wall_time(tiny_run, tmp_path):
    cfg, metrics, _ = tiny_run
    doc = cfg.to_dict()
    doc["output"]["dir"] = str(tmp_path)
    again = run_experiment(parse_config(doc))
    assert again["summary"] == metrics["summary"]
    for ra, rb in zip(again["records"], metrics["records"]):
        ra = dict(ra, wall_time_s=None)
        rb = dict(rb, wall_time_s=None)
        assert ra == rb


# --- plot data ------------------------------------------------------------------

def test_plot_data_idempotent_and_complete(tiny_run):
    _, metrics, out = tiny_run
    path = emit_plot_data(out)
    first = path.read_bytes()
    assert emit_plot_data(out).read_bytes() == first
    lines = first.decode().splitlines()
    assert lines[0] == "series,t,dim,value"
    series = {line.split(",")[0] for line in lines[1:]}
    assert {"w1_forward", "w1_backward", "loss_total",
            "forward_mean", "forward_p10", "forward_p90",
            "backward_mean", "backward_p10", "backward_p90"} <= series
    n_w1 = sum(1 for line in lines[1:] if line.startswith("w1_forward,"))
    assert n_w1 == len(metrics["records"])


def test_plot_data_multidim_series(tmp_path):
    cfg = parse_config({
        "problem": {"dim": 2,
                    "pi0": {"modes": [{"mean": [0.0, 0.0]}]},
                    "pi1": {"modes": [{"mean": [1.0, 1.0]}]}},
        "ipf": {"iterations": 1, "steps": 4, "n_traj": 6, "n_steps": 5,
                "batch_points": 8, "buffer_capacity": 16},
        "output": {"dir": str(tmp_path), "eval_n": 6,
                   "dump_trajectories": True}})
    run_experiment(cfg)
    lines = emit_plot_data(tmp_path).read_text().splitlines()
    dims = {line.split(",")[2] for line in lines[1:]
            if line.startswith("forward_mean,")}
    assert dims == {"1", "2"}


def test_plot_data_names_missing_artifacts(tiny_run, tmp_path):
    with pytest.raises(ConfigError, match="metrics.json"):
        emit_plot_data(tmp_path)
    _, _, out = tiny_run
    moved = out / "trajectories_forward.csv"
    backup = moved.read_bytes()
    moved.unlink()
    try:
        with pytest.raises(ConfigError, match="trajectories_forward.csv"):
            emit_plot_data(out)
    finally:
        moved.write_bytes(backup)


# --- sweeps ------------------------------------------------------------------------

def test_run_sweep_grid(tmp_path):
    cfg = tiny_config(tmp_path / "unused",
                      **{"iterations": 1, "steps": 3, "n_traj": 4,
                         "n_steps": 5, "batch_points": 8,
                         "buffer_capacity": 8})
    base = tmp_path / "sweep"
    rows = run_sweep(cfg, "ipf.seed=0,1;ipf.n_traj=4,6", base_dir=base)
    assert len(rows) == 4
    labels = [r["dir"] for r in rows]
    assert labels == ["seed-0_n_traj-4", "seed-0_n_traj-6",
                      "seed-1_n_traj-4", "seed-1_n_traj-6"]
    for row in rows:
        cell = base / row["dir"]
        assert (cell / "metrics.json").exists()
        assert np.isfinite(row["mean_w1"])
    csv_lines = (base / "sweep_summary.csv").read_text().splitlines()
    assert csv_lines[0] == "ipf.seed,ipf.n_traj,dir,final_w1_forward," \
                           "final_w1_backward,mean_w1"
    assert len(csv_lines) == 5
    loaded = json.loads((base / "sweep_summary.json").read_text())
    assert loaded == rows


def test_sweep_grid_spec_errors(tmp_path):
    cfg = tiny_config(tmp_path)
    with pytest.raises(ConfigError, match="bad grid axis"):
        run_sweep(cfg, "ipf.seed", base_dir=tmp_path)
    with pytest.raises(ConfigError, match="empty grid spec"):
        run_sweep(cfg, " ; ", base_dir=tmp_path)
    with pytest.raises(ConfigError, match="empty value"):
        run_sweep(cfg, "ipf.seed=0,,2", base_dir=tmp_path)
    with pytest.raises(ConfigError, match="not a config section"):
        run_sweep(cfg, "ipf.seed.deep=1", base_dir=tmp_path)


# --- command line -------------------------------------------------------------------

def write_cli_config(tmp_path):
    out = tmp_path / "run"
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(
        {"ipf": {"iterations": 1, "steps": 3, "n_traj": 4, "n_steps": 5,
                 "batch_points": 8, "buffer_capacity": 8},
         "output": {"dir": str(out), "eval_n": 4}}))
    return cfg_path, out


def test_cli_run_and_plotdata(tmp_path, capsys):
    cfg_path, out = write_cli_config(tmp_path)
    assert main(["run", str(cfg_path), "--threads", "1"]) == 0
    tail = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert tail["metrics"] == str(out / "metrics.json")
    assert np.isfinite(tail["final_w1_forward"])
    assert main(["plotdata", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["plot_data"] == \
        str(out / "plot_data.csv")


def test_cli_sweep(tmp_path, capsys):
    cfg_path, _ = write_cli_config(tmp_path)
    base = tmp_path / "cells"
    assert main(["sweep", str(cfg_path), "--grid", "ipf.seed=0,1",
                 "--base-dir", str(base), "--threads", "1"]) == 0
    echo = json.loads(capsys.readouterr().out)
    assert echo["cells"] == 2
    assert echo["summary"] == str(base / "sweep_summary.csv")


def test_cli_error_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"ipff": {}}')
    assert main(["run", str(bad)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "ConfigError"
    assert "ipff" in err["error"]["message"]
    assert main(["run", str(tmp_path / "nope.json")]) == 2
    capsys.readouterr()
    assert main(["plotdata", str(tmp_path)]) == 2
    capsys.readouterr()


def test_module_entry_point(tmp_path):
    cfg_path, out = write_cli_config(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "bridgekit", "run",
                           str(cfg_path), "--threads", "1"],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert (out / "metrics.json").exists()
