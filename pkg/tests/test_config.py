"""Config parsing: defaults, strict key checking, echo round-trips."""

import json

import pytest

from bridgekit.config import (EstimatorConfig, ExperimentConfig,
                              parse_config)
from bridgekit.errors import ConfigError


def test_empty_config_resolves_all_defaults():
    cfg = parse_config({})
    assert cfg.problem.kind == "gmm_bridge"
    assert cfg.problem.dim == 1
    assert cfg.problem.pi0.modes == (((0.0,), 1.0),)
    assert cfg.problem.pi1.modes == (((-2.0,), 1.0), ((2.0,), 1.0))
    assert cfg.ipf.iterations == 10
    assert cfg.ipf.steps == 1000
    assert cfg.ipf.n_traj == 128
    assert cfg.ipf.n_steps == 100
    assert cfg.ipf.dt == 0.01
    assert cfg.ipf.sigma == 1.0
    assert cfg.ipf.batch_points == 256
    assert cfg.ipf.buffer_capacity == 512
    assert cfg.ipf.lr_max == 1e-3 and cfg.ipf.lr_min == 1e-5
    assert cfg.ipf.estimator == EstimatorConfig("auto", 1, None)
    assert cfg.output.dir == "runs/bridge"
    assert cfg.output.eval_n == 512
    assert cfg.output.dump_trajectories is False


def test_sigma_defaults_to_inverse_horizon():
    cfg = parse_config({"ipf": {"n_steps": 50, "dt": 0.02}})
    assert cfg.ipf.sigma == 1.0
    cfg = parse_config({"ipf": {"sigma": 0.7}})
    assert cfg.ipf.sigma == 0.7


def test_grid_must_span_unit_interval():
    with pytest.raises(ConfigError, match=r"n_steps \* dt must equal 1"):
        parse_config({"ipf": {"n_steps": 100, "dt": 0.02}})


def test_unknown_keys_report_dotted_path():
    with pytest.raises(ConfigError, match="unknown key: ipff"):
        parse_config({"ipff": {}})
    with pytest.raises(ConfigError, match="unknown key: ipf.stepss"):
        parse_config({"ipf": {"stepss": 5}})
    with pytest.raises(ConfigError, match="unknown key: ipf.estimator.probe"):
        parse_config({"ipf": {"estimator": {"probe": 2}}})
    with pytest.raises(ConfigError, match="unknown key: problem.pi0.extra"):
        parse_config({"problem": {"pi0": {"modes": [{"mean": [0.0]}],
                                          "extra": 1}}})


def test_type_errors_name_the_path():
    with pytest.raises(ConfigError, match="ipf.steps: expected an integer"):
        parse_config({"ipf": {"steps": "many"}})
    with pytest.raises(ConfigError, match="ipf.seed: expected an integer"):
        parse_config({"ipf": {"seed": True}})  # bools are not integers here
    with pytest.raises(ConfigError,
                       match="output.dump_trajectories: expected a boolean"):
        parse_config({"output": {"dump_trajectories": 1}})
    with pytest.raises(ConfigError, match="problem.kind: expected a string"):
        parse_config({"problem": {"kind": 3}})
    with pytest.raises(ConfigError, match="ipf: expected an object"):
        parse_config({"ipf": [1, 2]})


def test_range_validation():
    for bad in ({"ipf": {"iterations": -1}},
                {"ipf": {"n_traj": 0}},
                {"ipf": {"dt": -0.01}},
                {"ipf": {"sigma": 0}},
                {"ipf": {"lr_min": 2e-3}},  # above the default lr_max
                {"ipf": {"estimator": {"probes": 0}}},
                {"ipf": {"estimator": {"sigma_z": -1.0}}},
                {"output": {"eval_n": 0}}):
        with pytest.raises(ConfigError):
            parse_config(bad)
    with pytest.raises(ConfigError, match="estimator.kind"):
        parse_config({"ipf": {"estimator": {"kind": "montecarlo"}}})


def test_gmm_boundary_validation():
    with pytest.raises(ConfigError, match="need either 'modes'"):
        parse_config({"problem": {"pi0": {}}})
    with pytest.raises(ConfigError, match="weights: expected 2 entries"):
        parse_config({"problem": {"pi0": {
            "modes": [{"mean": [0.0]}, {"mean": [1.0]}],
            "weights": [1.0]}}})
    with pytest.raises(ConfigError, match="weights: must sum to 1"):
        parse_config({"problem": {"pi0": {
            "modes": [{"mean": [0.0]}, {"mean": [1.0]}],
            "weights": [0.9, 0.9]}}})
    with pytest.raises(ConfigError, match="std: must be positive"):
        parse_config({"problem": {"pi0": {
            "modes": [{"mean": [0.0], "std": 0.0}]}}})
    with pytest.raises(ConfigError, match="inconsistent dimension"):
        parse_config({"problem": {"pi0": {
            "modes": [{"mean": [0.0]}, {"mean": [1.0, 2.0]}]}}})


def test_dim_inference_rules():
    # explicit modes fix the dimension when dim is omitted
    cfg = parse_config({"problem": {
        "pi0": {"modes": [{"mean": [0.0, 0.0]}]},
        "pi1": {"modes": [{"mean": [1.0, 1.0]}]}}})
    assert cfg.problem.dim == 2
    # random modes give no dimension hint
    with pytest.raises(ConfigError, match="dim: required"):
        parse_config({"problem": {"pi0": {"random_modes": 3}}})
    with pytest.raises(ConfigError, match="expected 2 entries, got 1"):
        parse_config({"problem": {"dim": 2,
                                  "pi0": {"modes": [{"mean": [0.0]}]}}})
    with pytest.raises(ConfigError, match="pi1: required when dim > 1"):
        parse_config({"problem": {"dim": 3, "pi0": {"random_modes": 2}}})
    # omitted pi0 becomes a standard normal of the right dimension
    cfg = parse_config({"problem": {
        "dim": 2, "pi1": {"modes": [{"mean": [1.0, 1.0]}]}}})
    assert cfg.problem.pi0.modes == (((0.0, 0.0), 1.0),)


def test_manifold_problem():
    cfg = parse_config({"problem": {"kind": "manifold_bridge",
                                    "parts": ["swiss_roll", "moons"],
                                    "pad_to": 8, "noise_std": 0.1}})
    assert cfg.problem.dim == 8
    assert cfg.problem.parts == ("swiss_roll", "moons")
    with pytest.raises(ConfigError, match=r"parts\[1\]"):
        parse_config({"problem": {"kind": "manifold_bridge",
                                  "parts": ["moons", "torus"]}})
    with pytest.raises(ConfigError, match="below the concatenated width"):
        parse_config({"problem": {"kind": "manifold_bridge",
                                  "parts": ["swiss_roll"], "pad_to": 2}})
    with pytest.raises(ConfigError, match="noise_std"):
        parse_config({"problem": {"kind": "manifold_bridge",
                                  "noise_std": -0.5}})


def test_csv_problem_requires_paths():
    with pytest.raises(ConfigError, match="pi0_path: required"):
        parse_config({"problem": {"kind": "csv_bridge",
                                  "pi1_path": "b.csv"}})
    cfg = parse_config({"problem": {"kind": "csv_bridge",
                                    "pi0_path": "a.csv",
                                    "pi1_path": "b.csv"}})
    assert cfg.problem.normalize is True


ECHO_CASES = [
    {},
    {"problem": {"pi0": {"modes": [{"mean": [0.0], "std": 2.0}]},
                 "pi1": {"modes": [{"mean": [-1.0]}, {"mean": [1.0]}],
                         "weights": [0.3, 0.7]}},
     "ipf": {"n_steps": 40, "dt": 0.025, "sigma": 0.5,
             "estimator": {"kind": "stein", "sigma_z": 0.1}}},
    {"problem": {"dim": 4, "pi0": {"random_modes": 2, "spec_seed": 9},
                 "pi1": {"random_modes": 3, "mean_range": [-1.0, 1.0],
                         "std": 0.5}}},
    {"problem": {"kind": "manifold_bridge", "parts": ["s_curve"],
                 "pad_to": 5}},
    {"problem": {"kind": "csv_bridge", "pi0_path": "x.csv",
                 "pi1_path": "y.csv", "normalize": False},
     "output": {"dir": "out", "eval_n": 64, "dump_trajectories": True}},
]


@pytest.mark.parametrize("raw", ECHO_CASES)
def test_echo_round_trip(raw):
    cfg = parse_config(raw)
    echoed = parse_config(cfg.to_dict())
    assert echoed == cfg
    assert isinstance(cfg, ExperimentConfig)
    json.dumps(cfg.to_dict())  # echo must be JSON-serializable


def test_parse_from_json_text_and_file(tmp_path):
    text = '  {"ipf": {"iterations": 3}}'
    assert parse_config(text).ipf.iterations == 3
    path = tmp_path / "cfg.json"
    path.write_text('{"ipf": {"iterations": 4}}')
    assert parse_config(str(path)).ipf.iterations == 4
    assert parse_config(path).ipf.iterations == 4
    with pytest.raises(ConfigError, match="not found"):
        parse_config(str(tmp_path / "missing.json"))
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config('{"ipf": ')
