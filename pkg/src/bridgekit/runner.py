"""Experiment runner: build the problem, run IPF, write artifacts.

A run directory holds metrics.json (schema versioned, config echo
included), forward/backward network checkpoints, and optional
trajectory CSVs.  ``emit_plot_data`` condenses those artifacts into one
long-format CSV for external plotting; ``run_sweep`` fans a config out
over a parameter grid and writes one run directory per cell plus a
combined summary table.
"""

from __future__ import annotations

import csv
import itertools
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import COMPILED
from .config import ExperimentConfig, parse_config
from .datasets import (GmmSpec, ManifoldSampler, StandardNormal, load_csv,
                       random_gmm_spec)
from .errors import ConfigError
from .ipf import BridgeProblem, IpfSettings, run_ipf
from .losses import TraceEstimator
from .network import save_checkpoint
from .sde import TimeGrid, _philox, derive_seed, write_trajectory_csv

__all__ = ["build_problem", "build_settings", "run_experiment",
           "emit_plot_data", "run_sweep", "METRICS_SCHEMA_VERSION"]

METRICS_SCHEMA_VERSION = 1


def _boundary_sampler(boundary, dim: int):
    if boundary.modes is not None:
        means = np.array([mean for mean, _ in boundary.modes],
                         dtype=np.float64)
        stds = np.array([std for _, std in boundary.modes], dtype=np.float64)
        k = len(boundary.modes)
        weights = np.asarray(boundary.weights, dtype=np.float64) \
            if boundary.weights is not None else np.full(k, 1.0 / k)
        return GmmSpec(means=means, stds=stds, weights=weights)
    rng = _philox(derive_seed(boundary.spec_seed, 7))
    return random_gmm_spec(dim, boundary.random_modes, rng,
                           mean_low=boundary.mean_range[0],
                           mean_high=boundary.mean_range[1],
                           std=boundary.std)


def build_problem(cfg: ExperimentConfig) -> BridgeProblem:
    """Materialize boundary samplers and the time grid from a config."""
    p = cfg.problem
    if p.kind == "gmm_bridge":
        pi0 = _boundary_sampler(p.pi0, p.dim)
        pi1 = _boundary_sampler(p.pi1, p.dim)
        dim = p.dim
    elif p.kind == "manifold_bridge":
        pi1 = ManifoldSampler(parts=p.parts, noise_std=p.noise_std,
                              pad_to=p.pad_to)
        pi0 = StandardNormal(pi1.dim)
        dim = pi1.dim
    else:
        pi0 = load_csv(p.pi0_path, normalize=p.normalize)
        pi1 = load_csv(p.pi1_path, normalize=p.normalize)
        if pi0.dim != pi1.dim:
            raise ConfigError(
                f"csv boundaries disagree on dimension: {p.pi0_path} has "
                f"{pi0.dim}, {p.pi1_path} has {pi1.dim}")
        dim = pi0.dim
    grid = TimeGrid(cfg.ipf.n_steps, cfg.ipf.dt)
    return BridgeProblem(dim=dim, pi0=pi0, pi1=pi1, sigma=cfg.ipf.sigma,
                         grid=grid)


def build_settings(cfg: ExperimentConfig, threads: int = 1) -> IpfSettings:
    est_cfg = cfg.ipf.estimator
    estimator = None if est_cfg.kind == "auto" else TraceEstimator(
        kind=est_cfg.kind, probes=est_cfg.probes, sigma_z=est_cfg.sigma_z)
    return IpfSettings(iterations=cfg.ipf.iterations, steps=cfg.ipf.steps,
                       n_traj=cfg.ipf.n_traj,
                       batch_points=cfg.ipf.batch_points,
                       buffer_capacity=cfg.ipf.buffer_capacity,
                       lr_max=cfg.ipf.lr_max, lr_min=cfg.ipf.lr_min,
                       estimator=estimator, eval_n=cfg.output.eval_n,
                       seed=cfg.ipf.seed, threads=max(1, threads))


def _summary(records: list[dict], cfg: ExperimentConfig,
             settings: IpfSettings, dim: int) -> dict:
    final_f = records[-1]["w1_forward_end"] if records else None
    final_b = records[-1]["w1_backward_end"] if records else None
    mean_w1 = 0.5 * (final_f + final_b) if records else None
    est = settings.estimator
    est_echo = {"kind": "auto (dimension rule)", "probes": None,
                "sigma_z": None}
    if est is not None:
        est_echo = {"kind": est.kind, "probes": est.probes,
                    "sigma_z": est.sigma_z}
    return {"final_w1_forward": final_f, "final_w1_backward": final_b,
            "mean_w1": mean_w1, "dim": dim, "estimator": est_echo,
            "versions": {"bridgekit": __version__,
                         "numpy": np.__version__,
                         "python": platform.python_version(),
                         "compiled_kernels": COMPILED}}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Run one configured bridge and write its artifacts.

    Writes metrics.json, forward.npz / backward.npz checkpoints, and
    (when enabled) trajectories_forward.csv / trajectories_backward.csv
    into the configured output directory.  Returns the metrics document.
    """
    out_dir = Path(cfg.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg)
    settings = build_settings(cfg, threads)
    solution = run_ipf(problem, settings)

    records = [rec.to_json_dict() for rec in solution.history]
    metrics = {"schema_version": METRICS_SCHEMA_VERSION,
               "config": cfg.to_dict(), "records": records,
               "summary": _summary(records, cfg, settings, problem.dim)}
    (out_dir / "metrics.json").write_text(
        json.dumps(metrics, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    save_checkpoint(solution.forward, out_dir / "forward.npz")
    save_checkpoint(solution.backward, out_dir / "backward.npz")
    if cfg.output.dump_trajectories:
        n = settings.n_traj
        fwd = solution.sample_forward(n, derive_seed(settings.seed, 300))
        bwd = solution.sample_backward(n, derive_seed(settings.seed, 301))
        write_trajectory_csv(fwd, out_dir / "trajectories_forward.csv")
        write_trajectory_csv(bwd, out_dir / "trajectories_backward.csv")
    return metrics


def _read_trajectory_csv(path: Path):
    """Load (t values sorted, data keyed by t as (n_traj, D) arrays)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(c) for c in row] for row in reader if row]
    dim = len(header) - 3
    arr = np.asarray(rows, dtype=np.float64)
    by_t = {}
    for t in np.unique(arr[:, 2]):
        by_t[float(t)] = arr[arr[:, 2] == t, 3:3 + dim]
    return sorted(by_t), by_t


def emit_plot_data(run_dir) -> Path:
    """Write plot_data.csv: long-format (series, t, dim, value) rows.

    Metric series (w1_forward, w1_backward, loss_total) use the
    half-bridge index as t and dim 0.  Trajectory series (mean, p10,
    p90 per dimension) use physical time; backward trajectories are
    mapped onto the forward clock as t = 1 - tau.  Re-running over the
    same artifacts reproduces the file byte for byte.
    """
    run_dir = Path(run_dir)
    metrics_path = run_dir / "metrics.json"
    expected = [metrics_path]
    dump = False
    if metrics_path.exists():
        doc = json.loads(metrics_path.read_text(encoding="utf-8"))
        dump = doc["config"]["output"]["dump_trajectories"]
        if dump:
            expected += [run_dir / "trajectories_forward.csv",
                         run_dir / "trajectories_backward.csv"]
    missing = [p.name for p in expected if not p.exists()]
    if missing:
        raise ConfigError(
            f"missing artifacts in {run_dir}: " + ", ".join(missing))

    out_rows: list[tuple[str, float, int, float]] = []
    for i, rec in enumerate(doc["records"], start=1):
        out_rows.append(("w1_forward", float(i), 0, rec["w1_forward_end"]))
        out_rows.append(("w1_backward", float(i), 0, rec["w1_backward_end"]))
        if rec["final_loss"] is not None:
            out_rows.append(("loss_total", float(i), 0,
                             rec["final_loss"]["total"]))
    if dump:
        for direction in ("forward", "backward"):
            ts, by_t = _read_trajectory_csv(
                run_dir / f"trajectories_{direction}.csv")
            for tau in ts:
                t_phys = tau if direction == "forward" else 1.0 - tau
                block = by_t[tau]
                mean = block.mean(axis=0)
                p10 = np.percentile(block, 10, axis=0)
                p90 = np.percentile(block, 90, axis=0)
                for d in range(block.shape[1]):
                    out_rows.append((f"{direction}_mean", t_phys, d + 1,
                                     float(mean[d])))
                    out_rows.append((f"{direction}_p10", t_phys, d + 1,
                                     float(p10[d])))
                    out_rows.append((f"{direction}_p90", t_phys, d + 1,
                                     float(p90[d])))

    out_path = run_dir / "plot_data.csv"
    lines = ["series,t,dim,value"]
    lines += [f"{s},{t!r},{d},{v!r}" for s, t, d, v in out_rows]
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out_path


def _parse_grid_spec(spec: str) -> list[tuple[str, list]]:
    axes = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        path, sep, values = part.partition("=")
        path = path.strip()
        if not sep or not path:
            raise ConfigError(
                f"bad grid axis {part!r}; expected path=v1,v2,...")
        vals = []
        for tok in values.split(","):
            tok = tok.strip()
            if not tok:
                raise ConfigError(f"grid axis {path!r} has an empty value")
            try:
                vals.append(json.loads(tok))
            except json.JSONDecodeError:
                vals.append(tok)
        axes.append((path, vals))
    if not axes:
        raise ConfigError("empty grid spec")
    return axes


def _set_path(tree: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = tree
    for key in keys[:-1]:
        nxt = node.setdefault(key, {})
        if not isinstance(nxt, dict):
            raise ConfigError(
                f"grid path {dotted!r}: {key!r} is not a config section")
        node = nxt
    node[keys[-1]] = value


def run_sweep(cfg: ExperimentConfig, grid_spec: str, base_dir=None,
              threads: int = 1) -> list[dict]:
    """Run a config over a grid like "ipf.seed=0,1,2;ipf.n_traj=32,128".

    Each cell runs in its own subdirectory of ``base_dir`` (default:
    the config's output dir).  Writes sweep_summary.csv and
    sweep_summary.json next to the cells and returns the summary rows.
    """
    axes = _parse_grid_spec(grid_spec)
    base = Path(base_dir) if base_dir is not None else Path(cfg.output.dir)
    base.mkdir(parents=True, exist_ok=True)
    rows = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        tree = cfg.to_dict()
        label = "_".join(f"{path.rsplit('.', 1)[-1]}-{val}"
                         for (path, _), val in zip(axes, combo))
        for (path, _), val in zip(axes, combo):
            _set_path(tree, path, val)
        _set_path(tree, "output.dir", str(base / label))
        metrics = run_experiment(parse_config(tree), threads=threads)
        row = {path: val for (path, _), val in zip(axes, combo)}
        row["dir"] = label
        row["final_w1_forward"] = metrics["summary"]["final_w1_forward"]
        row["final_w1_backward"] = metrics["summary"]["final_w1_backward"]
        row["mean_w1"] = metrics["summary"]["mean_w1"]
        rows.append(row)

    fields = [path for path, _ in axes] + ["dir", "final_w1_forward",
                                           "final_w1_backward", "mean_w1"]
    with open(base / "sweep_summary.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    (base / "sweep_summary.json").write_text(
        json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return rows
