"""Experiment configuration: JSON parsing, defaults, strict validation.

Configs are plain JSON with three sections (problem, ipf, output).
Unknown keys are rejected with the offending dotted path; type errors
name the path too.  Parsing resolves every default, so the returned
object echoes back as a fully explicit document and re-parsing that
echo reproduces an equal config.  Environment variables are never
consulted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .datasets import MANIFOLD_KINDS, _MANIFOLD_DIM
from .errors import ConfigError

__all__ = ["EstimatorConfig", "GmmBoundaryConfig", "ProblemConfig",
           "IpfConfig", "OutputConfig", "ExperimentConfig", "parse_config",
           "PROBLEM_KINDS", "ESTIMATOR_CHOICES"]

PROBLEM_KINDS = ("gmm_bridge", "manifold_bridge", "csv_bridge")
ESTIMATOR_CHOICES = ("auto", "exact", "hutchinson", "stein")


def _expect_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(
            f"{path}: expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(data: dict, allowed, path: str) -> None:
    for key in data:
        if key not in allowed:
            dotted = f"{path}.{key}" if path else str(key)
            raise ConfigError(f"unknown key: {dotted}")


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(
            f"{path}: expected an integer, got {type(value).__name__}")
    return value


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(
            f"{path}: expected a number, got {type(value).__name__}")
    return float(value)


def _as_bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(
            f"{path}: expected a boolean, got {type(value).__name__}")
    return value


def _as_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(
            f"{path}: expected a string, got {type(value).__name__}")
    return value


def _as_number_list(value, path: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(
            f"{path}: expected a list of numbers, got {type(value).__name__}")
    return tuple(_as_number(v, f"{path}[{i}]") for i, v in enumerate(value))


@dataclass(frozen=True)
class EstimatorConfig:
    """Trace estimator choice; "auto" defers to the dimension rule."""

    kind: str = "auto"
    probes: int = 1
    sigma_z: float | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "probes": self.probes,
                "sigma_z": self.sigma_z}


@dataclass(frozen=True)
class GmmBoundaryConfig:
    """One boundary: explicit mixture modes, or modes drawn by seed."""

    modes: tuple[tuple[tuple[float, ...], float], ...] | None = None
    weights: tuple[float, ...] | None = None
    random_modes: int | None = None
    mean_range: tuple[float, float] = (-2.5, 2.5)
    std: float = 1.0
    spec_seed: int = 0

    def to_dict(self) -> dict:
        if self.modes is not None:
            out = {"modes": [{"mean": list(mean), "std": std}
                             for mean, std in self.modes]}
            if self.weights is not None:
                out["weights"] = list(self.weights)
            return out
        return {"random_modes": self.random_modes,
                "mean_range": list(self.mean_range),
                "std": self.std, "spec_seed": self.spec_seed}


@dataclass(frozen=True)
class ProblemConfig:
    kind: str = "gmm_bridge"
    dim: int = 1
    pi0: GmmBoundaryConfig | None = None
    pi1: GmmBoundaryConfig | None = None
    parts: tuple[str, ...] = ("swiss_roll",)
    noise_std: float = 0.0
    pad_to: int | None = None
    pi0_path: str | None = None
    pi1_path: str | None = None
    normalize: bool = True

    def to_dict(self) -> dict:
        if self.kind == "gmm_bridge":
            return {"kind": self.kind, "dim": self.dim,
                    "pi0": self.pi0.to_dict(), "pi1": self.pi1.to_dict()}
        if self.kind == "manifold_bridge":
            return {"kind": self.kind, "parts": list(self.parts),
                    "noise_std": self.noise_std, "pad_to": self.pad_to}
        return {"kind": self.kind, "pi0_path": self.pi0_path,
                "pi1_path": self.pi1_path, "normalize": self.normalize}


@dataclass(frozen=True)
class IpfConfig:
    iterations: int = 10
    steps: int = 1000
    n_traj: int = 128
    n_steps: int = 100
    dt: float = 0.01
    sigma: float = 1.0
    batch_points: int = 256
    buffer_capacity: int = 512
    lr_max: float = 1e-3
    lr_min: float = 1e-5
    seed: int = 0
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "steps": self.steps,
                "n_traj": self.n_traj, "n_steps": self.n_steps,
                "dt": self.dt, "sigma": self.sigma,
                "batch_points": self.batch_points,
                "buffer_capacity": self.buffer_capacity,
                "lr_max": self.lr_max, "lr_min": self.lr_min,
                "seed": self.seed, "estimator": self.estimator.to_dict()}


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "runs/bridge"
    eval_n: int = 512
    dump_trajectories: bool = False

    def to_dict(self) -> dict:
        return {"dir": self.dir, "eval_n": self.eval_n,
                "dump_trajectories": self.dump_trajectories}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    ipf: IpfConfig = field(default_factory=IpfConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return {"problem": self.problem.to_dict(), "ipf": self.ipf.to_dict(),
                "output": self.output.to_dict()}


_DEFAULT_PI0 = GmmBoundaryConfig(modes=(((0.0,), 1.0),))
_DEFAULT_PI1 = GmmBoundaryConfig(modes=(((-2.0,), 1.0), ((2.0,), 1.0)))


def _parse_estimator(data, path: str) -> EstimatorConfig:
    data = _expect_mapping(data, path)
    _reject_unknown(data, {"kind", "probes", "sigma_z"}, path)
    kind = _as_str(data.get("kind", "auto"), f"{path}.kind")
    if kind not in ESTIMATOR_CHOICES:
        raise ConfigError(
            f"{path}.kind: expected one of {ESTIMATOR_CHOICES}, got {kind!r}")
    probes = _as_int(data.get("probes", 1), f"{path}.probes")
    if probes < 1:
        raise ConfigError(f"{path}.probes: must be >= 1")
    sigma_z = data.get("sigma_z")
    if sigma_z is not None:
        sigma_z = _as_number(sigma_z, f"{path}.sigma_z")
        if sigma_z <= 0:
            raise ConfigError(f"{path}.sigma_z: must be positive")
    return EstimatorConfig(kind=kind, probes=probes, sigma_z=sigma_z)


def _parse_gmm_boundary(data, path: str, dim: int | None) -> GmmBoundaryConfig:
    data = _expect_mapping(data, path)
    if "modes" in data:
        _reject_unknown(data, {"modes", "weights"}, path)
        raw_modes = data["modes"]
        if not isinstance(raw_modes, (list, tuple)) or not raw_modes:
            raise ConfigError(f"{path}.modes: expected a non-empty list")
        modes = []
        for i, raw in enumerate(raw_modes):
            mpath = f"{path}.modes[{i}]"
            raw = _expect_mapping(raw, mpath)
            _reject_unknown(raw, {"mean", "std"}, mpath)
            if "mean" not in raw:
                raise ConfigError(f"{mpath}.mean: required")
            mean = _as_number_list(raw["mean"], f"{mpath}.mean")
            std = _as_number(raw.get("std", 1.0), f"{mpath}.std")
            if std <= 0:
                raise ConfigError(f"{mpath}.std: must be positive")
            if dim is not None and len(mean) != dim:
                raise ConfigError(
                    f"{mpath}.mean: expected {dim} entries, got {len(mean)}")
            if modes and len(mean) != len(modes[0][0]):
                raise ConfigError(
                    f"{mpath}.mean: inconsistent dimension across modes")
            modes.append((mean, std))
        weights = None
        if "weights" in data:
            weights = _as_number_list(data["weights"], f"{path}.weights")
            if len(weights) != len(modes):
                raise ConfigError(
                    f"{path}.weights: expected {len(modes)} entries, "
                    f"got {len(weights)}")
            if any(w < 0 for w in weights):
                raise ConfigError(f"{path}.weights: must be non-negative")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ConfigError(f"{path}.weights: must sum to 1")
        return GmmBoundaryConfig(modes=tuple(modes), weights=weights)
    if "random_modes" in data:
        _reject_unknown(data, {"random_modes", "mean_range", "std",
                               "spec_seed"}, path)
        k = _as_int(data["random_modes"], f"{path}.random_modes")
        if k < 1:
            raise ConfigError(f"{path}.random_modes: must be >= 1")
        mean_range = _as_number_list(data.get("mean_range", [-2.5, 2.5]),
                                     f"{path}.mean_range")
        if len(mean_range) != 2 or mean_range[0] >= mean_range[1]:
            raise ConfigError(
                f"{path}.mean_range: expected [low, high] with low < high")
        std = _as_number(data.get("std", 1.0), f"{path}.std")
        if std <= 0:
            raise ConfigError(f"{path}.std: must be positive")
        spec_seed = _as_int(data.get("spec_seed", 0), f"{path}.spec_seed")
        return GmmBoundaryConfig(random_modes=k,
                                 mean_range=(mean_range[0], mean_range[1]),
                                 std=std, spec_seed=spec_seed)
    raise ConfigError(f"{path}: need either 'modes' or 'random_modes'")


def _boundary_dim(boundary: GmmBoundaryConfig) -> int | None:
    if boundary.modes is not None:
        return len(boundary.modes[0][0])
    return None


def _parse_problem(data, path: str) -> ProblemConfig:
    data = _expect_mapping(data, path)
    kind = _as_str(data.get("kind", "gmm_bridge"), f"{path}.kind")
    if kind not in PROBLEM_KINDS:
        raise ConfigError(
            f"{path}.kind: expected one of {PROBLEM_KINDS}, got {kind!r}")
    if kind == "gmm_bridge":
        _reject_unknown(data, {"kind", "dim", "pi0", "pi1"}, path)
        dim = None
        if "dim" in data:
            dim = _as_int(data["dim"], f"{path}.dim")
            if dim < 1:
                raise ConfigError(f"{path}.dim: must be >= 1")
        pi0 = _parse_gmm_boundary(data["pi0"], f"{path}.pi0", dim) \
            if "pi0" in data else None
        pi1 = _parse_gmm_boundary(data["pi1"], f"{path}.pi1", dim) \
            if "pi1" in data else None
        if dim is None:
            for b in (pi0, pi1):
                if b is not None and _boundary_dim(b) is not None:
                    dim = _boundary_dim(b)
                    break
        if dim is None:
            if pi0 is None and pi1 is None:
                dim = 1
            else:
                raise ConfigError(
                    f"{path}.dim: required when boundaries use random modes")
        if pi0 is None:
            pi0 = _DEFAULT_PI0 if dim == 1 else GmmBoundaryConfig(
                modes=(((0.0,) * dim, 1.0),))
        if pi1 is None:
            if dim != 1:
                raise ConfigError(f"{path}.pi1: required when dim > 1")
            pi1 = _DEFAULT_PI1
        for name, b in (("pi0", pi0), ("pi1", pi1)):
            bdim = _boundary_dim(b)
            if bdim is not None and bdim != dim:
                raise ConfigError(
                    f"{path}.{name}: mode means have {bdim} entries, "
                    f"dim is {dim}")
        return ProblemConfig(kind=kind, dim=dim, pi0=pi0, pi1=pi1)
    if kind == "manifold_bridge":
        _reject_unknown(data, {"kind", "parts", "noise_std", "pad_to"}, path)
        raw_parts = data.get("parts", ["swiss_roll"])
        if not isinstance(raw_parts, (list, tuple)) or not raw_parts:
            raise ConfigError(f"{path}.parts: expected a non-empty list")
        parts = tuple(_as_str(p, f"{path}.parts[{i}]")
                      for i, p in enumerate(raw_parts))
        for i, p in enumerate(parts):
            if p not in MANIFOLD_KINDS:
                raise ConfigError(
                    f"{path}.parts[{i}]: expected one of {MANIFOLD_KINDS}, "
                    f"got {p!r}")
        noise_std = _as_number(data.get("noise_std", 0.0),
                               f"{path}.noise_std")
        if noise_std < 0:
            raise ConfigError(f"{path}.noise_std: must be >= 0")
        pad_to = data.get("pad_to")
        base = sum(_MANIFOLD_DIM[p] for p in parts)
        if pad_to is not None:
            pad_to = _as_int(pad_to, f"{path}.pad_to")
            if pad_to < base:
                raise ConfigError(
                    f"{path}.pad_to: below the concatenated width {base}")
        dim = pad_to if pad_to is not None else base
        return ProblemConfig(kind=kind, dim=dim, parts=parts,
                             noise_std=noise_std, pad_to=pad_to)
    _reject_unknown(data, {"kind", "pi0_path", "pi1_path", "normalize"}, path)
    for key in ("pi0_path", "pi1_path"):
        if key not in data:
            raise ConfigError(f"{path}.{key}: required for csv_bridge")
    pi0_path = _as_str(data["pi0_path"], f"{path}.pi0_path")
    pi1_path = _as_str(data["pi1_path"], f"{path}.pi1_path")
    normalize = _as_bool(data.get("normalize", True), f"{path}.normalize")
    return ProblemConfig(kind=kind, dim=0, pi0_path=pi0_path,
                         pi1_path=pi1_path, normalize=normalize)


def _parse_ipf(data, path: str) -> IpfConfig:
    data = _expect_mapping(data, path)
    allowed = {"iterations", "steps", "n_traj", "n_steps", "dt", "sigma",
               "batch_points", "buffer_capacity", "lr_max", "lr_min", "seed",
               "estimator"}
    _reject_unknown(data, allowed, path)
    iterations = _as_int(data.get("iterations", 10), f"{path}.iterations")
    if iterations < 0:
        raise ConfigError(f"{path}.iterations: must be >= 0")
    steps = _as_int(data.get("steps", 1000), f"{path}.steps")
    if steps < 0:
        raise ConfigError(f"{path}.steps: must be >= 0")
    n_traj = _as_int(data.get("n_traj", 128), f"{path}.n_traj")
    n_steps = _as_int(data.get("n_steps", 100), f"{path}.n_steps")
    for name, val in (("n_traj", n_traj), ("n_steps", n_steps)):
        if val < 1:
            raise ConfigError(f"{path}.{name}: must be >= 1")
    dt = data.get("dt")
    dt = 1.0 / n_steps if dt is None else _as_number(dt, f"{path}.dt")
    if dt <= 0:
        raise ConfigError(f"{path}.dt: must be positive")
    if abs(n_steps * dt - 1.0) > 1e-9:
        raise ConfigError(
            f"{path}: n_steps * dt must equal 1, got {n_steps * dt!r}")
    sigma = data.get("sigma")
    sigma = 1.0 / (n_steps * dt) if sigma is None \
        else _as_number(sigma, f"{path}.sigma")
    if sigma <= 0:
        raise ConfigError(f"{path}.sigma: must be positive")
    batch_points = _as_int(data.get("batch_points", 256),
                           f"{path}.batch_points")
    buffer_capacity = _as_int(data.get("buffer_capacity", 512),
                              f"{path}.buffer_capacity")
    for name, val in (("batch_points", batch_points),
                      ("buffer_capacity", buffer_capacity)):
        if val < 1:
            raise ConfigError(f"{path}.{name}: must be >= 1")
    lr_max = _as_number(data.get("lr_max", 1e-3), f"{path}.lr_max")
    lr_min = _as_number(data.get("lr_min", 1e-5), f"{path}.lr_min")
    if lr_max <= 0 or lr_min <= 0:
        raise ConfigError(f"{path}: learning rates must be positive")
    if lr_min > lr_max:
        raise ConfigError(f"{path}.lr_min: must not exceed lr_max")
    seed = _as_int(data.get("seed", 0), f"{path}.seed")
    estimator = _parse_estimator(data.get("estimator", {}),
                                 f"{path}.estimator")
    return IpfConfig(iterations=iterations, steps=steps, n_traj=n_traj,
                     n_steps=n_steps, dt=dt, sigma=sigma,
                     batch_points=batch_points,
                     buffer_capacity=buffer_capacity, lr_max=lr_max,
                     lr_min=lr_min, seed=seed, estimator=estimator)


def _parse_output(data, path: str) -> OutputConfig:
    data = _expect_mapping(data, path)
    _reject_unknown(data, {"dir", "eval_n", "dump_trajectories"}, path)
    out_dir = _as_str(data.get("dir", "runs/bridge"), f"{path}.dir")
    eval_n = _as_int(data.get("eval_n", 512), f"{path}.eval_n")
    if eval_n < 1:
        raise ConfigError(f"{path}.eval_n: must be >= 1")
    dump = _as_bool(data.get("dump_trajectories", False),
                    f"{path}.dump_trajectories")
    return OutputConfig(dir=out_dir, eval_n=eval_n, dump_trajectories=dump)


def parse_config(source) -> ExperimentConfig:
    """Parse a config from a dict, a JSON string, or a file path.

    Strings that start with '{' are treated as JSON text; anything else
    is read as a path.  All defaults are filled in, so the result's
    ``to_dict()`` echo re-parses to an equal config.
    """
    if isinstance(source, dict):
        data = source
    else:
        if isinstance(source, str) and source.lstrip().startswith("{"):
            text = source
        else:
            path = Path(source)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            text = path.read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    data = _expect_mapping(data, "config")
    _reject_unknown(data, {"problem", "ipf", "output"}, "")
    problem = _parse_problem(data.get("problem", {}), "problem")
    ipf = _parse_ipf(data.get("ipf", {}), "ipf")
    output = _parse_output(data.get("output", {}), "output")
    return ExperimentConfig(problem=problem, ipf=ipf, output=output)
