"""bridgekit: Schrodinger bridge solver between sample-defined distributions.

Alternates training of neural forward/backward SDE drifts (iterative
proportional fitting) using a score-matching loss against the fixed
process, with exact Wasserstein-1 endpoint evaluation.
"""

__version__ = "0.1.0"

from .config import (EstimatorConfig, ExperimentConfig, GmmBoundaryConfig,
                     IpfConfig, OutputConfig, ProblemConfig, parse_config)
from .datasets import (EmpiricalDistribution, GmmSpec, ManifoldSampler,
                       PointMass, StandardNormal, concat_manifolds, load_csv,
                       make_manifold, random_gmm_spec, sample_gmm)
from .errors import (BridgekitError, ConfigError, ContractError,
                     SimulationDiverged, TrainingAborted)
from .ipf import (BridgeProblem, BridgeSolution, HalfBridgeRecord,
                  IpfSettings, nelson_reverse_drift, run_half_bridge, run_ipf)
from .losses import (LossBreakdown, TraceEstimator, default_estimator,
                     default_sigma_z, half_bridge_loss, trace_exact,
                     trace_hutchinson, trace_stein)
from .network import (DriftNetwork, build_drift_network, drift_forward,
                      load_checkpoint, save_checkpoint)
from .optim import CosineSchedule, OptimizerState, init_optimizer, optimizer_step
from .runner import emit_plot_data, run_experiment, run_sweep
from .sde import (TimeGrid, TrajectoryBatch, TrajectoryBuffer, derive_seed,
                  em_step, simulate, write_trajectory_csv)
from .tape import Node, ParamSet, Tape, backward, jvp
from .transport import subsample_to_match, w1_1d, w1_assignment

__all__ = [
    "__version__",
    "BridgekitError", "ConfigError", "ContractError", "SimulationDiverged",
    "TrainingAborted",
    "Tape", "Node", "ParamSet", "backward", "jvp",
    "DriftNetwork", "build_drift_network", "drift_forward",
    "save_checkpoint", "load_checkpoint",
    "CosineSchedule", "OptimizerState", "init_optimizer", "optimizer_step",
    "TimeGrid", "TrajectoryBatch", "TrajectoryBuffer", "em_step", "simulate",
    "derive_seed", "write_trajectory_csv",
    "TraceEstimator", "LossBreakdown", "default_estimator", "default_sigma_z",
    "trace_exact", "trace_hutchinson", "trace_stein", "half_bridge_loss",
    "BridgeProblem", "BridgeSolution", "HalfBridgeRecord", "IpfSettings",
    "run_half_bridge", "run_ipf", "nelson_reverse_drift",
    "GmmSpec", "PointMass", "StandardNormal", "EmpiricalDistribution",
    "ManifoldSampler", "sample_gmm", "random_gmm_spec", "make_manifold",
    "concat_manifolds", "load_csv",
    "w1_1d", "w1_assignment", "subsample_to_match",
    "EstimatorConfig", "ExperimentConfig", "GmmBoundaryConfig", "IpfConfig",
    "OutputConfig", "ProblemConfig", "parse_config",
    "run_experiment", "run_sweep", "emit_plot_data",
]
