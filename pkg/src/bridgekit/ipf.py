"""Iterative proportional fitting between two boundary distributions.

Each iteration runs two half-bridges.  A half-bridge holds one drift
network fixed, simulates it from its own boundary into a rolling
trajectory buffer, and trains the other network on minibatches from
that buffer so it becomes the fixed process's time reversal started
from the opposite boundary.  Times relabel as t_trainee = 1 - t_fixed:
both processes integrate their own clock from 0 to 1.

The first half-bridge trains the backward drift against the untrained
forward reference, whose zero-initialized output layer makes it a pure
noise process.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, TrainingAborted
from .losses import (LossBreakdown, TraceEstimator, default_estimator,
                     default_sigma_z, half_bridge_loss)
from .network import DriftNetwork, build_drift_network
from .optim import CosineSchedule, init_optimizer, optimizer_step
from .sde import TimeGrid, TrajectoryBatch, TrajectoryBuffer, derive_seed, simulate, _philox
from .tape import Tape, backward
from .transport import subsample_to_match, w1_1d, w1_assignment

__all__ = ["BridgeProblem", "IpfSettings", "HalfBridgeRecord",
           "BridgeSolution", "nelson_reverse_drift", "run_half_bridge",
           "run_ipf"]


def nelson_reverse_drift(mu, score, sigma: float):
    """Drift of the time-reversed diffusion: -mu + sigma^2 * score.

    ``mu`` and ``score`` are the forward drift and the score
    (gradient of the log marginal density) evaluated at the same
    (x, t); the reversed process runs on the clock tau = 1 - t with
    unchanged diffusion coefficient.
    """
    return -np.asarray(mu, dtype=np.float64) + sigma ** 2 * np.asarray(
        score, dtype=np.float64)


@dataclass(frozen=True)
class BridgeProblem:
    """Boundary samplers, noise scale, and the shared time grid."""

    dim: int
    pi0: object
    pi1: object
    sigma: float = 1.0
    grid: TimeGrid = field(default_factory=lambda: TimeGrid(100))

    def __post_init__(self):
        if self.dim < 1:
            raise ContractError("problem dimension must be >= 1")
        if self.sigma <= 0:
            raise ContractError("sigma must be positive")
        for name, sampler in (("pi0", self.pi0), ("pi1", self.pi1)):
            dim = getattr(sampler, "dim", None)
            if dim is not None and dim != self.dim:
                raise ContractError(
                    f"{name} has dimension {dim}, problem says {self.dim}")


@dataclass(frozen=True)
class IpfSettings:
    """Solver knobs shared by both half-bridge directions."""

    iterations: int = 10
    steps: int = 1000
    n_traj: int = 128
    batch_points: int = 256
    buffer_capacity: int = 512
    lr_max: float = 1e-3
    lr_min: float = 1e-5
    estimator: TraceEstimator | None = None  # None: dimension rule
    eval_n: int = 512
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.iterations < 0:
            raise ContractError("iterations must be >= 0")
        for name in ("steps", "n_traj", "batch_points", "buffer_capacity",
                     "eval_n"):
            if getattr(self, name) < (0 if name == "steps" else 1):
                raise ContractError(f"{name} is out of range")


@dataclass
class HalfBridgeRecord:
    ipf_iter: int
    direction: str
    steps: int
    final_loss: LossBreakdown | None
    w1_forward_end: float
    w1_backward_end: float
    wall_time_s: float

    def to_json_dict(self) -> dict:
        loss = None
        if self.final_loss is not None:
            loss = {"total": self.final_loss.total,
                    "quad": self.final_loss.quad_term,
                    "cross": self.final_loss.cross_term,
                    "trace": self.final_loss.trace_term}
        return {"ipf_iter": self.ipf_iter, "direction": self.direction,
                "steps": self.steps, "final_loss": loss,
                "w1_forward_end": self.w1_forward_end,
                "w1_backward_end": self.w1_backward_end,
                "wall_time_s": self.wall_time_s}


@dataclass
class BridgeSolution:
    """Trained drift pair plus the per-half-bridge metric history."""

    problem: BridgeProblem
    settings: IpfSettings
    forward: DriftNetwork
    backward: DriftNetwork
    history: list[HalfBridgeRecord] = field(default_factory=list)

    def sample_forward(self, n: int, seed: int) -> TrajectoryBatch:
        return simulate(self.forward, self.problem.pi0, self.problem.sigma,
                        self.problem.grid, n, seed)

    def sample_backward(self, n: int, seed: int) -> TrajectoryBatch:
        grid = self.problem.grid.reversed()
        return simulate(self.backward, self.problem.pi1, self.problem.sigma,
                        grid, n, seed)


@dataclass
class HalfBridgeResult:
    trainee: DriftNetwork
    final_loss: LossBreakdown | None
    fresh: TrajectoryBatch
    estimator: TraceEstimator


def _resolve_estimator(settings: IpfSettings, dim: int,
                       buffer: TrajectoryBuffer, rng) -> TraceEstimator:
    est = settings.estimator or default_estimator(dim)
    if est.kind == "stein" and est.sigma_z is None:
        probe_x, _ = buffer.sample_points(rng, min(2048, 8 * len(buffer)))
        est = replace(est, sigma_z=default_sigma_z(probe_x))
    return est


def run_half_bridge(fixed: DriftNetwork, trainee: DriftNetwork,
                    start_sampler, buffer: TrajectoryBuffer,
                    settings: IpfSettings, *, sigma: float, grid: TimeGrid,
                    seed: int, fixed_start=None,
                    fixed_grid: TimeGrid | None = None) -> HalfBridgeResult:
    """Train ``trainee`` to reverse the fixed process, then simulate it.

    The buffer must already hold trajectories of the fixed drift
    simulated from its own boundary.  Each optimizer step samples
    (x, t_fixed) pairs, evaluates the fixed drift at the fixed clock,
    and scores the trainee at t = 1 - t_fixed.  After ``settings.steps``
    updates the trained trainee is simulated from ``start_sampler``
    (its own boundary) and the fresh batch returned for the caller to
    bank and evaluate.  The fixed network is never touched.

    When ``fixed_start``/``fixed_grid`` are given, the buffer is topped
    up with n_traj fresh trajectories of the fixed drift every quarter
    of the schedule, so FIFO eviction retires trajectories left over
    from earlier IPF iterations before the low-learning-rate tail.
    """
    if len(buffer) == 0:
        raise ContractError(
            "trajectory buffer is empty; simulate the fixed drift from "
            "its boundary before training against it")
    rng_batch = _philox(derive_seed(seed, 1))
    rng_probe = _philox(derive_seed(seed, 2))
    est = _resolve_estimator(settings, trainee.dim, buffer,
                             _philox(derive_seed(seed, 3)))

    schedule = CosineSchedule(lr_max=settings.lr_max, lr_min=settings.lr_min,
                              total_steps=settings.steps)
    state = init_optimizer(trainee.params, schedule)
    refresh_every = max(1, settings.steps // 4)
    last: LossBreakdown | None = None
    for step in range(settings.steps):
        if (fixed_start is not None and step > 0
                and step % refresh_every == 0):
            top_up = simulate(fixed, fixed_start, sigma, fixed_grid,
                              settings.n_traj, seed=derive_seed(seed, 5, step),
                              threads=settings.threads)
            buffer.push(top_up)
        x, t_fixed = buffer.sample_points(rng_batch, settings.batch_points)
        t_train = 1.0 - t_fixed
        mu = fixed.evaluate(x, t_fixed)
        tape = Tape()
        breakdown = half_bridge_loss(trainee, mu, x, t_train, sigma, est,
                                     tape, rng_probe)
        if not np.isfinite(breakdown.total):
            raise TrainingAborted("training loss became non-finite",
                                  last_breakdown=last)
        grads = backward(tape, breakdown.node)
        trainee.params, state = optimizer_step(trainee.params, grads, state)
        last = breakdown

    fresh = simulate(trainee, start_sampler, sigma, grid, settings.n_traj,
                     seed=derive_seed(seed, 4), threads=settings.threads)
    return HalfBridgeResult(trainee=trainee, final_loss=last, fresh=fresh,
                            estimator=est)


def _endpoint_w1(terminal: np.ndarray, boundary, eval_n: int, rng) -> float:
    """Exact W1 between simulated terminals and fresh boundary draws."""
    n = min(eval_n, terminal.shape[0])
    if terminal.shape[0] > n:
        rows = rng.choice(terminal.shape[0], size=n, replace=False)
        rows.sort()
        terminal = terminal[rows]
    ref = boundary.sample(n, rng) if hasattr(boundary, "sample") \
        else boundary(n, rng)
    if terminal.shape[1] == 1:
        return w1_1d(terminal, ref)
    return w1_assignment(terminal, ref)


def _eval_endpoint(net: DriftNetwork, start, target, *, sigma, grid,
                   settings: IpfSettings, seed: int, rng) -> float:
    """W1 between a dedicated eval simulation's terminal and its target.

    Runs eval_n fresh trajectories so the metric's sample size is
    decoupled from the training trajectory count n_traj.
    """
    batch = simulate(net, start, sigma, grid, settings.eval_n, seed=seed,
                     threads=settings.threads)
    return _endpoint_w1(batch.terminal, target, settings.eval_n, rng)


def run_ipf(problem: BridgeProblem, settings: IpfSettings,
            record_hook=None) -> BridgeSolution:
    """Alternate half-bridges for the configured iteration count.

    Returns the trained forward/backward drifts and one record per
    half-bridge (2 x iterations in total).  With zero iterations both
    networks come back untrained.
    """
    master = settings.seed
    forward = build_drift_network(problem.dim, seed=derive_seed(master, 100))
    backwardnet = build_drift_network(problem.dim, seed=derive_seed(master, 101))
    fwd_buffer = TrajectoryBuffer(settings.buffer_capacity)
    bwd_buffer = TrajectoryBuffer(settings.buffer_capacity)
    solution = BridgeSolution(problem=problem, settings=settings,
                              forward=forward, backward=backwardnet)
    if settings.iterations == 0:
        return solution

    grid_f = problem.grid
    grid_b = problem.grid.reversed()
    eval_rng = _philox(derive_seed(master, 102))

    first = simulate(forward, problem.pi0, problem.sigma, grid_f,
                     settings.n_traj, seed=derive_seed(master, 103),
                     threads=settings.threads)
    fwd_buffer.push(first)
    w1_f = _eval_endpoint(forward, problem.pi0, problem.pi1,
                          sigma=problem.sigma, grid=grid_f, settings=settings,
                          seed=derive_seed(master, 400, 0), rng=eval_rng)
    w1_b = float("nan")

    def record(ipf_iter, direction, result, wall):
        rec = HalfBridgeRecord(ipf_iter=ipf_iter, direction=direction,
                               steps=settings.steps, final_loss=result.final_loss,
                               w1_forward_end=w1_f, w1_backward_end=w1_b,
                               wall_time_s=wall)
        solution.history.append(rec)
        if record_hook is not None:
            record_hook(rec)

    for it in range(1, settings.iterations + 1):
        t0 = time.perf_counter()
        result = run_half_bridge(forward, backwardnet, problem.pi1, fwd_buffer,
                                 settings, sigma=problem.sigma, grid=grid_b,
                                 seed=derive_seed(master, 200, it),
                                 fixed_start=problem.pi0, fixed_grid=grid_f)
        bwd_buffer.push(result.fresh)
        w1_b = _eval_endpoint(backwardnet, problem.pi1, problem.pi0,
                              sigma=problem.sigma, grid=grid_b,
                              settings=settings,
                              seed=derive_seed(master, 400, it), rng=eval_rng)
        record(it, "backward", result, time.perf_counter() - t0)

        t0 = time.perf_counter()
        result = run_half_bridge(backwardnet, forward, problem.pi0, bwd_buffer,
                                 settings, sigma=problem.sigma, grid=grid_f,
                                 seed=derive_seed(master, 201, it),
                                 fixed_start=problem.pi1, fixed_grid=grid_b)
        fwd_buffer.push(result.fresh)
        w1_f = _eval_endpoint(forward, problem.pi0, problem.pi1,
                              sigma=problem.sigma, grid=grid_f,
                              settings=settings,
                              seed=derive_seed(master, 401, it), rng=eval_rng)
        record(it, "forward", result, time.perf_counter() - t0)
    return solution
