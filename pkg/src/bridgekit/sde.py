"""Euler-Maruyama simulation and the rolling trajectory buffer.

Time grids span the unit interval: N_t steps of size dt with N_t*dt = 1,
and the drift always receives the grid's own normalized clock k/N_t.
A backward process integrates its own clock from 0 to 1 exactly like a
forward one; the reversal is purely a matter of which boundary it starts
from and how its drift was trained (see the half-bridge driver).

Noise is drawn from counter-based Philox streams, one stream per
trajectory index, so trajectory i sees the same noise regardless of how
many trajectories are simulated alongside it and regardless of the
thread count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ContractError, SimulationDiverged

__all__ = ["TimeGrid", "TrajectoryBatch", "TrajectoryBuffer", "em_step",
           "simulate", "derive_seed", "write_trajectory_csv"]

DIVERGENCE_GUARD = 1e6


def derive_seed(*parts) -> int:
    """Derive a 128-bit child seed from integer parts, deterministically."""
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])
    a, b = ss.generate_state(2, np.uint64)
    return int(a) | (int(b) << 64)


def _philox(seed: int, jumps: int = 0):
    bg = np.random.Philox(key=seed % (1 << 128))
    if jumps:
        bg = bg.jumped(jumps)
    return np.random.Generator(bg)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid over the unit interval.

    ``dt`` defaults to 1/n_steps; an explicit dt must satisfy
    n_steps * dt = 1 (the simulation clock is normalized).
    """

    n_steps: int
    dt: float = None  # type: ignore[assignment]
    direction: str = "forward"

    def __post_init__(self):
        if self.n_steps < 1:
            raise ContractError("time grid needs at least one step")
        if self.dt is None:
            object.__setattr__(self, "dt", 1.0 / self.n_steps)
        if abs(self.n_steps * self.dt - 1.0) > 1e-9:
            raise ContractError(
                f"time grid must span the unit interval: "
                f"n_steps * dt = {self.n_steps * self.dt!r}")
        if self.direction not in ("forward", "backward"):
            raise ContractError(f"unknown direction {self.direction!r}")

    @property
    def times(self) -> np.ndarray:
        """All n_steps + 1 grid times, 0 to 1 inclusive."""
        return np.arange(self.n_steps + 1) / self.n_steps

    def reversed(self) -> "TimeGrid":
        flip = "backward" if self.direction == "forward" else "forward"
        return TimeGrid(self.n_steps, self.dt, flip)


@dataclass
class TrajectoryBatch:
    """States of shape (n_traj, n_steps + 1, dim) on one grid."""

    states: np.ndarray = field(repr=False)
    grid: TimeGrid
    sigma: float
    seed: int

    def __post_init__(self):
        if self.states.ndim != 3:
            raise ContractError("trajectory states must be 3-D")
        if self.states.shape[1] != self.grid.n_steps + 1:
            raise ContractError("state count does not match the time grid")

    @property
    def n_traj(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    @property
    def initial(self) -> np.ndarray:
        return self.states[:, 0, :]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[:, -1, :]


def em_step(x: np.ndarray, drift: np.ndarray, sigma: float, dt: float,
            noise: np.ndarray) -> np.ndarray:
    """One Euler-Maruyama update: x + drift*dt + sigma*sqrt(dt)*noise."""
    x = np.asarray(x, dtype=np.float64)
    drift = np.asarray(drift, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if drift.shape != x.shape or noise.shape != x.shape:
        raise ContractError(
            f"shape mismatch: x {x.shape}, drift {drift.shape}, noise {noise.shape}")
    if dt <= 0:
        raise ContractError("dt must be positive")
    return x + drift * dt + sigma * np.sqrt(dt) * noise


def _drift_fn(drift):
    evaluate = getattr(drift, "evaluate", None)
    return evaluate if evaluate is not None else drift


def _sample_fn(init):
    sample = getattr(init, "sample", None)
    return sample if sample is not None else init


def simulate(drift, init, sigma: float, grid: TimeGrid, n_traj: int,
             seed: int, guard: float = DIVERGENCE_GUARD,
             threads: int = 1) -> TrajectoryBatch:
    """Integrate n_traj trajectories of dx = drift(x, t) dt + sigma dW.

    ``drift`` is a DriftNetwork or any callable (x, t) -> (B, D);
    ``init`` is a boundary sampler (object with .sample(n, rng) or a
    callable (n, rng) -> (n, D)), drawn fresh on every call.  Aborts
    with SimulationDiverged when any state magnitude exceeds ``guard``.
    """
    if n_traj < 1:
        raise ContractError("n_traj must be >= 1")
    if sigma < 0:
        raise ContractError("sigma must be >= 0")
    drift_fn = _drift_fn(drift)
    x0 = np.ascontiguousarray(_sample_fn(init)(n_traj, _philox(seed)),
                              dtype=np.float64)
    if x0.ndim != 2 or x0.shape[0] != n_traj:
        raise ContractError(f"initial sampler returned shape {x0.shape}")
    if not np.isfinite(x0).all():
        raise ContractError("initial sampler returned non-finite values")
    dim = x0.shape[1]

    n_steps = grid.n_steps
    noise = np.empty((n_traj, n_steps, dim))
    for i in range(n_traj):
        noise[i] = _philox(seed, jumps=i + 1).standard_normal((n_steps, dim))

    states = np.empty((n_traj, n_steps + 1, dim))

    def run_chunk(lo: int, hi: int) -> None:
        x = x0[lo:hi].copy()
        states[lo:hi, 0] = x
        for k in range(n_steps):
            t_k = k / n_steps
            mu = np.asarray(drift_fn(x, t_k), dtype=np.float64)
            x = em_step(x, mu, sigma, grid.dt, noise[lo:hi, k])
            bad = ~np.isfinite(x)
            if bad.any() or np.abs(x).max() > guard:
                mag = np.inf if bad.any() else float(np.abs(x).max())
                raise SimulationDiverged(
                    f"trajectory state magnitude {mag:.3e} exceeded the "
                    f"guard {guard:.1e} at step {k + 1}",
                    step=k + 1, magnitude=mag)
            states[lo:hi, k + 1] = x

    threads = max(1, int(threads))
    if threads == 1 or n_traj < 2 * threads:
        run_chunk(0, n_traj)
    else:
        bounds = np.linspace(0, n_traj, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_chunk, int(lo), int(hi))
                       for lo, hi in zip(bounds[:-1], bounds[1:])
                       if hi > lo]
            for f in futures:
                f.result()
    return TrajectoryBatch(states=states, grid=grid, sigma=sigma, seed=seed)


class TrajectoryBuffer:
    """Fixed-capacity FIFO store of single trajectories.

    Pushing past capacity evicts the oldest entries; the contents are
    always a contiguous suffix of everything pushed.  Minibatches are
    (state, time) pairs drawn uniformly over (trajectory, step index)
    with step indices restricted to the left endpoints 0 .. n_steps-1.
    """

    def __init__(self, capacity: int = 512):
        if capacity < 1:
            raise ContractError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._store: np.ndarray | None = None
        self._n_steps = 0
        self._size = 0
        self._next = 0
        self._pushed = 0

    def __len__(self) -> int:
        return self._size

    @property
    def n_steps(self) -> int:
        return self._n_steps

    @property
    def total_pushed(self) -> int:
        return self._pushed

    def push(self, batch: TrajectoryBatch) -> None:
        states = batch.states
        if self._store is None:
            self._n_steps = states.shape[1] - 1
            self._store = np.empty((self.capacity,) + states.shape[1:])
        if states.shape[1:] != self._store.shape[1:]:
            raise ContractError(
                f"batch shape {states.shape[1:]} does not match buffer "
                f"contents {self._store.shape[1:]}")
        for traj in states:
            self._store[self._next] = traj
            self._next = (self._next + 1) % self.capacity
            self._size = min(self._size + 1, self.capacity)
            self._pushed += 1

    def snapshot(self) -> np.ndarray:
        """Current entries, oldest first."""
        if self._size == 0:
            return np.empty((0, 0, 0))
        if self._size < self.capacity:
            return self._store[:self._size].copy()
        return np.concatenate([self._store[self._next:],
                               self._store[:self._next]])

    def sample_points(self, rng: np.random.Generator, count: int
                      ) -> tuple[np.ndarray, np.ndarray]:
        """Draw `count` (x, t) pairs uniformly from the stored paths."""
        if self._size == 0:
            raise ContractError("cannot sample from an empty buffer")
        entry = rng.integers(0, self._size, size=count)
        step = rng.integers(0, self._n_steps, size=count)
        x = self._store[entry, step, :]
        t = step / self._n_steps
        return x, t


def write_trajectory_csv(batch: TrajectoryBatch, path) -> None:
    """Dump a batch as rows (traj_id, step, t, x_1 .. x_D)."""
    times = batch.grid.times
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["traj_id", "step", "t"]
                        + [f"x_{d + 1}" for d in range(batch.dim)])
        for i in range(batch.n_traj):
            for k in range(batch.grid.n_steps + 1):
                writer.writerow([i, k, repr(float(times[k]))]
                                + [repr(float(v)) for v in batch.states[i, k]])
