"""Adam with a cosine-annealed learning rate.

The schedule runs from lr_max down to lr_min over a fixed number of
steps; it is evaluated at the post-increment step count, so the final
configured step uses exactly lr_min.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, TrainingAborted
from .tape import ParamSet

__all__ = ["CosineSchedule", "OptimizerState", "init_optimizer", "optimizer_step"]


@dataclass(frozen=True)
class CosineSchedule:
    lr_max: float = 1e-3
    lr_min: float = 1e-5
    total_steps: int = 1000

    def at(self, step: int) -> float:
        """Learning rate after `step` of `total_steps` updates."""
        if self.total_steps <= 0:
            return self.lr_min
        frac = min(max(step / self.total_steps, 0.0), 1.0)
        return self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (
            1.0 + math.cos(math.pi * frac))


@dataclass
class OptimizerState:
    schedule: CosineSchedule
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: dict = field(default_factory=dict, repr=False)
    v: dict = field(default_factory=dict, repr=False)


def init_optimizer(params: ParamSet, schedule: CosineSchedule | None = None) -> OptimizerState:
    schedule = schedule or CosineSchedule()
    state = OptimizerState(schedule=schedule)
    for name, value in params.items():
        state.m[name] = np.zeros_like(value)
        state.v[name] = np.zeros_like(value)
    return state


def optimizer_step(params: ParamSet, grads: dict, state: OptimizerState
                   ) -> tuple[ParamSet, OptimizerState]:
    """One Adam update. Parameters missing from `grads` get zero gradient.

    Returns fresh (params, state); inputs are not mutated.
    """
    unknown = set(grads) - set(params.names())
    if unknown:
        raise ContractError(f"gradients for unknown parameters: {sorted(unknown)}")
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise TrainingAborted(f"non-finite gradient for parameter '{name}'")

    step = state.step + 1
    lr = state.schedule.at(step)
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step

    new = OptimizerState(schedule=state.schedule, step=step, beta1=b1,
                         beta2=b2, eps=eps)
    updates = {}
    for name, value in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(value)
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * np.square(g)
        new.m[name] = m
        new.v[name] = v
        updates[name] = value - lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params.replace(updates), new
