"""Exact Wasserstein-1 distances between equal-size sample sets.

One dimension reduces to sorted matching; higher dimensions solve the
full assignment problem with Euclidean ground cost.  Both are exact,
which is the point: evaluation noise should come from sampling alone,
never from the metric.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import ContractError

__all__ = ["cost_matrix", "w1_1d", "w1_assignment", "subsample_to_match",
           "MAX_ASSIGNMENT_N"]

MAX_ASSIGNMENT_N = 2048


def _as_batch(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ContractError(f"{name} must be a nonempty 1-D or (n, D) array")
    if not np.isfinite(arr).all():
        raise ContractError(f"{name} contains non-finite values")
    return arr


def cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances, shape (len(a), len(b))."""
    a = _as_batch(a, "a")
    b = _as_batch(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ContractError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.square(diff).sum(axis=2))


def w1_1d(a, b) -> float:
    """W1 between equal-size 1-D samples: mean absolute sorted difference."""
    a = _as_batch(a, "a")
    b = _as_batch(b, "b")
    if a.shape[1] != 1 or b.shape[1] != 1:
        raise ContractError("w1_1d expects one-dimensional samples")
    if a.shape[0] != b.shape[0]:
        raise ContractError(
            f"sample counts differ: {a.shape[0]} vs {b.shape[0]}; "
            "use subsample_to_match first")
    return float(np.abs(np.sort(a[:, 0]) - np.sort(b[:, 0])).mean())


def w1_assignment(a, b, max_n: int = MAX_ASSIGNMENT_N) -> float:
    """Exact W1 via minimal-cost assignment (any dimension).

    Solves the full n x n problem; the guard caps n because the solver
    is cubic in time and quadratic in memory.
    """
    a = _as_batch(a, "a")
    b = _as_batch(b, "b")
    if a.shape != b.shape:
        raise ContractError(
            f"sample sets must share shape, got {a.shape} vs {b.shape}; "
            "use subsample_to_match for unequal counts")
    n = a.shape[0]
    if n > max_n:
        raise ContractError(
            f"refusing n={n} > {max_n}: exact assignment is O(n^3) time "
            "and O(n^2) memory; subsample first")
    total, _ = _kernels.lap_assign(cost_matrix(a, b))
    return total / n


def subsample_to_match(a, b, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Randomly thin the larger set so both share the smaller count."""
    a = _as_batch(a, "a")
    b = _as_batch(b, "b")
    n = min(a.shape[0], b.shape[0])
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def thin(x):
        if x.shape[0] == n:
            return x.copy()
        rows = rng.choice(x.shape[0], size=n, replace=False)
        rows.sort()
        return x[rows]

    return thin(a), thin(b)
