"""Score-matching loss against a fixed reference drift.

For a trainee drift phi and reference drift values mu sampled from the
fixed process, the per-point objective is

    phi . phi + 2 mu . phi + 2 sigma^2 tr(d phi / d x)

averaged over the minibatch.  Up to a phi-independent constant this is
the mean squared distance between phi and the reversal target
(-mu + sigma^2 grad log p), so its minimizer over rich enough function
classes is exactly the reverse drift; the decomposition tests pin that
identity down by quadrature.

The Jacobian trace admits three estimators:

* exact: one forward-mode pass per coordinate (D passes), summing the
  diagonal.  Deterministic; guarded to D <= 64.
* hutchinson: tr(J) = E_z[z . (J z)] with Rademacher probes; a single
  jvp per probe, differentiable in the parameters because tangents are
  first-class tape nodes.
* stein: tr(J) at x is estimated by phi(x + z) . z / sigma_z^2 with
  z ~ N(0, sigma_z^2 I), one probe per sample point.  Forward
  evaluations only; exact in expectation for affine maps, O(sigma_z^2)
  biased otherwise.

All trace functions return the minibatch mean as a scalar tape node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError
from .tape import Node, Tape, jvp

__all__ = ["TraceEstimator", "LossBreakdown", "default_estimator",
           "default_sigma_z", "trace_exact", "trace_hutchinson",
           "trace_stein", "half_bridge_loss", "EXACT_TRACE_MAX_DIM"]

EXACT_TRACE_MAX_DIM = 64
ESTIMATOR_KINDS = ("exact", "hutchinson", "stein")


@dataclass(frozen=True)
class TraceEstimator:
    """Choice of Jacobian-trace estimator for the loss."""

    kind: str = "exact"
    probes: int = 1
    sigma_z: float | None = None

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ConfigError(
                f"unknown trace estimator {self.kind!r}; "
                f"expected one of {ESTIMATOR_KINDS}")
        if self.probes < 1:
            raise ConfigError("estimator probes must be >= 1")
        # sigma_z None on a stein estimator is allowed here: the solver
        # fills it from the training data scale before first use.
        if self.sigma_z is not None and self.sigma_z <= 0:
            raise ConfigError("sigma_z must be positive")


def default_estimator(dim: int) -> TraceEstimator:
    """Dimension rule: exact up to D=8, single-probe Hutchinson above."""
    if dim <= 8:
        return TraceEstimator(kind="exact")
    return TraceEstimator(kind="hutchinson", probes=1)


def default_sigma_z(samples: np.ndarray) -> float:
    """Stein perturbation default: 5% of the mean per-dimension std."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ContractError("need a (n >= 2, D) sample array")
    scale = float(samples.std(axis=0).mean())
    if scale <= 0:
        raise ContractError("samples are degenerate; supply sigma_z explicitly")
    return 0.05 * scale


@dataclass
class LossBreakdown:
    """Loss value and its three terms; total = quad + cross + trace."""

    total: float
    quad_term: float
    cross_term: float
    trace_term: float
    node: Node | None = field(default=None, repr=False, compare=False)


def _phi_nodes(phi, tape: Tape, x: np.ndarray, t) -> tuple[Node, Node]:
    on_tape = getattr(phi, "on_tape", None)
    if on_tape is None:
        raise ContractError(
            "phi must expose on_tape(tape, x, t) -> (input leaf, output node)")
    x_leaf, out = on_tape(tape, x, t)
    if out.value.shape != np.shape(x):
        raise ContractError(
            f"phi returned shape {out.value.shape} for input {np.shape(x)}")
    return x_leaf, out


def _check_batch(x, t) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ContractError(f"minibatch states must be (B, D), got {x.shape}")
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        t = np.full(x.shape[0], float(t))
    if t.shape != (x.shape[0],):
        raise ContractError("minibatch times must be scalar or shape (B,)")
    return x, t


def _diag_sum_node(tape: Tape, x_leaf: Node, out: Node, dim: int) -> Node:
    """Sum over the batch of the Jacobian diagonal, via D one-hot passes."""
    snapshot = len(tape)
    total = None
    basis = np.zeros(x_leaf.value.shape)
    for d in range(dim):
        basis[:, :] = 0.0
        basis[:, d] = 1.0
        tmap = jvp(tape, x_leaf, basis, upto=snapshot)
        term = tape.sum_all(tape.col(tmap[out.idx], d))
        total = term if total is None else tape.add(total, term)
    return total


def trace_exact(phi, x, t, tape: Tape) -> Node:
    """Batch-mean Jacobian trace, exactly, one jvp per coordinate."""
    x, t = _check_batch(x, t)
    dim = x.shape[1]
    if dim > EXACT_TRACE_MAX_DIM:
        raise ContractError(
            f"exact trace at D={dim} exceeds the soft limit "
            f"{EXACT_TRACE_MAX_DIM}; use a stochastic estimator")
    x_leaf, out = _phi_nodes(phi, tape, x, t)
    return tape.scale(_diag_sum_node(tape, x_leaf, out, dim), 1.0 / x.shape[0])


def _hutchinson_sum_node(tape: Tape, x_leaf: Node, out: Node,
                         probes: np.ndarray) -> Node:
    """Batch-sum trace estimate averaged over given probe vectors."""
    snapshot = len(tape)
    acc = None
    for z in probes:
        tmap = jvp(tape, x_leaf, z, upto=snapshot)
        term = tape.sum_all(tape.mul(tmap[out.idx], tape.constant(z)))
        acc = term if acc is None else tape.add(acc, term)
    return tape.scale(acc, 1.0 / probes.shape[0])


def trace_hutchinson(phi, x, t, rng: np.random.Generator | None, probes: int,
                     tape: Tape, probe_vectors: np.ndarray | None = None) -> Node:
    """Batch-mean Hutchinson trace estimate with Rademacher probes.

    ``probe_vectors`` (P, B, D) overrides the random draw; tests use it
    to average over the full sign ensemble.
    """
    x, t = _check_batch(x, t)
    if probe_vectors is None:
        if rng is None:
            raise ContractError("trace_hutchinson needs an rng or probe_vectors")
        if probes < 1:
            raise ContractError("probes must be >= 1")
        probe_vectors = rng.integers(0, 2, size=(probes,) + x.shape) * 2.0 - 1.0
    else:
        probe_vectors = np.asarray(probe_vectors, dtype=np.float64)
        if probe_vectors.ndim != 3 or probe_vectors.shape[1:] != x.shape:
            raise ContractError(
                f"probe_vectors must be (P, {x.shape[0]}, {x.shape[1]})")
    x_leaf, out = _phi_nodes(phi, tape, x, t)
    total = _hutchinson_sum_node(tape, x_leaf, out, probe_vectors)
    return tape.scale(total, 1.0 / x.shape[0])


def _stein_sum_node(phi, tape: Tape, x: np.ndarray, t: np.ndarray,
                    noise: np.ndarray, sigma_z: float) -> Node:
    """Batch-sum Stein trace estimate, one Gaussian probe per point."""
    _, out_pert = _phi_nodes(phi, tape, x + noise, t)
    dot = tape.sum_all(tape.mul(out_pert, tape.constant(noise)))
    return tape.scale(dot, 1.0 / sigma_z ** 2)


def trace_stein(phi, x, t, rng: np.random.Generator | None, sigma_z: float,
                tape: Tape, noise: np.ndarray | None = None) -> Node:
    """Batch-mean Stein trace estimate from forward evaluations only."""
    if sigma_z is None or sigma_z <= 0:
        raise ConfigError("stein estimator requires a positive sigma_z")
    x, t = _check_batch(x, t)
    if noise is None:
        if rng is None:
            raise ContractError("trace_stein needs an rng or explicit noise")
        noise = sigma_z * rng.standard_normal(x.shape)
    else:
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != x.shape:
            raise ContractError("noise must match the state batch shape")
    total = _stein_sum_node(phi, tape, x, t, noise, sigma_z)
    return tape.scale(total, 1.0 / x.shape[0])


def half_bridge_loss(phi, reference_drift, x, t, sigma: float,
                     estimator: TraceEstimator, tape: Tape,
                     rng: np.random.Generator | None = None) -> LossBreakdown:
    """Minibatch loss of trainee phi against fixed reference drift values.

    ``reference_drift`` holds the fixed network's outputs at the same
    states with times converted to the fixed process's own clock; they
    enter the tape as constants, so no gradient reaches the fixed
    network.  Stochastic estimators draw fresh probes from ``rng`` on
    every call.
    """
    x, t = _check_batch(x, t)
    mu = np.asarray(reference_drift, dtype=np.float64)
    if mu.shape != x.shape:
        raise ContractError(
            f"reference drift shape {mu.shape} does not match batch {x.shape}")
    if not np.isfinite(mu).all():
        raise ContractError("reference drift contains non-finite values")
    batch = x.shape[0]
    dim = x.shape[1]

    x_leaf, out = _phi_nodes(phi, tape, x, t)
    quad = tape.scale(tape.sum_all(tape.square(out)), 1.0 / batch)
    cross = tape.scale(tape.sum_all(tape.mul(tape.constant(mu), out)),
                       2.0 / batch)

    if estimator.kind == "exact":
        if dim > EXACT_TRACE_MAX_DIM:
            raise ContractError(
                f"exact trace at D={dim} exceeds the soft limit "
                f"{EXACT_TRACE_MAX_DIM}; use a stochastic estimator")
        tr_sum = _diag_sum_node(tape, x_leaf, out, dim)
    elif estimator.kind == "hutchinson":
        if rng is None:
            raise ContractError("hutchinson estimator needs an rng")
        probes = rng.integers(0, 2, size=(estimator.probes,) + x.shape) * 2.0 - 1.0
        tr_sum = _hutchinson_sum_node(tape, x_leaf, out, probes)
    else:  # stein
        if rng is None:
            raise ContractError("stein estimator needs an rng")
        if estimator.sigma_z is None:
            raise ConfigError("stein estimator requires a positive sigma_z")
        noise = estimator.sigma_z * rng.standard_normal(x.shape)
        tr_sum = _stein_sum_node(phi, tape, x, t, noise, estimator.sigma_z)

    trace = tape.scale(tr_sum, 2.0 * sigma ** 2 / batch)
    total = tape.add(tape.add(quad, cross), trace)
    return LossBreakdown(total=float(total.value),
                         quad_term=float(quad.value),
                         cross_term=float(cross.value),
                         trace_term=float(trace.value),
                         node=total)
