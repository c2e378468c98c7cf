"""Residual drift network with a learned sinusoidal time embedding.

The network maps a batch of states x (B, D) and times t in [0, 1] to a
batch of drift vectors (B, D).  Width is 10*D and depth max(2, ceil(D/5)).
Each residual block computes

    h <- h + tanh(layernorm(h) @ Wx + embed(t) @ Wt + b)

where layernorm is non-affine (its gain/bias would be absorbed by the
following linear map) and embed(t) is a learned linear projection of
fixed sinusoidal features: 16 geometrically spaced frequencies spanning
1 to 64 cycles over the unit interval, sin and cos each.  The time
features are constants with respect to both parameters and states, so
they are precomputed off-tape.

The output projection is zero-initialized by default, making a freshly
built network the zero drift; an untrained reference process is then
driven by noise alone.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ContractError
from .tape import Node, ParamSet, Tape

__all__ = [
    "DriftNetwork", "build_drift_network", "drift_forward", "forward_nodes",
    "network_width", "network_depth", "time_features",
    "save_checkpoint", "load_checkpoint",
]

LN_EPS = 1e-5
N_FREQ = 16
TIME_EMBED_DIM = 32
FREQ_MIN = 1.0
FREQ_MAX = 64.0


def network_width(dim: int) -> int:
    return 10 * dim

def network_depth(dim: int) -> int:
    return max(2, math.ceil(dim / 5))


def _freqs(n_freq: int) -> np.ndarray:
    return np.geomspace(FREQ_MIN, FREQ_MAX, n_freq)


def time_features(t: np.ndarray, n_freq: int = N_FREQ) -> np.ndarray:
    """Sinusoidal features (B, 2*n_freq) for times t of shape (B,)."""
    ang = 2.0 * np.pi * np.outer(t, _freqs(n_freq))
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


@dataclass
class DriftNetwork:
    """A drift function with named parameters.

    ``params`` is replaced wholesale by optimizer steps; the ParamSet
    itself is immutable.
    """

    dim: int
    width: int
    depth: int
    time_embed_dim: int
    n_freq: int
    seed: int
    params: ParamSet = field(repr=False)

    def evaluate(self, x: np.ndarray, t) -> np.ndarray:
        """Fast forward pass without gradient recording."""
        x, tb = _check_inputs(self, x, t)
        return _kernels.drift_eval(_packed(self), np.ascontiguousarray(x),
                                   time_features(tb, self.n_freq))

    def on_tape(self, tape: Tape, x: np.ndarray, t) -> tuple[Node, Node]:
        """Record the forward pass; returns (input leaf, output node)."""
        return forward_nodes(tape, self, x, t)


def _check_inputs(net: DriftNetwork, x, t) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.dim:
        raise ContractError(f"state batch must be (B, {net.dim}), got {x.shape}")
    if not np.isfinite(x).all():
        raise ContractError("state batch contains non-finite values")
    tb = np.asarray(t, dtype=np.float64)
    if tb.ndim == 0:
        tb = np.full(x.shape[0], float(tb))
    if tb.shape != (x.shape[0],):
        raise ContractError(f"time must be scalar or shape ({x.shape[0]},)")
    if np.any(tb < 0.0) or np.any(tb > 1.0):
        raise ContractError("time arguments must lie in [0, 1]")
    return x, tb


def build_drift_network(dim: int, seed: int, zero_final: bool = True,
                        time_embed_dim: int = TIME_EMBED_DIM,
                        n_freq: int = N_FREQ) -> DriftNetwork:
    """Construct a network sized from the state dimension.

    Hidden layers use the uniform fan-in rule U(-1/sqrt(f), 1/sqrt(f));
    with ``zero_final`` the output projection starts at exactly zero so
    the fresh network is the zero drift.
    """
    if dim < 1:
        raise ContractError("state dimension must be >= 1")
    width = network_width(dim)
    depth = network_depth(dim)
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def uniform(fan_in, shape):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, shape)

    tensors = {
        "in.w": uniform(dim, (dim, width)),
        "in.b": uniform(dim, (width,)),
        "emb.w": uniform(2 * n_freq, (2 * n_freq, time_embed_dim)),
        "emb.b": uniform(2 * n_freq, (time_embed_dim,)),
    }
    for i in range(depth):
        fan = width + time_embed_dim
        tensors[f"block{i}.wx"] = uniform(fan, (width, width))
        tensors[f"block{i}.wt"] = uniform(fan, (time_embed_dim, width))
        tensors[f"block{i}.b"] = uniform(fan, (width,))
    if zero_final:
        tensors["out.w"] = np.zeros((width, dim))
        tensors["out.b"] = np.zeros(dim)
    else:
        tensors["out.w"] = uniform(width, (width, dim))
        tensors["out.b"] = uniform(width, (dim,))
    return DriftNetwork(dim=dim, width=width, depth=depth,
                        time_embed_dim=time_embed_dim, n_freq=n_freq,
                        seed=seed, params=ParamSet(tensors))


def _layernorm(tape: Tape, h: Node) -> Node:
    m = tape.row_mean(h)
    c = tape.sub(h, m)
    var = tape.row_mean(tape.square(c))
    return tape.mul(c, tape.rsqrt(tape.shift(var, LN_EPS)))


def forward_nodes(tape: Tape, net: DriftNetwork, x, t) -> tuple[Node, Node]:
    """Tape-recorded forward pass; returns (input leaf, output node)."""
    x, tb = _check_inputs(net, x, t)
    p = net.params
    xn = tape.constant(x)
    femb = tape.constant(time_features(tb, net.n_freq))

    def lin(a, wname, bname):
        return tape.add(tape.matmul(a, tape.param(wname, p[wname])),
                        tape.param(bname, p[bname]))

    emb = lin(femb, "emb.w", "emb.b")
    h = lin(xn, "in.w", "in.b")
    for i in range(net.depth):
        z = tape.add(tape.matmul(_layernorm(tape, h),
                                 tape.param(f"block{i}.wx", p[f"block{i}.wx"])),
                     lin(emb, f"block{i}.wt", f"block{i}.b"))
        h = tape.add(h, tape.tanh(z))
    out = lin(h, "out.w", "out.b")
    return xn, out


def drift_forward(net: DriftNetwork, x, t, tape: Tape | None = None):
    """Evaluate the drift; records on the tape when one is given.

    Returns a (B, D) array, or the output Node when recording.
    """
    if tape is None:
        return net.evaluate(x, t)
    _, out = forward_nodes(tape, net, x, t)
    return out


def _packed(net: DriftNetwork) -> dict:
    """Contiguous stacked views of the parameters for the eval kernels."""
    slot = net.params.cache_slot()
    packed = slot.get("packed")
    if packed is None:
        p = net.params
        packed = {
            "w_in": p["in.w"], "b_in": p["in.b"],
            "w_emb": p["emb.w"], "b_emb": p["emb.b"],
            "wx": np.ascontiguousarray([p[f"block{i}.wx"] for i in range(net.depth)]),
            "wt": np.ascontiguousarray([p[f"block{i}.wt"] for i in range(net.depth)]),
            "bb": np.ascontiguousarray([p[f"block{i}.b"] for i in range(net.depth)]),
            "w_out": p["out.w"], "b_out": p["out.b"],
        }
        slot["packed"] = packed
    return packed


# -- checkpoints -----------------------------------------------------------
# A checkpoint is a single .npz archive holding every parameter array
# under its name plus a JSON header (key "__meta__") with the sizing
# fields (dim, width, depth, time_embed_dim, n_freq, seed).

def save_checkpoint(net: DriftNetwork, path) -> None:
    meta = {"dim": net.dim, "width": net.width, "depth": net.depth,
            "time_embed_dim": net.time_embed_dim, "n_freq": net.n_freq,
            "seed": net.seed}
    arrays = {name: value for name, value in net.params.items()}
    arrays["__meta__"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> DriftNetwork:
    with np.load(path) as data:
        if "__meta__" not in data:
            raise ContractError(f"{path} is not a drift network checkpoint")
        meta = json.loads(bytes(data["__meta__"]).decode())
        tensors = {name: data[name] for name in data.files if name != "__meta__"}
    net = DriftNetwork(dim=meta["dim"], width=meta["width"],
                       depth=meta["depth"], time_embed_dim=meta["time_embed_dim"],
                       n_freq=meta["n_freq"], seed=meta["seed"],
                       params=ParamSet(tensors))
    expected = build_drift_network(net.dim, net.seed,
                                   time_embed_dim=net.time_embed_dim,
                                   n_freq=net.n_freq)
    if sorted(expected.params.names()) != sorted(net.params.names()):
        raise ContractError("checkpoint parameter names do not match sizing")
    return net
