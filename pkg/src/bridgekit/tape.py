"""Minimal reverse-mode autodiff over a flat operation tape.

Every value is a float64 numpy array recorded as one node on a
:class:`Tape`.  The primitive set is closed and small: matmul, add, sub,
mul, scalar scale/shift, tanh (plus its derivative helper), square,
rsqrt, row_mean, sum_all, column selection and explicit broadcast.
Composites such as layer normalization are built from these primitives
so that both differentiation passes see through them.

Two passes are provided:

* ``backward(tape, loss)`` walks the tape in reverse and returns
  gradients for every named parameter the loss touches.
* ``jvp(tape, seed, v)`` pushes a tangent forward from one leaf.
  Tangents are emitted as ordinary tape nodes, so a subsequent
  ``backward`` on any function of a tangent differentiates through the
  tangent computation itself (reverse over forward).  Nothing ever
  records a tape of a tape.

Gradient accumulation walks node indices in a fixed order, so repeated
runs over identical inputs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ContractError

__all__ = ["Tape", "Node", "ParamSet", "backward", "leaf_gradients", "jvp"]


def _f64(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ContractError("tape values must be finite")
    return arr


class ParamSet:
    """Immutable named collection of float64 parameter arrays."""

    def __init__(self, tensors: dict[str, np.ndarray]):
        self._tensors = {}
        for name in sorted(tensors):
            arr = np.array(tensors[name], dtype=np.float64)
            arr.flags.writeable = False
            self._tensors[name] = arr
        self._cache: dict[str, Any] = {}

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def total_count(self) -> int:
        return sum(t.size for t in self._tensors.values())

    def replace(self, updates: dict[str, np.ndarray]) -> "ParamSet":
        """Return a new set with some tensors replaced."""
        unknown = set(updates) - set(self._tensors)
        if unknown:
            raise ContractError(f"unknown parameters: {sorted(unknown)}")
        merged = dict(self._tensors)
        merged.update(updates)
        return ParamSet(merged)

    def cache_slot(self) -> dict:
        """Scratch space tied to this (immutable) set, for packed views."""
        return self._cache


@dataclass(frozen=True)
class Node:
    """Handle to a single tape entry."""

    tape: "Tape"
    idx: int

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.idx]

    @property
    def shape(self) -> tuple:
        return self.tape.values[self.idx].shape


class Tape:
    """Append-only record of primitive operations."""

    def __init__(self):
        self.ops: list[str] = []
        self.args: list[tuple[int, ...]] = []
        self.values: list[np.ndarray] = []
        self.aux: list[Any] = []
        self._param_nodes: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.ops)

    def _emit(self, op: str, args: tuple[int, ...], value: np.ndarray,
              aux=None) -> Node:
        self.ops.append(op)
        self.args.append(args)
        self.values.append(value)
        self.aux.append(aux)
        return Node(self, len(self.ops) - 1)

    # leaves ---------------------------------------------------------------

    def constant(self, value) -> Node:
        # copy: callers may reuse and mutate their buffer afterwards
        return self._emit("const", (), np.array(_f64(value)))

    def param(self, name: str, value: np.ndarray) -> Node:
        """Register a named parameter leaf. Repeat names reuse the node."""
        if name in self._param_nodes:
            return Node(self, self._param_nodes[name])
        node = self._emit("param", (), _f64(value), aux=name)
        self._param_nodes[name] = node.idx
        return node

    # primitives -----------------------------------------------------------

    def matmul(self, a: Node, b: Node) -> Node:
        va, vb = a.value, b.value
        if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[0]:
            raise ContractError(
                f"matmul shape mismatch: {va.shape} @ {vb.shape}")
        return self._emit("matmul", (a.idx, b.idx), va @ vb)

    def add(self, a: Node, b: Node) -> Node:
        return self._emit("add", (a.idx, b.idx), a.value + b.value)

    def sub(self, a: Node, b: Node) -> Node:
        return self._emit("sub", (a.idx, b.idx), a.value - b.value)

    def mul(self, a: Node, b: Node) -> Node:
        return self._emit("mul", (a.idx, b.idx), a.value * b.value)

    def scale(self, a: Node, c: float) -> Node:
        return self._emit("scale", (a.idx,), a.value * float(c), aux=float(c))

    def shift(self, a: Node, c: float) -> Node:
        return self._emit("shift", (a.idx,), a.value + float(c), aux=float(c))

    def tanh(self, a: Node) -> Node:
        return self._emit("tanh", (a.idx,), np.tanh(a.value))

    def dtanh(self, da: Node, y: Node) -> Node:
        """da * (1 - y**2), the tangent of tanh with output node y."""
        return self._emit("dtanh", (da.idx, y.idx),
                          da.value * (1.0 - np.square(y.value)))

    def square(self, a: Node) -> Node:
        return self._emit("square", (a.idx,), np.square(a.value))

    def rsqrt(self, a: Node) -> Node:
        if np.any(a.value <= 0.0):
            raise ContractError("rsqrt requires strictly positive input")
        return self._emit("rsqrt", (a.idx,), 1.0 / np.sqrt(a.value))

    def row_mean(self, a: Node) -> Node:
        """Mean over the last axis, keepdims."""
        return self._emit("row_mean", (a.idx,),
                          a.value.mean(axis=-1, keepdims=True))

    def sum_all(self, a: Node) -> Node:
        return self._emit("sum_all", (a.idx,), np.asarray(a.value.sum()))

    def col(self, a: Node, j: int) -> Node:
        """Select column j of a 2-D value, keepdims."""
        if a.value.ndim != 2:
            raise ContractError("col expects a 2-D value")
        return self._emit("col", (a.idx,), a.value[:, j:j + 1].copy(), aux=j)

    def bcast(self, a: Node, shape: tuple) -> Node:
        value = np.broadcast_to(a.value, shape).copy()
        return self._emit("bcast", (a.idx,), value, aux=tuple(shape))


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _sweep(tape: Tape, loss: Node) -> list:
    """Reverse pass: adjoints for every node feeding the scalar loss."""
    if loss.tape is not tape:
        raise ContractError("loss node belongs to a different tape")
    lval = tape.values[loss.idx]
    if lval.size != 1:
        raise ContractError(f"loss must be scalar, got shape {lval.shape}")

    grads: list = [None] * len(tape)
    grads[loss.idx] = np.ones_like(lval)

    def acc(idx: int, g: np.ndarray) -> None:
        if grads[idx] is None:
            grads[idx] = np.zeros_like(tape.values[idx])
        grads[idx] += g

    for idx in range(loss.idx, -1, -1):
        g = grads[idx]
        if g is None:
            continue
        op = tape.ops[idx]
        args = tape.args[idx]
        if op in ("const", "param"):
            continue
        if op == "matmul":
            a, b = args
            acc(a, g @ tape.values[b].T)
            acc(b, tape.values[a].T @ g)
        elif op == "add":
            a, b = args
            acc(a, _unbroadcast(g, tape.values[a].shape))
            acc(b, _unbroadcast(g, tape.values[b].shape))
        elif op == "sub":
            a, b = args
            acc(a, _unbroadcast(g, tape.values[a].shape))
            acc(b, -_unbroadcast(g, tape.values[b].shape))
        elif op == "mul":
            a, b = args
            acc(a, _unbroadcast(g * tape.values[b], tape.values[a].shape))
            acc(b, _unbroadcast(g * tape.values[a], tape.values[b].shape))
        elif op == "scale":
            acc(args[0], g * tape.aux[idx])
        elif op == "shift":
            acc(args[0], g)
        elif op == "tanh":
            acc(args[0], g * (1.0 - np.square(tape.values[idx])))
        elif op == "dtanh":
            da, y = args
            yv = tape.values[y]
            acc(da, g * (1.0 - np.square(yv)))
            acc(y, g * tape.values[da] * (-2.0 * yv))
        elif op == "square":
            acc(args[0], g * 2.0 * tape.values[args[0]])
        elif op == "rsqrt":
            acc(args[0], g * (-0.5) * tape.values[idx] ** 3)
        elif op == "row_mean":
            src = tape.values[args[0]]
            acc(args[0], np.broadcast_to(g, src.shape) / src.shape[-1])
        elif op == "sum_all":
            src = tape.values[args[0]]
            acc(args[0], np.broadcast_to(g.reshape(()), src.shape).copy())
        elif op == "col":
            src = tape.values[args[0]]
            full = np.zeros_like(src)
            full[:, tape.aux[idx]:tape.aux[idx] + 1] = g
            acc(args[0], full)
        elif op == "bcast":
            acc(args[0], _unbroadcast(g, tape.values[args[0]].shape))
        else:  # pragma: no cover
            raise ContractError(f"unknown op in backward: {op}")
    return grads


def backward(tape: Tape, loss: Node) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss node w.r.t. every touched parameter."""
    grads = _sweep(tape, loss)
    out = {}
    for name, idx in sorted(tape._param_nodes.items()):
        if grads[idx] is not None:
            out[name] = grads[idx]
    return out


def leaf_gradients(tape: Tape, loss: Node, leaves: list[Node]) -> list[np.ndarray]:
    """Gradients of a scalar loss w.r.t. arbitrary leaf nodes."""
    grads = _sweep(tape, loss)
    out = []
    for leaf in leaves:
        g = grads[leaf.idx]
        out.append(np.zeros_like(leaf.value) if g is None else g)
    return out


def _shape_fix(tape: Tape, t: Node, shape: tuple) -> Node:
    return t if t.shape == tuple(shape) else tape.bcast(t, shape)


def jvp(tape: Tape, seed: Node, v: np.ndarray,
        upto: int | None = None) -> dict[int, Node]:
    """Forward-mode pass seeded at one leaf.

    Emits the tangent of every node downstream of ``seed`` (up to index
    ``upto``, default the current tape end) as new first-class tape
    nodes, and returns a map from node index to its tangent node.
    Nodes independent of the seed have no entry (tangent zero).
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != seed.value.shape:
        raise ContractError(
            f"tangent shape {v.shape} does not match seed {seed.value.shape}")
    limit = len(tape) if upto is None else upto

    tangents: dict[int, Node] = {seed.idx: tape.constant(v)}

    for idx in range(seed.idx + 1, limit):
        op = tape.ops[idx]
        args = tape.args[idx]
        ts = [tangents.get(a) for a in args]
        if all(t is None for t in ts):
            continue
        val = lambda k: Node(tape, args[k])  # noqa: E731
        if op == "matmul":
            ta, tb = ts
            if tb is None:
                t = tape.matmul(ta, val(1))
            elif ta is None:
                t = tape.matmul(val(0), tb)
            else:
                t = tape.add(tape.matmul(ta, val(1)), tape.matmul(val(0), tb))
        elif op == "add":
            ta, tb = ts
            t = ta if tb is None else tb if ta is None else tape.add(ta, tb)
            t = _shape_fix(tape, t, tape.values[idx].shape)
        elif op == "sub":
            ta, tb = ts
            if tb is None:
                t = ta
            elif ta is None:
                t = tape.scale(tb, -1.0)
            else:
                t = tape.sub(ta, tb)
            t = _shape_fix(tape, t, tape.values[idx].shape)
        elif op == "mul":
            ta, tb = ts
            if tb is None:
                t = tape.mul(ta, val(1))
            elif ta is None:
                t = tape.mul(val(0), tb)
            else:
                t = tape.add(tape.mul(ta, val(1)), tape.mul(val(0), tb))
            t = _shape_fix(tape, t, tape.values[idx].shape)
        elif op == "scale":
            t = tape.scale(ts[0], tape.aux[idx])
        elif op == "shift":
            t = ts[0]
        elif op == "tanh":
            t = tape.dtanh(ts[0], Node(tape, idx))
        elif op == "dtanh":
            tda, ty = ts
            parts = []
            if tda is not None:
                parts.append(tape.dtanh(tda, val(1)))
            if ty is not None:
                prod = tape.mul(val(0), val(1))
                parts.append(tape.scale(tape.mul(prod, ty), -2.0))
            t = parts[0] if len(parts) == 1 else tape.add(*parts)
        elif op == "square":
            t = tape.mul(ts[0], tape.scale(val(0), 2.0))
        elif op == "rsqrt":
            y = Node(tape, idx)
            t = tape.scale(tape.mul(tape.mul(y, tape.square(y)), ts[0]), -0.5)
        elif op == "row_mean":
            t = tape.row_mean(ts[0])
        elif op == "sum_all":
            t = tape.sum_all(ts[0])
        elif op == "col":
            t = tape.col(ts[0], tape.aux[idx])
        elif op == "bcast":
            t = tape.bcast(ts[0], tape.aux[idx])
        else:  # pragma: no cover
            raise ContractError(f"unknown op in jvp: {op}")
        tangents[idx] = t
    return tangents
