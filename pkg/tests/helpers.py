"""Hand-computable tape maps shared by the loss and acceptance tests."""

import itertools

import numpy as np


class TapeMap:
    """Test map defined by a tape builder; ignores the time argument."""

    def __init__(self, build):
        self._build = build

    def on_tape(self, tape, x, t):
        x_leaf = tape.constant(np.asarray(x, dtype=np.float64))
        return x_leaf, self._build(tape, x_leaf)


def linear_map(a, b=None):
    """phi(x) = x @ a + b (a is (D, D), so J = a^T, tr J = tr a)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.zeros(a.shape[1]) if b is None else np.asarray(b, dtype=np.float64)

    def build(tape, x_leaf):
        prod = tape.matmul(x_leaf, tape.constant(a))
        return tape.add(prod, tape.bcast(tape.constant(b[None, :]),
                                         prod.shape))

    return TapeMap(build)


def quadratic_map(c):
    """phi_d(x) = c_d * x_d^2, so tr J = sum_d 2 c_d x_d."""
    c = np.asarray(c, dtype=np.float64)

    def build(tape, x_leaf):
        sq = tape.square(x_leaf)
        return tape.mul(sq, tape.bcast(tape.constant(c[None, :]), sq.shape))

    return TapeMap(build)


def cubic_map():
    """phi_d(x) = x_d^3, so tr J = sum_d 3 x_d^2."""

    def build(tape, x_leaf):
        return tape.mul(tape.square(x_leaf), x_leaf)

    return TapeMap(build)


def all_sign_probes(batch: int, dim: int) -> np.ndarray:
    """Every Rademacher pattern, tiled across the batch: (2^D, B, D)."""
    patterns = np.array(list(itertools.product((-1.0, 1.0), repeat=dim)))
    return np.repeat(patterns[:, None, :], batch, axis=1)


def w1_brute_force(a: np.ndarray, b: np.ndarray) -> float:
    """Minimum mean matching cost over all n! permutations (n <= 6)."""
    from bridgekit.transport import cost_matrix

    cost = cost_matrix(a, b)
    n = cost.shape[0]
    best = min(sum(cost[i, p[i]] for i in range(n))
               for p in itertools.permutations(range(n)))
    return best / n
