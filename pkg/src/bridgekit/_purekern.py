"""Pure numpy implementations of the hot kernels.

These are the reference implementations and the fallback used when the
compiled extension is unavailable (or disabled via BRIDGEKIT_PURE=1).
The compiled twins in ``_ckern`` must match them to near machine
precision; the equivalence tests pin that down.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError

LN_EPS = 1e-5


def drift_eval(packed: dict, x: np.ndarray, femb: np.ndarray) -> np.ndarray:
    """Batched drift-network forward pass without gradient recording."""
    emb = femb @ packed["w_emb"] + packed["b_emb"]
    h = x @ packed["w_in"] + packed["b_in"]
    for wx, wt, bb in zip(packed["wx"], packed["wt"], packed["bb"]):
        c = h - h.mean(axis=1, keepdims=True)
        var = np.square(c).mean(axis=1, keepdims=True)
        ln = c / np.sqrt(var + LN_EPS)
        h = h + np.tanh(ln @ wx + emb @ wt + bb)
    return h @ packed["w_out"] + packed["b_out"]


def lap_assign(cost: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact minimal-cost square assignment.

    Shortest-augmenting-path method with dual potentials; rows are
    assigned one at a time via a Dijkstra scan over columns.  Returns
    (total cost, col4row) where col4row[i] is the column matched to
    row i.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ContractError(f"cost matrix must be square, got {cost.shape}")
    if not np.isfinite(cost).all():
        raise ContractError("cost matrix contains non-finite values")
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    row4col = np.full(n, -1, dtype=np.int64)
    col4row = np.full(n, -1, dtype=np.int64)
    path = np.full(n, -1, dtype=np.int64)

    for cur in range(n):
        minval = 0.0
        i = cur
        remaining = np.arange(n, dtype=np.int64)
        nrem = n
        scanned_rows = np.zeros(n, dtype=bool)
        scanned_cols = np.zeros(n, dtype=bool)
        shortest = np.full(n, np.inf)
        sink = -1
        while sink == -1:
            scanned_rows[i] = True
            rem = remaining[:nrem]
            reduced = minval + cost[i, rem] - u[i] - v[rem]
            better = reduced < shortest[rem]
            upd = rem[better]
            path[upd] = i
            shortest[upd] = reduced[better]

            s_rem = shortest[rem]
            lowest = s_rem.min()
            if np.isinf(lowest):
                raise ContractError("assignment problem is infeasible")
            ties = rem[s_rem == lowest]
            free = ties[row4col[ties] == -1]
            j = int(free[0] if free.size else ties[0])
            minval = lowest
            if row4col[j] == -1:
                sink = j
            else:
                i = int(row4col[j])
            scanned_cols[j] = True
            pos = int(np.nonzero(rem == j)[0][0])
            remaining[pos] = remaining[nrem - 1]
            remaining[nrem - 1] = j
            nrem -= 1

        u[cur] += minval
        others = np.nonzero(scanned_rows)[0]
        others = others[others != cur]
        u[others] += minval - shortest[col4row[others]]
        cols = np.nonzero(scanned_cols)[0]
        v[cols] -= minval - shortest[cols]

        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, int(col4row[i])
            if i == cur:
                break

    total = float(cost[np.arange(n), col4row].sum())
    return total, col4row
