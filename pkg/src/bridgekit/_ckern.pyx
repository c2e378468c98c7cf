# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the hot kernels in ``_purekern``.

Same contracts, same numerics up to floating-point association: a fused
drift-network forward pass (BLAS dgemm plus hand-rolled layernorm/tanh
loops) and the exact shortest-augmenting-path assignment solver.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

cdef double LN_EPS = 1e-5


cdef void _gemm(const double[:, ::1] a, const double[:, ::1] b,
                double[:, ::1] out, double beta) noexcept nogil:
    """out = a @ b + beta * out for row-major operands."""
    cdef int m = <int> a.shape[0]
    cdef int k = <int> a.shape[1]
    cdef int n = <int> b.shape[1]
    cdef double alpha = 1.0
    # row-major product expressed through the column-major BLAS view
    dgemm("N", "N", &n, &m, &k, &alpha, <double*> &b[0, 0], &n,
          <double*> &a[0, 0], &k, &beta, &out[0, 0], &n)


def drift_eval(dict packed, const double[:, ::1] x, const double[:, ::1] femb):
    cdef const double[:, ::1] w_in = packed["w_in"]
    cdef const double[::1] b_in = packed["b_in"]
    cdef const double[:, ::1] w_emb = packed["w_emb"]
    cdef const double[::1] b_emb = packed["b_emb"]
    cdef const double[:, :, ::1] wx = packed["wx"]
    cdef const double[:, :, ::1] wt = packed["wt"]
    cdef const double[:, ::1] bb = packed["bb"]
    cdef const double[:, ::1] w_out = packed["w_out"]
    cdef const double[::1] b_out = packed["b_out"]

    cdef Py_ssize_t B = x.shape[0]
    cdef Py_ssize_t W = w_in.shape[1]
    cdef Py_ssize_t E = w_emb.shape[1]
    cdef Py_ssize_t D = w_out.shape[1]
    cdef Py_ssize_t depth = wx.shape[0]
    cdef Py_ssize_t i, j, l

    emb_arr = np.empty((B, E))
    h_arr = np.empty((B, W))
    ln_arr = np.empty((B, W))
    z_arr = np.empty((B, W))
    out_arr = np.empty((B, D))
    cdef double[:, ::1] emb = emb_arr
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] ln = ln_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] out = out_arr
    cdef double m, var, inv, c

    with nogil:
        _gemm(femb, w_emb, emb, 0.0)
        for i in range(B):
            for j in range(E):
                emb[i, j] += b_emb[j]
        _gemm(x, w_in, h, 0.0)
        for i in range(B):
            for j in range(W):
                h[i, j] += b_in[j]
        for l in range(depth):
            for i in range(B):
                m = 0.0
                for j in range(W):
                    m += h[i, j]
                m /= W
                var = 0.0
                for j in range(W):
                    c = h[i, j] - m
                    var += c * c
                var /= W
                inv = 1.0 / sqrt(var + LN_EPS)
                for j in range(W):
                    ln[i, j] = (h[i, j] - m) * inv
            _gemm(ln, wx[l], z, 0.0)
            _gemm(emb, wt[l], z, 1.0)
            for i in range(B):
                for j in range(W):
                    h[i, j] += tanh(z[i, j] + bb[l, j])
        _gemm(h, w_out, out, 0.0)
        for i in range(B):
            for j in range(D):
                out[i, j] += b_out[j]
    return out_arr


def lap_assign(const double[:, ::1] cost):
    """Exact minimal-cost square assignment; see _purekern.lap_assign."""
    cdef Py_ssize_t n = cost.shape[0]
    if cost.shape[1] != n:
        raise ValueError("cost matrix must be square")

    u_arr = np.zeros(n)
    v_arr = np.zeros(n)
    shortest_arr = np.empty(n)
    remaining_arr = np.empty(n, dtype=np.int64)
    path_arr = np.full(n, -1, dtype=np.int64)
    row4col_arr = np.full(n, -1, dtype=np.int64)
    col4row_arr = np.full(n, -1, dtype=np.int64)

    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] shortest = shortest_arr
    cdef cnp.int64_t[::1] remaining = remaining_arr
    cdef cnp.int64_t[::1] path = path_arr
    cdef cnp.int64_t[::1] row4col = row4col_arr
    cdef cnp.int64_t[::1] col4row = col4row_arr

    cdef Py_ssize_t cur, i, j, it, nrem, index, sink, k
    cdef double minval, lowest, r, s, total
    cdef bint best_assigned, infeasible = False

    with nogil:
        for cur in range(n):
            minval = 0.0
            i = cur
            nrem = n
            for it in range(n):
                remaining[it] = it
                shortest[it] = INFINITY
            sink = -1
            while sink == -1:
                index = -1
                lowest = INFINITY
                best_assigned = True
                for it in range(nrem):
                    j = remaining[it]
                    r = minval + cost[i, j] - u[i] - v[j]
                    if r < shortest[j]:
                        path[j] = i
                        shortest[j] = r
                    s = shortest[j]
                    if s < lowest or (s == lowest and row4col[j] == -1
                                      and best_assigned):
                        lowest = s
                        index = it
                        best_assigned = row4col[j] != -1
                if lowest == INFINITY:
                    infeasible = True
                    break
                minval = lowest
                j = remaining[index]
                if row4col[j] == -1:
                    sink = j
                else:
                    i = row4col[j]
                remaining[index] = remaining[nrem - 1]
                remaining[nrem - 1] = j
                nrem -= 1
            if infeasible:
                break

            u[cur] += minval
            # scanned rows are exactly those owning a scanned column
            for it in range(nrem, n):
                j = remaining[it]
                if j != sink:
                    u[row4col[j]] += minval - shortest[j]
                v[j] -= minval - shortest[j]

            j = sink
            while True:
                i = path[j]
                row4col[j] = i
                k = col4row[i]
                col4row[i] = j
                j = k
                if i == cur:
                    break

        total = 0.0
        if not infeasible:
            for i in range(n):
                total += cost[i, col4row[i]]

    if infeasible:
        raise ValueError("assignment problem is infeasible")
    return total, col4row_arr
