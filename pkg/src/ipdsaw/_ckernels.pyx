# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the constrained-walk DP step and the backward sampler.

Same contracts as :mod:`ipdsaw._pykernels`; the half-table layout is
``layer[h, a]`` with ``h = |V_n| >= 0``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, INFINITY

cnp.import_array()


cdef inline double _lae(double x, double y) noexcept nogil:
    if x == -INFINITY:
        return y
    if y == -INFINITY:
        return x
    if x > y:
        return x + log1p(exp(y - x))
    return y + log1p(exp(x - y))


def forward_layer(const double[:, ::1] prev, double log_r, double log_c, double[:, ::1] out):
    cdef Py_ssize_t K = prev.shape[0] - 1
    cdef Py_ssize_t h, a
    cdef double c
    fwd_arr = np.empty((K + 1, K + 1), dtype=np.float64)
    bwd_arr = np.empty((K + 1, K + 1), dtype=np.float64)
    cdef double[:, ::1] fwd = fwd_arr
    cdef double[:, ::1] bwd = bwd_arr

    with nogil:
        # inclusive forward sweep; row h is only read for a' <= K - h
        for a in range(K + 1):
            fwd[0, a] = prev[0, a]
        for h in range(1, K + 1):
            for a in range(K - h + 1):
                fwd[h, a] = _lae(prev[h, a], fwd[h - 1, a] + log_r)

        # exclusive backward sweep; zero unless a' > h
        for a in range(K + 1):
            bwd[K, a] = -INFINITY
        for h in range(K - 1, -1, -1):
            for a in range(h + 1):
                bwd[h, a] = -INFINITY
            for a in range(h + 1, K + 1):
                bwd[h, a] = _lae(prev[h + 1, a], bwd[h + 1, a]) + log_r

        for h in range(K + 1):
            for a in range(h):
                out[h, a] = -INFINITY
            for a in range(K - h + 1):
                c = _lae(fwd[h, a], bwd[h, a])
                c = _lae(c, h * log_r + bwd[0, a])
                out[h, a + h] = c - log_c
    return out


def backward_walk(const double[:, :, ::1] layers, double log_r, Py_ssize_t n_steps,
                  Py_ssize_t area, const double[::1] uniforms):
    walk_arr = np.zeros(n_steps + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] walk = walk_arr
    cdef Py_ssize_t K = layers.shape[1] - 1
    buf_arr = np.empty(2 * K + 1, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    cdef Py_ssize_t n, a, a_prev, j, m, idx
    cdef long v = 0, cand
    cdef double top, total, target, acc, w
    a = area
    for n in range(n_steps, 0, -1):
        a_prev = a - (v if v >= 0 else -v)
        if n == 1:
            if a_prev != 0:
                raise ValueError("inconsistent backward state")
            walk[0] = 0
            break
        m = 2 * a_prev + 1
        top = -INFINITY
        for j in range(m):
            cand = j - a_prev
            w = layers[n - 1, cand if cand >= 0 else -cand, a_prev]
            w += (v - cand if v >= cand else cand - v) * log_r
            buf[j] = w
            if w > top:
                top = w
        if top == -INFINITY:
            raise ValueError("zero-probability backward state")
        total = 0.0
        for j in range(m):
            buf[j] = exp(buf[j] - top)
            total += buf[j]
        target = uniforms[n_steps - n] * total
        acc = 0.0
        idx = m - 1
        for j in range(m):
            acc += buf[j]
            if acc > target:
                idx = j
                break
        v = idx - a_prev
        a = a_prev
        walk[n - 1] = v
    return walk_arr
