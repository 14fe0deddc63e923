"""Numpy fallback for the two hot loops of the constrained-walk DP.

Both routines work on the symmetric half-table: ``layer[h, a]`` holds
``log P(V_n = h, A_n = a)`` for ``h >= 0``. The increment law is symmetric,
so the value for ``V_n = -h`` is the same.
"""

import numpy as np

NEG_INF = -np.inf


def forward_layer(prev, log_r, log_c, out):
    """Advance one step of the (V_n, A_n) recursion.

    ``out[h, a] = log sum_{v'} P_prev(v', a - h) r^{|h - v'|} / c`` for ``a >= h``.
    ``prev`` and ``out`` are square ``(K + 1, K + 1)`` float64 arrays.
    """
    K = prev.shape[0] - 1
    fwd = np.empty_like(prev)
    bwd = np.empty_like(prev)

    # fwd[h] = sum_{0 <= v' <= h} prev[v'] r^(h - v')
    fwd[0] = prev[0]
    for h in range(1, K + 1):
        np.logaddexp(prev[h], fwd[h - 1] + log_r, out=fwd[h])

    # bwd[h] = sum_{v' > h} prev[v'] r^(v' - h)
    bwd[K] = NEG_INF
    for h in range(K - 1, -1, -1):
        np.logaddexp(prev[h + 1], bwd[h + 1], out=bwd[h])
        bwd[h] += log_r

    # mirrored sources: sum_{v' >= 1} prev[v'] r^(h + v') = r^h * bwd[0]
    heights = np.arange(K + 1, dtype=np.float64)[:, None]
    conv = np.logaddexp(np.logaddexp(fwd, bwd), heights * log_r + bwd[0][None, :])

    out.fill(NEG_INF)
    for h in range(K + 1):
        out[h, h:] = conv[h, : K + 1 - h] - log_c
    return out


def backward_walk(layers, log_r, n_steps, area, uniforms):
    """Sample ``V_0..V_{n_steps}`` conditioned on ``V_{n_steps} = 0, A_{n_steps} = area``.

    ``layers`` is the full half-table ``(n, h, a)``; ``uniforms`` supplies at
    least ``n_steps - 1`` draws in [0, 1). Returns an int64 array of length
    ``n_steps + 1``.
    """
    walk = np.zeros(n_steps + 1, dtype=np.int64)
    v = 0
    a = area
    for n in range(n_steps, 0, -1):
        a_prev = a - abs(v)
        if n == 1:
            if a_prev != 0:
                raise ValueError("inconsistent backward state")
            walk[0] = 0
            break
        cand = np.arange(-a_prev, a_prev + 1)
        logw = layers[n - 1, np.abs(cand), a_prev] + np.abs(v - cand) * log_r
        top = logw.max()
        if top == NEG_INF:
            raise ValueError("zero-probability backward state")
        cdf = np.cumsum(np.exp(logw - top))
        idx = int(np.searchsorted(cdf, uniforms[n_steps - n] * cdf[-1], side="right"))
        idx = min(idx, len(cand) - 1)
        v = int(cand[idx])
        a = a_prev
        walk[n - 1] = v
    return walk
