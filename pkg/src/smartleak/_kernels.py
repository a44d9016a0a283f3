"""Compiled inner loops: channel solver sweeps, trajectory simulation and
forward log-likelihood recursions.

Everything here takes plain numpy arrays and returns plain values so the
jitted code stays free of Python objects.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def ba_solve(p_x, weight, w, tol, max_iter):
    """Alternating minimization of I(X;Y) + slope-weighted draw penalty.

    p_x      : input pmf, shape (K,)
    weight   : 2**(-slope * draw(x,y)) on the feasible support, 0 off it
    w        : initial row-stochastic channel supported like ``weight``
               (modified in place)
    Returns (leakage_bits, avg_draw, iterations, converged).
    """
    K = p_x.shape[0]
    q = np.empty(K)
    prev = -1.0
    leak = 0.0
    it = 0
    conv = False
    for it in range(1, max_iter + 1):
        for y in range(K):
            s = 0.0
            for x in range(K):
                s += p_x[x] * w[x, y]
            q[y] = s
        for x in range(K):
            s = 0.0
            for y in range(K):
                v = q[y] * weight[x, y]
                w[x, y] = v
                s += v
            if s > 0.0:
                inv = 1.0 / s
                for y in range(K):
                    w[x, y] *= inv
        for y in range(K):
            s = 0.0
            for x in range(K):
                s += p_x[x] * w[x, y]
            q[y] = s
        leak = 0.0
        for x in range(K):
            px = p_x[x]
            if px == 0.0:
                continue
            for y in range(K):
                v = w[x, y]
                if v > 0.0 and q[y] > 0.0:
                    leak += px * v * np.log2(v / q[y])
        if prev >= 0.0 and abs(leak - prev) < tol:
            conv = True
            break
        prev = leak
    draw = 0.0
    for x in range(K):
        for y in range(K):
            draw += p_x[x] * w[x, y] * (x - y)
    if leak < 0.0:
        leak = 0.0
    return leak, draw, it, conv


@njit(cache=True, nogil=True)
def simulate_chain(cdf, out_x, out_y, out_b, counts, u, b0):
    """Sample one trajectory of the battery chain.

    cdf, out_* : per-SOC outcome tables (padded to a common width);
                 counts[b] gives the number of real outcomes in row b
    u          : i.i.d. uniforms, one per step
    Returns (xs, ys) integer arrays.
    """
    n = u.shape[0]
    xs = np.empty(n, np.int64)
    ys = np.empty(n, np.int64)
    b = b0
    for t in range(n):
        m = counts[b]
        k = np.searchsorted(cdf[b, :m], u[t], side="right")
        if k >= m:
            k = m - 1
        xs[t] = out_x[b, k]
        ys[t] = out_y[b, k]
        b = out_b[b, k]
    return xs, ys


@njit(cache=True, nogil=True)
def forward_rate(ops, obs, b0):
    """Normalized forward recursion: -(1/n) log2 P(observations).

    ops : (n_symbols, S, S) per-symbol transition operators over the SOC
          belief; ops[o][i, j] = Pr{symbol o, next SOC j | SOC i}
    obs : observed symbol index per step
    Returns nan when an observation has zero probability under the model.
    """
    n = obs.shape[0]
    S = ops.shape[1]
    alpha = np.zeros(S)
    alpha[b0] = 1.0
    new = np.empty(S)
    total = 0.0
    for t in range(n):
        op = ops[obs[t]]
        c = 0.0
        for j in range(S):
            s = 0.0
            for i in range(S):
                s += alpha[i] * op[i, j]
            new[j] = s
            c += s
        if not c > 0.0:
            return np.nan
        inv = 1.0 / c
        for j in range(S):
            alpha[j] = new[j] * inv
        total += np.log2(c)
    return -total / n


@njit(cache=True, nogil=True)
def simulate_best_effort_unbounded(ch_cdf, xs, es, u, p_hat):
    """Best-effort policy with an unbounded battery.

    ch_cdf : (X, Y) row-cumulative target channel
    Returns (ys, bs, outages) where ``bs`` is the SOC after each step and
    ``outages`` counts slots whose drawn target was energy-infeasible.
    """
    n = xs.shape[0]
    ys = np.empty(n, np.int64)
    bs = np.empty(n, np.int64)
    outages = 0
    width = ch_cdf.shape[1]
    b = 0
    for t in range(n):
        x = xs[t]
        e = es[t]
        k = np.searchsorted(ch_cdf[x], u[t], side="right")
        if k >= width:
            k = width - 1
        need = x - k
        if b + e < need:
            outages += 1
            y = x
        elif need > p_hat:
            y = x
        else:
            y = k
        b = b + e - (x - y)
        ys[t] = y
        bs[t] = b
    return ys, bs, outages


@njit(cache=True, nogil=True)
def walk_crossings(q_vals, q_cdf, n, trials, threshold, seed):
    """Count random walks S_t = sum of i.i.d. increments that ever drop
    to ``threshold`` (<= 0) within n steps."""
    np.random.seed(seed)
    m = q_cdf.shape[0]
    crossings = 0
    for _ in range(trials):
        s = 0.0
        for _t in range(n):
            uu = np.random.random()
            k = np.searchsorted(q_cdf, uu, side="right")
            if k >= m:
                k = m - 1
            s += q_vals[k]
            if s <= threshold:
                crossings += 1
                break
    return crossings
