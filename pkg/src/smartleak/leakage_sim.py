"""Monte-Carlo estimation of the information leakage rate.

With a finite battery and a stationary policy, the pair (demand, request)
is a hidden-Markov process whose hidden state is the battery level. Both
entropy rates entering the leakage

    leakage = H-rate(Y) - H-rate(Y | X)

are therefore estimated as normalized negative log-likelihoods of one
simulated trajectory, computed by per-step-normalized forward recursions
over the battery belief: one recursion marginalizes the demand, the other
conditions on the realized demand sequence. An exact exhaustive-
enumeration oracle for short horizons and the storage-phase random-walk
experiments live here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import ConditionalPmf, GridModel, Pmf, expected_battery_draw
from .policies import ChainSpec, Policy, battery_update, build_chain, output_distribution

DEFAULT_N = 1_000_000
DEFAULT_SEEDS = 10


@dataclass(frozen=True)
class LeakageEstimate:
    """Leakage-rate estimate with its across-seed standard error."""

    bits_per_slot: float
    std_error: float
    n: int
    seeds: int
    hy_rate: float
    hy_given_x_rate: float
    per_seed: tuple[tuple[int, float, float], ...]  # (seed, hy, hy|x) audit rows


@dataclass(frozen=True)
class WalkResult:
    crossing_fraction: float
    wald_bound: float
    s_n: int
    trials: int


def _sample_iid(pmf: Pmf, rng: np.random.Generator, n: int) -> np.ndarray:
    cdf = np.cumsum(pmf.probs)
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    return np.minimum(idx, pmf.size - 1).astype(np.int64)


def _sampler_tables(chain: ChainSpec):
    """Flatten the per-level outcome law into padded inverse-CDF tables."""
    em = chain.emission
    n_states = em.shape[0]
    rows = []
    for b in range(n_states):
        idx = np.argwhere(em[b] > 0)
        probs = em[b][em[b] > 0]
        rows.append((idx, probs))
    width = max(len(p) for _, p in rows)
    cdf = np.full((n_states, width), 1.1)
    out_x = np.zeros((n_states, width), dtype=np.int64)
    out_y = np.zeros((n_states, width), dtype=np.int64)
    out_b = np.zeros((n_states, width), dtype=np.int64)
    counts = np.zeros(n_states, dtype=np.int64)
    for b, (idx, probs) in enumerate(rows):
        m = len(probs)
        counts[b] = m
        cdf[b, :m] = np.cumsum(probs)
        cdf[b, m - 1] = max(cdf[b, m - 1], 1.0)  # guard against fp undershoot
        out_x[b, :m] = idx[:, 0]
        out_y[b, :m] = idx[:, 1]
        out_b[b, :m] = idx[:, 2]
    return cdf, out_x, out_y, out_b, counts


def _forward_operators(chain: ChainSpec, p_X: Pmf):
    em = chain.emission  # (S, X, Y, S)
    ops_y = np.ascontiguousarray(em.sum(axis=1).transpose(1, 0, 2))  # (Y, S, S)
    px = p_X.probs
    safe = np.where(px > 0, px, 1.0)
    cond = em / safe[None, :, None, None]  # p(y, b' | b, x)
    n_x, n_y = em.shape[1], em.shape[2]
    ops_xy = np.ascontiguousarray(
        cond.transpose(1, 2, 0, 3).reshape(n_x * n_y, em.shape[0], em.shape[3])
    )
    return ops_y, ops_xy, n_y


def estimate_leakage(
    model: GridModel,
    policy: Policy,
    n: int = DEFAULT_N,
    seeds: int = DEFAULT_SEEDS,
    base_seed: int = 0,
) -> LeakageEstimate:
    """Estimate the leakage rate of a stationary policy by simulation.

    Each seed produces one trajectory of length ``n`` started at an empty
    battery; the reported rate averages the per-seed estimates and the
    standard error is the across-seed sample deviation of the mean.
    """
    if model.infinite_battery:
        raise ValueError("simulation estimator needs a finite battery")
    if n < 1 or seeds < 1:
        raise ValueError("n and seeds must be positive")
    chain = build_chain(model, policy)
    cdf, out_x, out_y, out_b, counts = _sampler_tables(chain)
    ops_y, ops_xy, n_y = _forward_operators(chain, model.p_X)

    diffs = []
    hys = []
    hygxs = []
    records = []
    for k in range(seeds):
        rng = np.random.default_rng([base_seed, k])
        u = rng.random(n)
        xs, ys = _kernels.simulate_chain(cdf, out_x, out_y, out_b, counts, u, 0)
        hy = float(_kernels.forward_rate(ops_y, ys, 0))
        hygx = float(_kernels.forward_rate(ops_xy, xs * n_y + ys, 0))
        if math.isnan(hy) or math.isnan(hygx):
            raise RuntimeError(
                "observed symbol has zero probability under the chain kernel; "
                "simulator and kernel disagree"
            )
        hys.append(hy)
        hygxs.append(hygx)
        diffs.append(hy - hygx)
        records.append((k, hy, hygx))

    hy_rate = float(np.mean(hys))
    hy_given_x_rate = float(np.mean(hygxs))
    if seeds > 1:
        std_error = float(np.std(diffs, ddof=1) / math.sqrt(seeds))
    else:
        std_error = 0.0
    return LeakageEstimate(
        bits_per_slot=hy_rate - hy_given_x_rate,
        std_error=std_error,
        n=n,
        seeds=seeds,
        hy_rate=hy_rate,
        hy_given_x_rate=hy_given_x_rate,
        per_seed=tuple(records),
    )


def brute_force_rate(model: GridModel, policy: Policy, n: int) -> float:
    """Exact (1/n) I(X^n; Y^n) by exhaustive enumeration.

    Enumerates every demand/generation sequence and every stochastic
    policy choice, so it only works for short horizons; used as the
    independent oracle for the simulation estimator.
    """
    if model.infinite_battery:
        raise ValueError("enumeration needs a finite battery")
    if not 1 <= n <= 12:
        raise ValueError("enumeration horizon limited to 1..12")
    p_x = model.p_X.probs
    p_e = model.p_E.probs

    states: dict[tuple, float] = {((), (), 0): 1.0}
    for t in range(n):
        new: dict[tuple, float] = {}
        for (xt, yt, b), pr in states.items():
            for x, px in enumerate(p_x):
                if px == 0.0:
                    continue
                for e, pe in enumerate(p_e):
                    if pe == 0.0:
                        continue
                    base = pr * px * pe
                    for y, py in output_distribution(policy, x, e, b, t, model.p_hat):
                        b2 = battery_update(b, e, x, y, model.b_max)
                        key = (xt + (x,), yt + (y,), b2)
                        new[key] = new.get(key, 0.0) + base * py
        states = new
        if len(states) > 5_000_000:
            raise ValueError("enumeration budget exceeded")

    joint: dict[tuple, float] = {}
    for (xt, yt, _b), pr in states.items():
        joint[(xt, yt)] = joint.get((xt, yt), 0.0) + pr
    py_marg: dict[tuple, float] = {}
    for (_xt, yt), pr in joint.items():
        py_marg[yt] = py_marg.get(yt, 0.0) + pr

    mi = 0.0
    for (xt, yt), pr in joint.items():
        px_seq = math.prod(p_x[x] for x in xt)
        mi += pr * math.log2(pr / (px_seq * py_marg[yt]))
    return max(mi, 0.0) / n


def simulate_best_effort(
    model: GridModel, channel: ConditionalPmf, n: int, seed: int = 0
):
    """One unbounded-battery best-effort trajectory.

    Returns (xs, ys, bs, outages): the demand and request sequences, the
    post-step battery levels and the count of energy-infeasible targets.
    """
    if not model.infinite_battery:
        raise ValueError("best-effort analysis here assumes an unbounded battery")
    rng = np.random.default_rng(seed)
    xs = _sample_iid(model.p_X, rng, n)
    es = _sample_iid(model.p_E, rng, n)
    u = rng.random(n)
    ch_cdf = np.cumsum(channel.matrix, axis=1)
    ch_cdf[:, -1] = np.maximum(ch_cdf[:, -1], 1.0)
    ys, bs, outages = _kernels.simulate_best_effort_unbounded(
        ch_cdf, xs, es, u, model.p_hat
    )
    return xs, ys, bs, int(outages)


def outage_experiment(
    model: GridModel,
    channel: ConditionalPmf,
    n: int,
    seeds: int = 1,
    base_seed: int = 0,
) -> float:
    """Fraction of slots where the drawn best-effort target is infeasible.

    Requires the stabilizing drift condition: the channel's mean draw must
    be strictly below the mean generation rate.
    """
    draw = expected_battery_draw(model.p_X, channel)
    if draw >= model.p_E.mean():
        raise ValueError(
            f"mean draw {draw} must be strictly below mean generation {model.p_E.mean()}"
        )
    total = 0
    for k in range(seeds):
        _, _, _, outages = simulate_best_effort(
            model, channel, n, seed=(base_seed * 1_000_003 + k)
        )
        total += outages
    return total / (n * seeds)


def _q_distribution(model: GridModel, channel: ConditionalPmf):
    """Exact law of the per-slot battery balance Q = E - (X - Y*)."""
    dist: dict[int, float] = {}
    for e, pe in enumerate(model.p_E.probs):
        if pe == 0.0:
            continue
        for x, px in enumerate(model.p_X.probs):
            if px == 0.0:
                continue
            for y, pyx in enumerate(channel.matrix[x]):
                if pyx == 0.0:
                    continue
                q = e - (x - y)
                dist[q] = dist.get(q, 0.0) + pe * px * pyx
    vals = np.array(sorted(dist), dtype=float)
    probs = np.array([dist[int(v)] for v in vals])
    return vals, probs


def _log_mgf(r: float, vals: np.ndarray, probs: np.ndarray) -> float:
    a = r * vals + np.log(probs)
    m = a.max()
    return float(m + np.log(np.sum(np.exp(a - m))))


def _wald_exponent(vals: np.ndarray, probs: np.ndarray) -> float:
    """Negative root of the log moment generating function of Q."""
    lo, hi = -64.0, -1e-12
    g_lo, g_hi = _log_mgf(lo, vals, probs), _log_mgf(hi, vals, probs)
    if g_hi >= 0:
        raise RuntimeError("balance increment has non-positive drift")
    if g_lo <= 0:
        raise RuntimeError("no root of the log-MGF in [-64, 0); Q is near-degenerate")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _log_mgf(mid, vals, probs) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def random_walk_experiment(
    model: GridModel,
    channel: ConditionalPmf,
    s_n: int,
    n: int,
    trials: int,
    base_seed: int = 0,
) -> WalkResult:
    """Empirical battery-depletion probability against its analytic bound.

    After a storage phase of ``s_n`` slots the battery holds about
    s_n * mean(E); depletion during hiding means the balance walk
    S_t = sum Q_i drops below -s_n * mean(E). The exponential bound
    exp(-r* . threshold) from the walk's log-MGF root r* must dominate the
    empirical crossing fraction (checked here, violation raises).
    """
    vals, probs = _q_distribution(model, channel)
    mean_q = float(np.dot(vals, probs))
    if mean_q <= 0:
        raise ValueError("E[Q] must be positive: mean draw below mean generation")
    threshold = -s_n * model.p_E.mean()

    if vals.min() >= 0:
        wald_bound = 0.0  # the walk never decreases; crossing is impossible
    else:
        r_star = _wald_exponent(vals, probs)
        wald_bound = math.exp(-r_star * threshold)

    cdf = np.cumsum(probs)
    cdf[-1] = max(cdf[-1], 1.0)
    crossings = _kernels.walk_crossings(
        vals, cdf, n, trials, threshold, (base_seed % (2**31 - 1)) or 1
    )
    fraction = crossings / trials
    sigma = math.sqrt(max(fraction * (1.0 - fraction), 0.0) / trials)
    if fraction > wald_bound + 3.0 * sigma + 1e-12:
        raise RuntimeError(
            f"empirical crossing fraction {fraction} exceeds the bound {wald_bound}"
        )
    return WalkResult(
        crossing_fraction=fraction, wald_bound=wald_bound, s_n=s_n, trials=trials
    )
