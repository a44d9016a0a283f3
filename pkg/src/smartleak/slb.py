"""Computable leakage lower bounds for continuous demand distributions.

For a continuous demand the channel optimization has no finite form, but
the classic entropy-difference bound applies: the leakage is at least the
demand's differential entropy minus the largest entropy any draw
distribution can have under the energy budgets. With an average and a
peak budget the maximizer is a truncated exponential density on
[0, p_hat]; with a peak budget alone it is uniform. All entropies here
are in bits; callers supply the demand's differential entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Pmf

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class TruncExpParams:
    """Parameters of (1/lambda0) exp(-x/lambda1) on [0, p_hat].

    ``uniform_limit`` marks the flat-density limit reached when the mean
    budget stops binding (p_bar >= p_hat/2); lambda1 is infinite there.
    """

    lambda0: float
    lambda1: float
    p_bar: float
    p_hat: float
    uniform_limit: bool = False


def _mean_given_lambda1(lam1: float, p_hat: float) -> float:
    """Mean of the truncated exponential with scale lam1 on [0, p_hat]."""
    if math.isinf(p_hat):
        return lam1
    u = p_hat / lam1
    if u < 1e-6:
        # 1/u - 1/(e^u - 1) expanded around u = 0
        return p_hat * (0.5 - u / 12.0 + u**3 / 720.0)
    if u > 700.0:
        return lam1
    return p_hat / u - p_hat / math.expm1(u)


def fit_trunc_exp(p_bar: float, p_hat: float) -> TruncExpParams:
    """Fit the max-entropy draw density for budgets (p_bar, p_hat).

    Solves the mean equation for the scale by bisection. Means at or
    above p_hat/2 leave the average budget slack, so the fit degenerates
    to the uniform density (flagged, lambda1 = inf); means at or above
    p_hat are infeasible.
    """
    if not p_bar > 0:
        raise ValueError("mean budget must be positive")
    if not p_hat > 0:
        raise ValueError("peak budget must be positive")
    if p_bar >= p_hat:
        raise ValueError("mean budget must be strictly below the peak budget")
    if math.isinf(p_hat):
        return TruncExpParams(lambda0=p_bar, lambda1=p_bar, p_bar=p_bar, p_hat=p_hat)
    if p_bar >= 0.5 * p_hat - 1e-12:
        return TruncExpParams(
            lambda0=p_hat, lambda1=math.inf, p_bar=p_bar, p_hat=p_hat, uniform_limit=True
        )

    lo = 1e-300
    hi = p_hat
    while _mean_given_lambda1(hi, p_hat) < p_bar:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("scale bisection failed to bracket the mean")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if _mean_given_lambda1(mid, p_hat) < p_bar:
            lo = mid
        else:
            hi = mid
    lam1 = 0.5 * (lo + hi)
    lam0 = lam1 * (-math.expm1(-p_hat / lam1))
    return TruncExpParams(lambda0=lam0, lambda1=lam1, p_bar=p_bar, p_hat=p_hat)


def trunc_exp_entropy_bits(params: TruncExpParams) -> float:
    """Differential entropy of the fitted density, in bits.

    Equals (ln lambda0 + p_bar/lambda1) / ln 2; the uniform limit gives
    log2(p_hat).
    """
    if params.uniform_limit:
        return math.log2(params.p_hat)
    return (math.log(params.lambda0) + params.p_bar / params.lambda1) / _LN2


def slb_avg_peak(h_X_bits: float, p_bar: float, p_hat: float) -> float:
    """Leakage lower bound under both draw budgets.

    ``h_X_bits`` is the demand's differential entropy in bits. The bound
    can be negative or exceed operational values; it is reported as-is.
    """
    params = fit_trunc_exp(p_bar, p_hat)
    return h_X_bits - trunc_exp_entropy_bits(params)


def slb_peak_only(h_X_bits: float, p_hat: float) -> float:
    """Leakage lower bound when only the peak budget binds."""
    if not p_hat > 0:
        raise ValueError("peak budget must be positive")
    return h_X_bits - math.log2(p_hat)


def slb_peak_random(h_X_bits: float, peak_dist: Pmf, support=None) -> float:
    """Expected peak-only bound over a random per-slot budget.

    ``support`` optionally maps the pmf's alphabet points to real budget
    values (defaults to the integer alphabet). A zero budget allows no
    masking, so such atoms contribute the full demand entropy.
    """
    if support is None:
        support = np.arange(peak_dist.size, dtype=float)
    else:
        support = np.asarray(support, dtype=float)
        if support.size != peak_dist.size:
            raise ValueError("support and pmf sizes differ")
    if np.any(support < 0):
        raise ValueError("peak budgets must be non-negative")
    total = 0.0
    for value, prob in zip(support, peak_dist.probs):
        if prob == 0.0:
            continue
        if value == 0.0:
            total += prob * h_X_bits
        else:
            total += prob * (h_X_bits - math.log2(value))
    return total
