"""Minimum single-letter leakage under average and peak draw constraints.

The optimization

    minimize I(X;Y)  over channels with  0 <= x - y <= p_hat  and
    E[X - Y] <= p_bar

is the rate-distortion problem with the per-slot battery draw as the
distortion measure. It is solved by alternating minimization at a fixed
Lagrange slope, with an outer bisection on the slope so that the achieved
average draw meets the budget. The returned channel is always feasible
(hard constraints, never penalties).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .core import ConditionalPmf, Pmf, PpfResult, entropy, mutual_information

SLOPE_MAX = 64.0  # bits per quantum; draw mass beyond this slope is ~2**-64
BISECTION_STEPS = 60
MAX_INNER_ITERATIONS = 10_000
DRAW_GAP_TOL = 1e-8  # quanta


def _support_mask(size: int, p_hat: int) -> np.ndarray:
    x = np.arange(size)
    return (x[None, :] <= x[:, None]) & (x[:, None] - x[None, :] <= p_hat)


def _run_ba(p_x: np.ndarray, mask: np.ndarray, slope: float, tol: float):
    draw = np.arange(mask.shape[0])[:, None] - np.arange(mask.shape[0])[None, :]
    weight = np.where(mask, np.exp2(-slope * np.where(mask, draw, 0)), 0.0)
    w = np.where(mask, 1.0, 0.0)
    w /= w.sum(axis=1, keepdims=True)
    leak, avg_draw, iters, conv = _kernels.ba_solve(
        p_x, weight, w, tol, MAX_INNER_ITERATIONS
    )
    return w, float(leak), float(avg_draw), int(iters), bool(conv)


def _leakage_of(p_X: Pmf, w: np.ndarray) -> float:
    return mutual_information(p_X, ConditionalPmf(w))


def ppf(
    p_X: Pmf,
    p_bar: float,
    p_hat: int,
    tol: float = 1e-9,
    backoff: float = 0.0,
) -> PpfResult:
    """Privacy-power value: least leakage given draw budgets (p_bar, p_hat).

    ``backoff`` shrinks the average budget to ``p_bar - backoff``; useful
    when a caller needs the strict inequality E[X-Y] < p_bar (default 0,
    no backoff).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if p_bar < 0:
        raise ValueError("average draw budget must be non-negative")
    if p_hat < 0 or int(p_hat) != p_hat:
        raise ValueError("peak draw must be a non-negative integer")
    target = max(p_bar - backoff, 0.0)
    size = p_X.size

    if target == 0.0:
        # No net draw allowed: with y <= x the only zero-mean-draw channel
        # is the identity.
        return PpfResult(
            leakage_bits=entropy(p_X),
            channel=ConditionalPmf.identity(size),
            achieved_avg_draw=0.0,
            iterations=0,
            converged=True,
        )

    mask = _support_mask(size, int(p_hat))
    p_x = p_X.probs

    w0, leak0, draw0, iters, conv0 = _run_ba(p_x, mask, 0.0, tol)
    if draw0 <= target:
        # Budget is slack at the support-constrained optimum.
        return PpfResult(leak0, ConditionalPmf(w0), draw0, iters, conv0)

    lo, lo_draw, lo_w = 0.0, draw0, w0
    hi = SLOPE_MAX
    w_hi, leak_hi, draw_hi, it, conv_hi = _run_ba(p_x, mask, hi, tol)
    iters += it
    if draw_hi > target:
        # Even the steepest slope draws too much; report the best effort.
        return PpfResult(leak_hi, ConditionalPmf(w_hi), draw_hi, iters, False)

    best_leak, best_w, best_draw, best_conv = leak_hi, w_hi, draw_hi, conv_hi
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        w_m, leak_m, draw_m, it, conv_m = _run_ba(p_x, mask, mid, tol)
        iters += it
        if draw_m <= target:
            hi = mid
            if leak_m <= best_leak:
                best_leak, best_w, best_draw, best_conv = leak_m, w_m, draw_m, conv_m
        else:
            lo, lo_draw, lo_w = mid, draw_m, w_m

    if target - best_draw > DRAW_GAP_TOL and lo_draw > target:
        # The slope landed on a linear stretch of the leakage-draw curve;
        # mix the two endpoint channels to spend the whole budget.
        lam = (target - best_draw) / (lo_draw - best_draw)
        lam *= 1.0 - 1e-12
        w_mix = lam * lo_w + (1.0 - lam) * best_w
        draw_mix = lam * lo_draw + (1.0 - lam) * best_draw
        leak_mix = _leakage_of(p_X, w_mix)
        if draw_mix <= target and leak_mix <= best_leak:
            best_leak, best_w, best_draw = leak_mix, w_mix, draw_mix
            best_conv = True

    gap = max(0.0, target - best_draw)
    converged = best_conv and gap < DRAW_GAP_TOL
    # A slack budget is fine too: smaller-than-target draw with no leakage
    # penalty happens when extra draw stops helping (leakage already 0).
    if not converged and best_leak <= tol:
        converged = best_conv
    return PpfResult(best_leak, ConditionalPmf(best_w), best_draw, iters, converged)


def ppf_curve(p_X: Pmf, p_hat: int, p_bar_grid) -> list[tuple[float, float]]:
    """Evaluate the leakage-vs-average-draw curve on an ascending grid."""
    grid = [float(g) for g in p_bar_grid]
    if grid != sorted(grid):
        raise ValueError("p_bar grid must be sorted ascending")
    return [(g, ppf(p_X, g, p_hat).leakage_bits) for g in grid]


def ppf_zero_known(p_X: Pmf, p_E: Pmf) -> float:
    """Leakage with no battery when the utility observes the generation.

    Each generation level e acts as both the average and the peak budget
    of a constant-rate subproblem; the leakage is the p_E-expectation of
    those values.
    """
    total = 0.0
    for e, pe in enumerate(p_E.probs):
        if pe == 0.0:
            continue
        total += pe * ppf(p_X, float(e), int(e)).leakage_bits
    return total
