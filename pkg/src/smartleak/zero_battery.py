"""Leakage minimization with no energy storage.

Without a battery the renewable level of the current slot is the whole
energy budget, so the design variable is a per-state channel p(y|x,e)
with support  x - e <= y <= x.  When the utility cannot observe the
generation, the leakage is I(X;Y) through the p_E-mixture of the state
kernels; that objective is convex in the kernels, and is minimized here
by exponentiated-gradient (mirror) descent on the product of row
simplices. The observed-generation case reduces to constant-rate
subproblems and is delegated to the privacy-power solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import privacy_power
from .core import ConditionalPmf, Pmf

MAX_ITERATIONS = 8_000
RESTARTS = 5
STALL_WINDOW = 200


@dataclass(frozen=True)
class StateChannel:
    """One channel per renewable state: kernels[e].matrix is p(y|x,e)."""

    kernels: tuple[ConditionalPmf, ...]

    def __post_init__(self):
        if not self.kernels:
            raise ValueError("at least one renewable state required")
        size = self.kernels[0].size
        for e, ch in enumerate(self.kernels):
            if ch.size != size:
                raise ValueError("all state kernels must share one alphabet")
            m = ch.matrix
            for x in range(size):
                for y in range(size):
                    if m[x, y] > 0 and (y > x or y < x - e):
                        raise ValueError(
                            f"state kernel e={e} puts mass on infeasible y={y} for x={x}"
                        )

    @property
    def size(self) -> int:
        return self.kernels[0].size

    def as_array(self) -> np.ndarray:
        return np.stack([ch.matrix for ch in self.kernels])

    def induced(self, p_E: Pmf) -> ConditionalPmf:
        """Mixture channel seen by a utility that cannot observe e."""
        if p_E.size != len(self.kernels):
            raise ValueError("p_E size does not match the number of state kernels")
        return ConditionalPmf(np.einsum("e,exy->xy", p_E.probs, self.as_array()))


class ZeroUnknownResult(NamedTuple):
    bits: float
    channel: StateChannel
    converged: bool


def _feasible_mask(n_x: int, n_e: int, p_hat: int | None) -> np.ndarray:
    """mask[e, x, y] — can y be requested when the state is (x, e)?"""
    x = np.arange(n_x)
    mask = np.zeros((n_e, n_x, n_x), dtype=bool)
    for e in range(n_e):
        cap = e if p_hat is None else min(e, p_hat)
        mask[e] = (x[None, :] <= x[:, None]) & (x[:, None] - x[None, :] <= cap)
    return mask


def _objective(k: np.ndarray, p_x: np.ndarray, p_e: np.ndarray):
    w = np.einsum("e,exy->xy", p_e, k)
    q = p_x @ w
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.where(
            w > 0, np.log2(np.where(w > 0, w, 1.0) / np.where(q > 0, q, 1.0)), 0.0
        )
    mi = float(np.dot(p_x, (w * log_ratio).sum(axis=1)))
    return max(mi, 0.0), log_ratio


def solve_zero_unknown(
    p_X: Pmf,
    p_E: Pmf,
    tol: float = 1e-6,
    p_hat: int | None = None,
    max_iterations: int = MAX_ITERATIONS,
    restarts: int = RESTARTS,
    seed: int = 0,
) -> ZeroUnknownResult:
    """Least leakage when the utility knows p_E but not the realizations.

    ``p_hat`` optionally caps the per-slot draw below the generated amount
    (the default uses the full generation as the budget).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n_x, n_e = p_X.size, p_E.size
    mask = _feasible_mask(n_x, n_e, p_hat)
    p_x, p_e = p_X.probs, p_E.probs

    best_val = np.inf
    best_k = None
    best_conv = False
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        k = np.where(mask, rng.random(mask.shape) + 0.5, 0.0)
        k /= k.sum(axis=2, keepdims=True)
        val, log_ratio = _objective(k, p_x, p_e)
        run_best, run_best_k = val, k.copy()
        stall = 0
        conv = False
        for it in range(1, max_iterations + 1):
            grad = p_e[:, None, None] * p_x[None, :, None] * log_ratio
            step = 0.5 / np.sqrt(it)
            k *= np.exp(-step * grad)
            k = np.where(mask, k, 0.0)
            k /= k.sum(axis=2, keepdims=True)
            val, log_ratio = _objective(k, p_x, p_e)
            if val < run_best - tol * 1e-3:
                run_best, run_best_k = val, k.copy()
                stall = 0
            else:
                if val < run_best:
                    run_best, run_best_k = val, k.copy()
                stall += 1
                if stall >= STALL_WINDOW:
                    conv = True
                    break
        if run_best < best_val:
            best_val, best_k, best_conv = run_best, run_best_k, conv

    kernels = tuple(ConditionalPmf(best_k[e]) for e in range(n_e))
    return ZeroUnknownResult(best_val, StateChannel(kernels), best_conv)


def solve_zero_known(p_X: Pmf, p_E: Pmf) -> float:
    """Least leakage when the utility also observes each generation level."""
    return privacy_power.ppf_zero_known(p_X, p_E)


def brute_force_zero_unknown(
    p_X: Pmf, p_E: Pmf, grid_step: float = 1e-2, p_hat: int | None = None
) -> float:
    """Exhaustive-grid oracle for tiny alphabets.

    Walks a uniform grid over the free coordinates of every state kernel
    row; exact up to the grid resolution. Cost grows combinatorially, so
    this is only for validating the solver on |X|, |E| <= 2 instances.
    """
    n_x, n_e = p_X.size, p_E.size
    mask = _feasible_mask(n_x, n_e, p_hat)
    rows = [(e, x, np.flatnonzero(mask[e, x])) for e in range(n_e) for x in range(n_x)]
    free_rows = [(e, x, ys) for e, x, ys in rows if len(ys) > 1 and p_E.probs[e] > 0]
    if len(free_rows) > 3 or any(len(ys) > 3 for _, _, ys in free_rows):
        raise ValueError("instance too large for the grid oracle")

    steps = int(round(1.0 / grid_step))

    def row_choices(n_out):
        if n_out == 2:
            for i in range(steps + 1):
                a = i * grid_step
                yield (a, 1.0 - a)
        else:
            for i in range(steps + 1):
                for j in range(steps + 1 - i):
                    a, b = i * grid_step, j * grid_step
                    yield (a, b, 1.0 - a - b)

    k = np.zeros((n_e, n_x, n_x))
    for e, x, ys in rows:
        if len(ys) == 1 or p_E.probs[e] == 0:
            # forced rows, and rows of states that never occur
            k[e, x, x] = 1.0

    best = np.inf
    p_x, p_e = p_X.probs, p_E.probs

    def recurse(idx):
        nonlocal best
        if idx == len(free_rows):
            val, _ = _objective(k, p_x, p_e)
            if val < best:
                best = val
            return
        e, x, ys = free_rows[idx]
        for probs in row_choices(len(ys)):
            k[e, x, ys] = probs
            recurse(idx + 1)
        k[e, x, ys] = 0.0

    recurse(0)
    return best
