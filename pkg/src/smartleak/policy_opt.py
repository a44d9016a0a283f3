"""Parameter search for the battery policies, driven by the simulation
estimator.

Three searches match the three parameterized policy families: a scalar
grid scan for the battery-independent masking probability, a finite-
difference stochastic gradient descent for the battery-conditioned
vector, and a constrained grid search for the three-level policy. All
evaluations share one seed list (common random numbers), so comparisons
between candidates see the same demand/generation draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GridModel
from .leakage_sim import LeakageEstimate, estimate_leakage
from .policies import BatteryConditioned, BatteryIndependent, ThreeLevel


@dataclass(frozen=True)
class ScanPvResult:
    best_p_v: float
    best_leakage: float
    best_std_error: float
    curve: tuple[tuple[float, float, float], ...]  # (p_v, leakage, std_error)


@dataclass(frozen=True)
class SgdOptions:
    probes: int = 16
    perturbation_radius: float = 0.05
    learning_rate: float = 0.2
    stop_threshold: float = 1e-3
    max_iterations: int = 200


@dataclass(frozen=True)
class SgdResult:
    p_v_vec: tuple[float, ...]
    leakage: float
    std_error: float
    converged: bool
    iterations: int
    # (iteration, params, leakage, std_error, best_so_far)
    trace: tuple[tuple[int, tuple[float, ...], float, float, float], ...]


@dataclass(frozen=True)
class ThreeLevelResult:
    policy: ThreeLevel
    leakage: float
    std_error: float
    evaluations: int


def _grid(step: float) -> list[float]:
    k = int(round(1.0 / step))
    pts = [i * step for i in range(k + 1)]
    if pts[-1] < 1.0:
        pts.append(1.0)
    pts[-1] = 1.0
    return pts


def scan_pv(
    model: GridModel,
    grid_step: float = 0.1,
    n: int = 100_000,
    seeds: int = 5,
    base_seed: int = 0,
) -> ScanPvResult:
    """Scan the battery-independent masking probability on a uniform grid.

    Ties go to the larger p_v (the grid is scanned upward and a candidate
    replaces the incumbent whenever it is at least as good).
    """
    if not 0.0 < grid_step <= 0.5:
        raise ValueError("grid_step must lie in (0, 0.5]")
    curve = []
    best = None
    for p_v in _grid(grid_step):
        est = estimate_leakage(model, BatteryIndependent(p_v), n, seeds, base_seed)
        curve.append((p_v, est.bits_per_slot, est.std_error))
        if best is None or est.bits_per_slot <= best[1]:
            best = (p_v, est.bits_per_slot, est.std_error)
    return ScanPvResult(
        best_p_v=best[0],
        best_leakage=best[1],
        best_std_error=best[2],
        curve=tuple(curve),
    )


def sgd_battery_conditioned(
    model: GridModel,
    init,
    opts: SgdOptions = SgdOptions(),
    n: int = 100_000,
    seeds: int = 5,
    base_seed: int = 0,
) -> SgdResult:
    """Least-squares finite-difference gradient descent on the per-level
    masking probabilities.

    Each iteration perturbs the vector uniformly within the perturbation
    radius, fits a linear model to the probe leakages to estimate the
    gradient, and takes a projected (clamped to [0,1]) step. Stops when
    the leakage improvement between consecutive iterates drops below the
    threshold; always reports the best iterate seen.
    """
    p = np.clip(np.asarray(init, dtype=float), 0.0, 1.0)
    if model.soc_states != p.size:
        raise ValueError("init length must be battery capacity + 1")

    def evaluate(vec) -> LeakageEstimate:
        return estimate_leakage(
            model, BatteryConditioned(tuple(vec)), n, seeds, base_seed
        )

    est = evaluate(p)
    prev_leak = est.bits_per_slot
    best = (est.bits_per_slot, tuple(p), est.std_error)
    trace = [(0, tuple(p), est.bits_per_slot, est.std_error, best[0])]
    converged = False
    it = 0
    for it in range(1, opts.max_iterations + 1):
        rng = np.random.default_rng([base_seed, 7919, it])
        deltas = rng.uniform(
            -opts.perturbation_radius, opts.perturbation_radius, size=(opts.probes, p.size)
        )
        probes = np.clip(p[None, :] + deltas, 0.0, 1.0)
        effective = probes - p[None, :]
        leaks = np.array([evaluate(row).bits_per_slot for row in probes])
        design = np.hstack([np.ones((opts.probes, 1)), effective])
        coef, *_ = np.linalg.lstsq(design, leaks, rcond=None)
        grad = coef[1:]
        p = np.clip(p - opts.learning_rate * grad, 0.0, 1.0)
        est = evaluate(p)
        if est.bits_per_slot < best[0]:
            best = (est.bits_per_slot, tuple(p), est.std_error)
        trace.append((it, tuple(p), est.bits_per_slot, est.std_error, best[0]))
        if prev_leak - est.bits_per_slot < opts.stop_threshold:
            converged = True
            break
        prev_leak = est.bits_per_slot
    return SgdResult(
        p_v_vec=best[1],
        leakage=best[0],
        std_error=best[2],
        converged=converged,
        iterations=it,
        trace=tuple(trace),
    )


def search_three_level(
    model: GridModel,
    grid_step: float = 0.5,
    n: int = 20_000,
    seeds: int = 3,
    base_seed: int = 0,
) -> ThreeLevelResult:
    """Grid search over the three-level policy parameters.

    The grid covers every (full, half) probability pair with sum <= 1 per
    regime; ``grid_step`` must divide 1.
    """
    k = round(1.0 / grid_step)
    if abs(k * grid_step - 1.0) > 1e-12:
        raise ValueError("grid_step must divide 1")
    pairs = [
        (i * grid_step, j * grid_step)
        for i in range(k + 1)
        for j in range(k + 1 - i)
    ]
    best = None
    count = 0
    for pair0 in pairs:
        for pair1 in pairs:
            for pair2 in pairs:
                policy = ThreeLevel(
                    p_full=(pair0[0], pair1[0], pair2[0]),
                    p_half=(pair0[1], pair1[1], pair2[1]),
                )
                est = estimate_leakage(model, policy, n, seeds, base_seed)
                count += 1
                if best is None or est.bits_per_slot < best[1]:
                    best = (policy, est.bits_per_slot, est.std_error)
    return ThreeLevelResult(
        policy=best[0], leakage=best[1], std_error=best[2], evaluations=count
    )
