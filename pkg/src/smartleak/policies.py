"""Executable energy-management policies and battery-state machinery.

A policy decides each slot how much of the demand ``x`` to serve from the
battery-plus-generation budget ``b + e`` instead of the grid. All policies
respect the feasibility interval

    max(0, x - min(b + e, p_hat)) <= y <= x

and the battery evolves as  b' = min(b + e - (x - y), b_max).

Five policies are implemented:

* ``BestEffort``       — follow a target channel p*(y|x) whenever the drawn
                          target is energy-feasible, otherwise pass the
                          demand through (full leakage that slot).
* ``StoreAndHide``     — pass everything through for an initial storage
                          phase, then behave like ``BestEffort``.
* ``BatteryIndependent`` — mask a unit demand with fixed probability p_v
                          whenever a quantum is available.
* ``BatteryConditioned`` — same, with p_v indexed by the battery level.
* ``ThreeLevel``       — for general alphabets: use all, half, or none of
                          the available energy with probabilities chosen
                          by comparing the budget against the demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import INFINITE, ConditionalPmf, GridModel


@dataclass(frozen=True)
class BestEffort:
    channel: ConditionalPmf


@dataclass(frozen=True)
class StoreAndHide:
    storage_len: int
    channel: ConditionalPmf

    def __post_init__(self):
        if self.storage_len < 0:
            raise ValueError("storage length must be non-negative")


@dataclass(frozen=True)
class BatteryIndependent:
    p_v: float

    def __post_init__(self):
        if not 0.0 <= self.p_v <= 1.0:
            raise ValueError(f"p_v={self.p_v} outside [0,1]")


@dataclass(frozen=True)
class BatteryConditioned:
    p_v_vec: tuple[float, ...]

    def __post_init__(self):
        vec = tuple(float(v) for v in self.p_v_vec)
        if not vec:
            raise ValueError("p_v vector must be non-empty")
        if any(not 0.0 <= v <= 1.0 for v in vec):
            raise ValueError("p_v entries must lie in [0,1]")
        object.__setattr__(self, "p_v_vec", vec)


@dataclass(frozen=True)
class ThreeLevel:
    """p_full / p_half give the full-use and half-use probabilities for the
    three budget regimes (budget below / equal to / above the demand)."""

    p_full: tuple[float, float, float]
    p_half: tuple[float, float, float]

    def __post_init__(self):
        pf = tuple(float(v) for v in self.p_full)
        ph = tuple(float(v) for v in self.p_half)
        if len(pf) != 3 or len(ph) != 3:
            raise ValueError("need three full-use and three half-use probabilities")
        for a, b in zip(pf, ph):
            if a < 0 or b < 0 or a > 1 or b > 1 or a + b > 1.0 + 1e-12:
                raise ValueError("each regime needs p_full, p_half >= 0 with sum <= 1")
        object.__setattr__(self, "p_full", pf)
        object.__setattr__(self, "p_half", ph)


Policy = BestEffort | StoreAndHide | BatteryIndependent | BatteryConditioned | ThreeLevel


@dataclass(frozen=True)
class SimState:
    """Battery level (quanta) and number of completed time slots."""

    b: int
    t: int = 0


def default_storage_len(n: int) -> int:
    """Storage-phase length ceil(sqrt(n)): grows without bound, but is
    vanishing relative to the horizon."""
    return math.ceil(math.sqrt(n))


def feasible_range(x: int, e: int, b: int, p_hat: int) -> tuple[int, int]:
    """Closed interval [y_lo, y_hi] of feasible grid requests."""
    if x < 0 or e < 0 or b < 0:
        raise ValueError("x, e, b must be non-negative")
    budget = min(b + e, p_hat)
    return max(0, x - budget), x


def battery_update(b: int, e: int, x: int, y: int, b_max) -> int:
    """Next battery level; rejects requests that would overdraw it."""
    nb = b + e - (x - y)
    if nb < 0:
        raise ValueError(f"infeasible request y={y}: battery would go to {nb}")
    if b_max == INFINITE:
        return int(nb)
    return int(min(nb, b_max))


def output_distribution(
    policy: Policy, x: int, e: int, b: int, t: int, p_hat: int
) -> list[tuple[int, float]]:
    """Exact conditional law of the grid request for one slot.

    Returns (y, probability) pairs sorted by y with zero entries dropped;
    the same table drives the scalar stepper, the chain builder and the
    exact small-horizon enumerator.
    """
    budget = min(b + e, p_hat)
    dist: dict[int, float] = {}

    def add(y, p):
        if p > 0.0:
            dist[y] = dist.get(y, 0.0) + p

    if isinstance(policy, StoreAndHide):
        if t < policy.storage_len:
            add(x, 1.0)
            return sorted(dist.items())
        policy = BestEffort(policy.channel)

    if isinstance(policy, BestEffort):
        row = policy.channel.matrix[x]
        for y_star, p in enumerate(row):
            if p <= 0.0:
                continue
            if x - y_star <= budget:
                add(y_star, p)
            else:
                add(x, p)
    elif isinstance(policy, (BatteryIndependent, BatteryConditioned)):
        if isinstance(policy, BatteryConditioned):
            p_v = policy.p_v_vec[min(b, len(policy.p_v_vec) - 1)]
        else:
            p_v = policy.p_v
        if x == 1 and budget >= 1:
            add(0, p_v)
            add(1, 1.0 - p_v)
        else:
            add(x, 1.0)
    elif isinstance(policy, ThreeLevel):
        avail = b + e
        if avail < x:
            regime = 0
        elif avail == x:
            regime = 1
        else:
            regime = 2
        pf, ph = policy.p_full[regime], policy.p_half[regime]
        v_full = min(avail, x, p_hat)
        v_half = min(avail // 2, x, p_hat)
        add(x - v_full, pf)
        add(x - v_half, ph)
        add(x, 1.0 - pf - ph)
    else:
        raise TypeError(f"unknown policy {policy!r}")
    return sorted(dist.items())


def policy_step(
    policy: Policy,
    x: int,
    e: int,
    state: SimState,
    u: float,
    p_hat: int,
    b_max,
) -> tuple[int, SimState]:
    """Apply one slot of the policy using a single uniform draw ``u``."""
    dist = output_distribution(policy, x, e, state.b, state.t, p_hat)
    acc = 0.0
    y = dist[-1][0]
    for yy, p in dist:
        acc += p
        if u < acc:
            y = yy
            break
    nb = battery_update(state.b, e, x, y, b_max)
    return y, SimState(b=nb, t=state.t + 1)


@dataclass(frozen=True)
class ChainSpec:
    """Markov chain over battery levels induced by a stationary policy.

    ``emission[b, x, y, b']`` is the joint probability of demand x, grid
    request y and next level b' from level b; ``transitions`` is its
    marginal over (x, y).
    """

    emission: np.ndarray
    transitions: np.ndarray

    @property
    def n_states(self) -> int:
        return self.emission.shape[0]

    def stationary(self) -> np.ndarray:
        """Stationary distribution of the level chain (via the eigenvector
        of the transition matrix at eigenvalue 1)."""
        vals, vecs = np.linalg.eig(self.transitions.T)
        idx = int(np.argmin(np.abs(vals - 1.0)))
        pi = np.real(vecs[:, idx])
        pi = np.abs(pi)
        return pi / pi.sum()


def build_chain(model: GridModel, policy: Policy) -> ChainSpec:
    """Exact joint kernel p(x, y, b' | b) for a time-invariant policy."""
    if model.infinite_battery:
        raise ValueError("chain construction needs a finite battery")
    if isinstance(policy, StoreAndHide):
        raise ValueError("storage-phase policies are not time-invariant")
    n_states = model.soc_states
    n_x = model.p_X.size
    emission = np.zeros((n_states, n_x, n_x, n_states))
    for b in range(n_states):
        for x, px in enumerate(model.p_X.probs):
            if px == 0.0:
                continue
            for e, pe in enumerate(model.p_E.probs):
                if pe == 0.0:
                    continue
                for y, py in output_distribution(policy, x, e, b, 0, model.p_hat):
                    b2 = battery_update(b, e, x, y, model.b_max)
                    emission[b, x, y, b2] += px * pe * py
    return ChainSpec(emission=emission, transitions=emission.sum(axis=(1, 2)))


def best_effort_channel(model: GridModel, tol: float = 1e-9, backoff: float = 0.0):
    """Target channel for the best-effort policy: the minimizer of the
    single-letter leakage at budgets (mean generation, peak draw)."""
    from . import privacy_power

    return privacy_power.ppf(model.p_X, model.p_E.mean(), model.p_hat, tol, backoff=backoff).channel


def policy_to_config(policy: Policy) -> dict:
    """Serialize a policy to the documented config mapping."""
    if isinstance(policy, BestEffort):
        return {"kind": "best_effort", "channel": policy.channel.matrix.tolist()}
    if isinstance(policy, StoreAndHide):
        return {
            "kind": "store_and_hide",
            "storage_len": policy.storage_len,
            "channel": policy.channel.matrix.tolist(),
        }
    if isinstance(policy, BatteryIndependent):
        return {"kind": "battery_independent", "p_v": policy.p_v}
    if isinstance(policy, BatteryConditioned):
        return {"kind": "battery_conditioned", "p_v_vec": list(policy.p_v_vec)}
    if isinstance(policy, ThreeLevel):
        return {"kind": "three_level", "p_full": list(policy.p_full), "p_half": list(policy.p_half)}
    raise TypeError(f"unknown policy {policy!r}")


def policy_from_config(cfg: dict, model: GridModel | None = None) -> Policy:
    """Inverse of :func:`policy_to_config`.

    ``channel: auto`` resolves the best-effort target channel from the
    model budgets (requires ``model``).
    """
    kind = cfg.get("kind")
    if kind in ("best_effort", "store_and_hide"):
        spec = cfg.get("channel", "auto")
        if isinstance(spec, str) and spec == "auto":
            if model is None:
                raise ValueError("channel: auto needs a model to resolve against")
            channel = best_effort_channel(model)
        else:
            channel = ConditionalPmf(np.asarray(spec, dtype=float))
        if kind == "best_effort":
            return BestEffort(channel)
        return StoreAndHide(storage_len=int(cfg["storage_len"]), channel=channel)
    if kind == "battery_independent":
        return BatteryIndependent(p_v=float(cfg["p_v"]))
    if kind == "battery_conditioned":
        return BatteryConditioned(p_v_vec=tuple(float(v) for v in cfg["p_v_vec"]))
    if kind == "three_level":
        return ThreeLevel(
            p_full=tuple(float(v) for v in cfg["p_full"]),
            p_half=tuple(float(v) for v in cfg["p_half"]),
        )
    raise ValueError(f"unknown policy kind {kind!r}")
