"""Closed-form leakage rates for the all-binary scenario.

Demand, generation and grid draw are all Bernoulli (appliance on/off).
``q_x`` is the probability of unit demand, ``p_e`` the probability of a
unit of renewable generation, and ``p_v`` the probability that available
energy is actually used to mask a unit demand.
"""

from __future__ import annotations

import math

from .core import NORMALIZATION_TOL, binary_entropy


def _check_unit(name: str, value: float) -> float:
    if value < -NORMALIZATION_TOL or value > 1.0 + NORMALIZATION_TOL:
        raise ValueError(f"{name}={value} outside [0,1]")
    return min(max(value, 0.0), 1.0)


def leak_inf_battery(p_e: float, q_x: float) -> float:
    """Minimum leakage with unbounded storage and unit peak draw.

    Zero whenever generation keeps up with demand (p_e >= q_x); otherwise
    the masking budget p_e is fully spent and the leakage is

        p_e log2 p_e - q_x log2 q_x - (1 - q_x + p_e) log2 (1 - q_x + p_e).
    """
    p_e = _check_unit("p_e", p_e)
    q_x = _check_unit("q_x", q_x)
    if p_e >= q_x:
        return 0.0

    def xlog2(v):
        return v * math.log2(v) if v > 0.0 else 0.0

    return xlog2(p_e) - xlog2(q_x) - xlog2(1.0 - q_x + p_e)


def leak_zero_unknown(p_e: float, p_v: float, q_x: float) -> float:
    """Leakage with no battery when the utility cannot see the generation.

    A unit demand is masked whenever a unit was generated (prob p_e) and
    the policy chooses to use it (prob p_v):

        h(1 - q_x + q_x p_e p_v) - q_x h(p_e p_v).
    """
    p_e = _check_unit("p_e", p_e)
    p_v = _check_unit("p_v", p_v)
    q_x = _check_unit("q_x", q_x)
    m = p_e * p_v
    return binary_entropy(1.0 - q_x + q_x * m) - q_x * binary_entropy(m)


def optimal_pv() -> float:
    """Masking probability minimizing the zero-battery leakage: always 1."""
    return 1.0


def leak_zero_known(p_e: float, q_x: float) -> float:
    """Leakage with no battery when the utility observes the generation.

    Slots with generation leak nothing, slots without leak everything:
    (1 - p_e) h(q_x).
    """
    p_e = _check_unit("p_e", p_e)
    q_x = _check_unit("q_x", q_x)
    return (1.0 - p_e) * binary_entropy(q_x)
