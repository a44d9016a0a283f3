"""Alphabets, probability mass functions and information primitives.

Every energy quantity in the toolkit is an integer number of energy
quanta, so all distributions live on dense integer ranges ``0..K``.
Logs are base 2 throughout; leakage values are bits per time slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Pmf entries must sum to one within this tolerance; inputs outside it are
#: rejected rather than silently renormalized.
NORMALIZATION_TOL = 1e-12

#: Sentinel for an unbounded battery.
INFINITE = math.inf


def _as_prob_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("probability vector must be 1-D and non-empty")
    if np.any(arr < 0):
        raise ValueError("probabilities must be non-negative")
    if abs(arr.sum() - 1.0) > NORMALIZATION_TOL:
        raise ValueError(f"probabilities sum to {arr.sum()!r}, not 1")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on the integer alphabet ``0..K``."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_prob_array(self.probs))

    @property
    def size(self) -> int:
        return self.probs.size

    @property
    def k_max(self) -> int:
        """Largest alphabet point (K)."""
        return self.probs.size - 1

    @property
    def alphabet(self) -> np.ndarray:
        return np.arange(self.probs.size)

    def mean(self) -> float:
        return float(np.dot(self.alphabet, self.probs))

    @staticmethod
    def bernoulli(p: float) -> "Pmf":
        """Binary pmf with ``Pr{1} = p``."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p={p} outside [0,1]")
        return Pmf(np.array([1.0 - p, p]))

    @staticmethod
    def point_mass(k: int, size: int) -> "Pmf":
        if not 0 <= k < size:
            raise ValueError("point mass outside alphabet")
        probs = np.zeros(size)
        probs[k] = 1.0
        return Pmf(probs)

    @staticmethod
    def uniform(size: int) -> "Pmf":
        return Pmf(np.full(size, 1.0 / size))

    @staticmethod
    def binomial(n: int, p: float) -> "Pmf":
        """Binomial(n, p) on ``0..n``."""
        k = np.arange(n + 1)
        probs = np.array([math.comb(n, i) for i in k], dtype=float)
        probs *= p**k * (1.0 - p) ** (n - k)
        probs /= probs.sum()
        return Pmf(probs)


@dataclass(frozen=True)
class ConditionalPmf:
    """Square channel matrix ``p(y|x)`` with output alphabet equal to the
    input alphabet (the optimal output alphabet never needs to be larger
    for discrete inputs)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("channel matrix must be square (row and column alphabets equal)")
        for row in m:
            _as_prob_array(row)
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def row(self, x: int) -> Pmf:
        return Pmf(self.matrix[x])

    @staticmethod
    def identity(size: int) -> "ConditionalPmf":
        return ConditionalPmf(np.eye(size))


@dataclass(frozen=True)
class GridModel:
    """One problem instance: demand and generation statistics plus the
    storage and peak-draw limits.

    ``b_max`` is an integer battery capacity in quanta, or ``INFINITE``.
    ``p_hat`` caps the per-slot draw from the renewable side.
    """

    p_X: Pmf
    p_E: Pmf
    b_max: float
    p_hat: int

    def __post_init__(self):
        if self.p_X.k_max < 1:
            raise ValueError("demand alphabet must contain at least {0,1}")
        if self.p_hat < 1 or int(self.p_hat) != self.p_hat:
            raise ValueError("peak draw must be a positive integer")
        if not (self.b_max == INFINITE or (self.b_max >= 0 and int(self.b_max) == self.b_max)):
            raise ValueError("battery capacity must be a non-negative integer or INFINITE")
        if self.p_E.mean() > self.p_hat + NORMALIZATION_TOL:
            raise ValueError("average renewable rate exceeds the peak draw limit")

    @property
    def infinite_battery(self) -> bool:
        return self.b_max == INFINITE

    @property
    def soc_states(self) -> int:
        """Number of battery state-of-charge values (finite capacity only)."""
        if self.infinite_battery:
            raise ValueError("unbounded battery has no finite state space")
        return int(self.b_max) + 1


@dataclass(frozen=True)
class PpfResult:
    """Minimum-leakage value with the channel that attains it."""

    leakage_bits: float
    channel: ConditionalPmf
    achieved_avg_draw: float
    iterations: int
    converged: bool


def entropy(p: Pmf) -> float:
    """Shannon entropy in bits, with the 0·log 0 := 0 convention."""
    probs = p.probs
    nz = probs[probs > 0]
    return float(-np.dot(nz, np.log2(nz)))


def binary_entropy(p: float) -> float:
    """h(p) = -p log2 p - (1-p) log2 (1-p), clamped against fp roundoff."""
    if p < -NORMALIZATION_TOL or p > 1.0 + NORMALIZATION_TOL:
        raise ValueError(f"argument {p} outside [0,1]")
    p = min(max(p, 0.0), 1.0)
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p))


def output_marginal(p_X: Pmf, channel: ConditionalPmf) -> Pmf:
    if channel.size != p_X.size:
        raise ValueError("channel and input alphabet sizes differ")
    return Pmf(p_X.probs @ channel.matrix)


def mutual_information(p_X: Pmf, channel: ConditionalPmf) -> float:
    """I(X;Y) in bits for input ``p_X`` pushed through ``channel``.

    Computed as H(Y) - H(Y|X); non-negative up to fp noise (clamped at 0).
    """
    if channel.size != p_X.size:
        raise ValueError("channel and input alphabet sizes differ")
    w = channel.matrix
    q = p_X.probs @ w
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * np.log2(np.where(w > 0, w, 1.0) / np.where(q > 0, q, 1.0)), 0.0)
    mi = float(np.dot(p_X.probs, terms.sum(axis=1)))
    return max(mi, 0.0)


def expected_battery_draw(p_X: Pmf, channel: ConditionalPmf) -> float:
    """Average per-slot draw E[X-Y] induced by the channel, in quanta.

    The channel must never emit more than the demand (y <= x).
    """
    if channel.size != p_X.size:
        raise ValueError("channel and input alphabet sizes differ")
    w = channel.matrix
    upper = np.triu(w, k=1)  # entries with y > x
    if np.any(upper > 0):
        raise ValueError("channel puts mass on y > x")
    x = np.arange(channel.size)
    draw = x[:, None] - x[None, :]
    return float(np.dot(p_X.probs, (w * draw).sum(axis=1)))
