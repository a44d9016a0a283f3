"""smartleak: information-leakage analysis of smart-meter energy
management backed by renewable generation and battery storage."""

from .core import (
    INFINITE,
    ConditionalPmf,
    GridModel,
    Pmf,
    PpfResult,
    binary_entropy,
    entropy,
    expected_battery_draw,
    mutual_information,
)
from .leakage_sim import LeakageEstimate, WalkResult
from .policies import (
    BatteryConditioned,
    BatteryIndependent,
    BestEffort,
    Policy,
    SimState,
    StoreAndHide,
    ThreeLevel,
)
from .zero_battery import StateChannel

__all__ = [
    "INFINITE",
    "ConditionalPmf",
    "GridModel",
    "Pmf",
    "PpfResult",
    "LeakageEstimate",
    "WalkResult",
    "StateChannel",
    "BatteryConditioned",
    "BatteryIndependent",
    "BestEffort",
    "Policy",
    "SimState",
    "StoreAndHide",
    "ThreeLevel",
    "binary_entropy",
    "entropy",
    "expected_battery_draw",
    "mutual_information",
]

__version__ = "0.1.0"
