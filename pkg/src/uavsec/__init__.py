"""Worst-case secrecy-rate planner for a two-UAV transmitter/jammer team."""

from .channel import AverageRates, SlotRates, objective, slot_rates
from .planner import Plan, baseline, constant_power, fly_hover_fly, optimize
from .scenario import (
    PowerProfile,
    Scenario,
    Trajectory,
    ValidationReport,
    bundled_reference_config,
    reference_scenario,
    load_scenario,
    save_scenario,
    validate,
)

__all__ = [
    "AverageRates",
    "Plan",
    "PowerProfile",
    "Scenario",
    "SlotRates",
    "Trajectory",
    "ValidationReport",
    "baseline",
    "bundled_reference_config",
    "constant_power",
    "reference_scenario",
    "fly_hover_fly",
    "load_scenario",
    "objective",
    "optimize",
    "save_scenario",
    "slot_rates",
    "validate",
]

__version__ = "0.1.0"
