"""Simulation and analysis of the three-kick Rydberg controlled-phase gate."""

from rydkick.gate import (GateOutcome, GateParams, MotionalDensity, ValidityReport,
                          check_validity, entropy, fidelity_pure, fidelity_state,
                          fidelity_thermal, iterate_cycles, run_gate)
from rydkick.phasespace import build_schedule, phase_budget, solve_kick_time
from rydkick.physpar import DipoleOrientation, PhysicalConfig, derive_scales

__version__ = "0.1.0"

__all__ = [
    "DipoleOrientation", "GateOutcome", "GateParams", "MotionalDensity", "PhysicalConfig",
    "ValidityReport", "build_schedule", "check_validity", "derive_scales", "entropy",
    "fidelity_pure", "fidelity_state", "fidelity_thermal", "iterate_cycles", "phase_budget",
    "run_gate", "solve_kick_time",
]
