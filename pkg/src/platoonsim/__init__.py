"""Deterministic co-simulation of a CACC platoon over an ITS-G5 style V2V channel."""

from .scenario import (
    LeaderProfile,
    NoiseModel,
    ProfileSegment,
    ScenarioConfig,
    compare_channels,
    mixed_profile,
    realistic_config,
    run_scenario,
    step_profile,
    sweep,
    theoretical_config,
)

__version__ = "0.1.0"

__all__ = [
    "LeaderProfile",
    "NoiseModel",
    "ProfileSegment",
    "ScenarioConfig",
    "compare_channels",
    "mixed_profile",
    "realistic_config",
    "run_scenario",
    "step_profile",
    "sweep",
    "theoretical_config",
]
