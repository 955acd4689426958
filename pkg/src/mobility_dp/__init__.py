"""Dynamic opportunity allocation under intergenerational mobility."""

from __future__ import annotations

from .analytic import regime_boundaries, sigma_region_value, tipping_point
from .errors import ConfigError, ModelError
from .model import ModelParams, admissible_range, paired_threshold, period_reward, transition
from .simulator import McConfig, mc_rollout, rollout
from .solver import Solution, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "McConfig", "ModelError", "ModelParams", "Solution", "SolverConfig",
    "admissible_range", "mc_rollout", "paired_threshold", "period_reward", "regime_boundaries",
    "rollout", "sigma_region_value", "solve", "tipping_point", "transition",
]
