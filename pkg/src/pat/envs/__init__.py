"""Grid environments: spec, engine, exact-solution oracle."""

from .grid import EnvState, GridGame, StepOutcome, render, reset, step, treasure_total
from .oracle import oracle_optimal_return
from .spec import (
    COOP_NAV,
    GRID_TREASURE,
    KINDS,
    MOVING_TREASURE,
    N_ACTIONS,
    TREASURE_KINDS,
    EnvSpec,
    action_space,
    observation_length,
)

__all__ = [
    "EnvState", "GridGame", "StepOutcome", "render", "reset", "step", "treasure_total",
    "oracle_optimal_return",
    "COOP_NAV", "GRID_TREASURE", "KINDS", "MOVING_TREASURE", "N_ACTIONS",
    "TREASURE_KINDS", "EnvSpec", "action_space", "observation_length",
]
