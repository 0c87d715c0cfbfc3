"""Decentralized agent: encoder, dual actor-critics, replay."""

from .core import (
    AgentConfig,
    PatAgent,
    RecurrentAgentBase,
    mode_from_probability,
    one_hot,
    unroll_window,
    values_of,
)
from .replay import EncWindow, RingBuffer, StudentTransition, Transition

__all__ = [
    "AgentConfig", "PatAgent", "RecurrentAgentBase", "mode_from_probability", "one_hot",
    "unroll_window", "values_of",
    "EncWindow", "RingBuffer", "StudentTransition", "Transition",
]
