"""Replay storage: FIFO ring buffers and the two transition record types."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class EncWindow:
    """Truncated-BPTT window: detached start state plus the inputs that led
    from it to the encoding being trained."""

    h0: np.ndarray
    c0: np.ndarray
    inputs: tuple


@dataclass(frozen=True)
class Transition:
    """Self-learning replay record (executed action, whatever the mode was)."""

    m: np.ndarray
    action: int
    reward: float
    m_next: np.ndarray
    done: bool
    window: EncWindow


@dataclass(frozen=True)
class StudentTransition:
    """Mode-policy replay record; `w` is the continuous mode action."""

    m: np.ndarray
    w: float
    reward: float
    m_next: np.ndarray


class RingBuffer:
    """Fixed-capacity FIFO: once full, each insert evicts the oldest item."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._items: list = []
        self._cursor = 0

    def append(self, item) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
            self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, rng: np.random.Generator, k: int) -> list:
        idx = rng.integers(0, len(self._items), size=k)
        return [self._items[i] for i in idx]

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int):
        return self._items[i]

    def __iter__(self):
        return iter(self._items)
