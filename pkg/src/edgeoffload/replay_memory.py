"""Fixed-capacity ring buffer of transitions with uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

DEFAULT_CAPACITY = 4096


class StepContext(NamedTuple):
    """Raw inputs of the one-step cost, kept so the reward can be re-priced."""

    prev: int
    inbound_mb: Optional[float]  # None for the first task of a workflow
    compute_demand: float
    data_size: float


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool
    context: Optional[StepContext] = None


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminal: np.ndarray
    index: np.ndarray  # ring slots the rows came from


class EmptyMemoryError(RuntimeError):
    pass


class ReplayMemory:
    """
    Stores up to ``capacity`` transitions; once full, each push overwrites the
    oldest one.  Every push gets a sequence number so eviction order can be
    audited.
    """

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.state_dim = state_dim
        self._states = np.zeros((capacity, state_dim))
        self._next = np.zeros((capacity, state_dim))
        self._actions = np.zeros(capacity, dtype=np.intp)
        self._rewards = np.zeros(capacity)
        self._terminal = np.zeros(capacity, dtype=bool)
        self._seq = np.zeros(capacity, dtype=np.int64)
        self._context = [None] * capacity
        self._size = 0
        self.pushes = 0

    def __len__(self):
        return self._size

    def clear(self):
        self._size = 0
        self.pushes = 0

    def push(self, t: Transition) -> None:
        if t.action not in (0, 1, 2):
            raise ValueError(f"action must be 0, 1 or 2, got {t.action!r}")
        if len(t.state) != self.state_dim or len(t.next_state) != self.state_dim:
            raise ValueError("state dimension does not match memory")
        slot = self.pushes % self.capacity
        self._states[slot] = t.state
        self._next[slot] = t.next_state
        self._actions[slot] = t.action
        self._rewards[slot] = t.reward
        self._terminal[slot] = t.terminal
        self._seq[slot] = self.pushes
        self._context[slot] = t.context
        self.pushes += 1
        self._size = min(self._size + 1, self.capacity)

    def sequence_numbers(self) -> np.ndarray:
        """Sequence numbers currently held, oldest first."""
        return np.sort(self._seq[: self._size])

    def context(self, slot: int) -> Optional[StepContext]:
        return self._context[slot]

    def _draw(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self._size == 0:
            raise EmptyMemoryError("cannot sample from an empty memory")
        return rng.integers(0, self._size, size=batch_size)

    def sample_arrays(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform draw with replacement, returned as stacked arrays (copies)."""
        idx = self._draw(batch_size, rng)
        return Batch(
            self._states[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next[idx],
            self._terminal[idx],
            idx,
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> list:
        """Same draw as ``sample_arrays``, as a list of ``Transition``."""
        b = self.sample_arrays(batch_size, rng)
        return [
            Transition(b.states[k], int(b.actions[k]), float(b.rewards[k]), b.next_states[k],
                       bool(b.terminal[k]), self._context[b.index[k]])
            for k in range(batch_size)
        ]
