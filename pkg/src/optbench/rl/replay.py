from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring of transitions, sampled uniformly with replacement."""

    def __init__(self, capacity: int, seed: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.rng = np.random.default_rng(seed)
        self._next = 0
        self._size = 0
        self._s = None

    def __len__(self) -> int:
        return self._size

    def _allocate(self, obs_shape):
        self._s = np.zeros((self.capacity,) + obs_shape)
        self._s_next = np.zeros((self.capacity,) + obs_shape)
        self._a = np.zeros(self.capacity, dtype=np.int64)
        self._r = np.zeros(self.capacity)
        self._done = np.zeros(self.capacity, dtype=bool)

    def push(self, t: Transition) -> None:
        if self._s is None:
            self._allocate(np.shape(t.s))
        i = self._next
        self._s[i] = t.s
        self._s_next[i] = t.s_next
        self._a[i] = t.a
        self._r[i] = t.r
        self._done[i] = t.done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def __getitem__(self, k: int) -> Transition:
        """k-th oldest stored transition."""
        if not 0 <= k < self._size:
            raise IndexError(k)
        i = (self._next - self._size + k) % self.capacity
        return Transition(self._s[i].copy(), int(self._a[i]), float(self._r[i]), self._s_next[i].copy(), bool(self._done[i]))

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Arrays ``(s, a, r, s_next, done)`` for ``n`` uniformly drawn transitions."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = self.rng.integers(0, self._size, size=n)
        return self._s[idx], self._a[idx], self._r[idx], self._s_next[idx], self._done[idx]
