"""Fixed-capacity FIFO replay memory with uniform minibatch sampling."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ContractError, InsufficientExperience


class Transition(NamedTuple):
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    terminal: bool


class Batch(NamedTuple):
    """Column-stacked transitions; ``terminal`` is a float 0/1 mask."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    terminal: np.ndarray

    def __len__(self):
        return len(self.r)


def stack(transitions) -> Batch:
    return Batch(
        np.array([t.s for t in transitions], dtype=float),
        np.array([t.a for t in transitions], dtype=float),
        np.array([t.r for t in transitions], dtype=float),
        np.array([t.s_next for t in transitions], dtype=float),
        np.array([t.terminal for t in transitions], dtype=float),
    )


class ReplayBuffer:
    """Ring buffer over preallocated arrays.

    Once full, each push overwrites the oldest slot. ``transitions()``
    returns the contents oldest-first.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1 or state_dim < 1 or action_dim < 1:
            raise ContractError("capacity and dimensions must be positive")
        self.capacity = capacity
        self.state_dim = state_dim
        self.action_dim = action_dim
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity, action_dim))
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._done = np.zeros(capacity)
        self._cursor = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, t: Transition) -> None:
        s = np.asarray(t.s, dtype=float)
        a = np.asarray(t.a, dtype=float)
        s2 = np.asarray(t.s_next, dtype=float)
        if s.shape != (self.state_dim,) or s2.shape != (self.state_dim,):
            raise ContractError(f"state shape {s.shape}/{s2.shape}, expected ({self.state_dim},)")
        if a.shape != (self.action_dim,):
            raise ContractError(f"action shape {a.shape}, expected ({self.action_dim},)")
        r = float(t.r)
        # a sum is non-finite iff some entry is, barring overflow of huge finite values
        if not np.isfinite(r + s.sum() + a.sum() + s2.sum()) and not (
                np.isfinite(r) and np.all(np.isfinite(s)) and np.all(np.isfinite(a))
                and np.all(np.isfinite(s2))):
            raise ContractError("transition contains non-finite values")
        i = self._cursor
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s2[i] = s2
        self._done[i] = float(bool(t.terminal))
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _get(self, i) -> Transition:
        return Transition(self._s[i].copy(), self._a[i].copy(), float(self._r[i]),
                          self._s2[i].copy(), bool(self._done[i]))

    def transitions(self):
        start = self._cursor if self._size == self.capacity else 0
        return [self._get((start + k) % self.capacity) for k in range(self._size)]

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if batch < 1:
            raise ContractError("batch must be positive")
        if self._size < batch:
            raise InsufficientExperience(f"{self._size} transitions stored, batch of {batch} requested")
        return rng.choice(self._size, size=batch, replace=False)

    def sample(self, batch: int, rng: np.random.Generator):
        """Uniform draw of ``batch`` distinct stored transitions."""
        return [self._get(i) for i in self.sample_indices(batch, rng)]

    def sample_batch(self, batch: int, rng: np.random.Generator) -> Batch:
        """Same draw as `sample`, returned as stacked arrays."""
        idx = self.sample_indices(batch, rng)
        return Batch(self._s[idx], self._a[idx], self._r[idx], self._s2[idx], self._done[idx])

    def dump(self, path) -> None:
        """Write the contents oldest-first as a CSV trace (debugging aid)."""
        sd, ad = self.state_dim, self.action_dim
        header = ([f"s{k}" for k in range(sd)] + [f"a{k}" for k in range(ad)] + ["r"]
                  + [f"s_next{k}" for k in range(sd)] + ["terminal"])
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for t in self.transitions():
                row = [*t.s, *t.a, t.r, *t.s_next]
                fh.write(",".join(repr(float(x)) for x in row) + f",{int(t.terminal)}\n")
