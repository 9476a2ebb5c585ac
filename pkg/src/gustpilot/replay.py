"""Ring-buffer experience replay with combined (latest-included) sampling."""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

DEFAULT_CAPACITY = 1_000_000


class EmptyBufferError(LookupError):
    pass


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminal: bool


@dataclass(frozen=True)
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray

    def __len__(self):
        return len(self.rewards)

    def __getitem__(self, i):
        return Transition(self.states[i], self.actions[i], float(self.rewards[i]),
                          self.next_states[i], bool(self.terminals[i]))


class ReplayBuffer:
    """Fixed-capacity FIFO store.

    Storage grows geometrically up to ``capacity`` so a short run does not
    pay for a million-row allocation up front.
    """

    def __init__(self, capacity=DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.count = 0
        self.write_index = 0
        self._states = None
        self._actions = None
        self._rewards = None
        self._next = None
        self._terminals = None

    def __len__(self):
        return self.count

    def _allocate(self, state_dim, action_dim, rows):
        self._states = np.empty((rows, state_dim))
        self._actions = np.empty((rows, action_dim))
        self._rewards = np.empty(rows)
        self._next = np.empty((rows, state_dim))
        self._terminals = np.empty(rows, dtype=bool)

    def _grow(self):
        rows = min(self.capacity, max(1024, 2 * len(self._rewards)))
        old = (self._states, self._actions, self._rewards, self._next, self._terminals)
        self._allocate(old[0].shape[1], old[1].shape[1], rows)
        n = len(old[2])
        for new, prev in zip((self._states, self._actions, self._rewards, self._next,
                              self._terminals), old):
            new[:n] = prev

    def push(self, t):
        state = np.asarray(t.state, dtype=np.float64)
        action = np.asarray(t.action, dtype=np.float64)
        nxt = np.asarray(t.next_state, dtype=np.float64)
        if state.shape != nxt.shape or state.ndim != 1 or action.ndim != 1:
            raise ShapeError("state and next_state must be equal-length vectors")
        if self._states is None:
            self._allocate(state.shape[0], action.shape[0], min(self.capacity, 1024))
        elif state.shape[0] != self._states.shape[1] or action.shape[0] != self._actions.shape[1]:
            raise ShapeError("transition dimensions differ from earlier entries")
        if self.write_index >= len(self._rewards):
            self._grow()
        i = self.write_index
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = float(t.reward)
        self._next[i] = nxt
        self._terminals[i] = bool(t.terminal)
        self.write_index = (i + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)

    def latest_index(self):
        if self.count == 0:
            raise EmptyBufferError("replay buffer is empty")
        return (self.write_index - 1) % self.capacity

    def latest(self):
        return self[self.latest_index()]

    def __getitem__(self, i):
        if not 0 <= i < self.count:
            raise IndexError(i)
        return Transition(self._states[i].copy(), self._actions[i].copy(),
                          float(self._rewards[i]), self._next[i].copy(),
                          bool(self._terminals[i]))

    def oldest(self):
        if self.count == 0:
            raise EmptyBufferError("replay buffer is empty")
        return self[self.write_index % self.capacity if self.count == self.capacity else 0]

    def sample_cer(self, n, rng):
        """``n-1`` uniform draws (with replacement) plus the newest transition last."""
        if self.count == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        if n < 1:
            raise ValueError("batch size must be >= 1")
        idx = np.empty(n, dtype=np.int64)
        idx[:-1] = rng.integers(0, self.count, size=n - 1)
        idx[-1] = self.latest_index()
        return Batch(self._states[idx], self._actions[idx], self._rewards[idx],
                     self._next[idx], self._terminals[idx])

    def nbytes(self):
        if self._states is None:
            return 0
        return sum(a.nbytes for a in (self._states, self._actions, self._rewards,
                                      self._next, self._terminals))
