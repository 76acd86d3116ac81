"""Delayed state histories stored as fixed-length ring buffers.

A window holds the states x(k+s) for offsets s in {-tau, ..., 0}. Offset 0 is
the current state and offset -tau the oldest one still needed by the dynamics.
"""

import math
from collections.abc import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike

from delay_etc.errors import RejectedInputError


def euclidean_norm(vector: ArrayLike) -> float:
    """Euclidean norm computed without squaring, so entries below 1e-154 do not underflow."""
    return math.hypot(*np.ravel(np.asarray(vector, dtype=float)))


def row_norms(rows: ArrayLike) -> np.ndarray:
    """euclidean_norm of every row of a 2-D array."""
    return np.array([euclidean_norm(row) for row in np.atleast_2d(rows)])


def _as_state(value: ArrayLike) -> np.ndarray:
    state = np.atleast_1d(np.asarray(value, dtype=float))
    if state.ndim != 1:
        raise RejectedInputError(f"State must be a vector, got shape {state.shape}")
    return state


class HistoryWindow:
    """The delayed state x_k, i.e. states at offsets -tau..0.

    The buffer is a (tau + 1, dim) array used circularly: ``_head`` is the row
    holding offset 0, and offset s lives at row ``(_head + s) % (tau + 1)``.
    ``shifted`` returns a new window; ``push`` advances in place and is meant
    for a buffer owned by a single simulation run.

    Attributes:
        tau: Maximum delay.
        dim: State dimension.
    """

    __slots__ = ("_buffer", "_head", "tau", "dim")

    def __init__(self, states: Sequence[ArrayLike]) -> None:
        """Build a window from states ordered from offset -tau to offset 0.

        Args:
            states: tau + 1 state vectors (scalars are treated as 1-vectors).

        Raises:
            RejectedInputError: If no states are given or dimensions differ.
        """
        if len(states) == 0:
            raise RejectedInputError("A history window needs at least one state")
        rows = [_as_state(s) for s in states]
        dim = rows[0].shape[0]
        if any(r.shape[0] != dim for r in rows):
            raise RejectedInputError("All states in a window must share one dimension")
        self._buffer = np.array(rows, dtype=float)
        self._head = len(rows) - 1
        self.tau = len(rows) - 1
        self.dim = dim

    @classmethod
    def constant(cls, state: ArrayLike, tau: int) -> "HistoryWindow":
        """Window whose every offset holds ``state`` (a constant initial function)."""
        if tau < 0:
            raise RejectedInputError(f"tau must be nonnegative, got {tau}")
        vec = _as_state(state)
        return cls([vec] * (tau + 1))

    @classmethod
    def zeros(cls, dim: int, tau: int) -> "HistoryWindow":
        return cls.constant(np.zeros(dim), tau)

    def __len__(self) -> int:
        return self.tau + 1

    def _row(self, offset: int) -> int:
        if not -self.tau <= offset <= 0:
            raise RejectedInputError(
                f"Offset {offset} outside window range [-{self.tau}, 0]"
            )
        return (self._head + offset) % (self.tau + 1)

    def __getitem__(self, offset: int) -> np.ndarray:
        view = self._buffer[self._row(offset)]
        view.flags.writeable = False
        return view

    def __iter__(self) -> Iterator[np.ndarray]:
        for offset in range(-self.tau, 1):
            yield self[offset]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HistoryWindow):
            return NotImplemented
        return self.tau == other.tau and np.array_equal(self.states(), other.states())

    def __repr__(self) -> str:
        body = ", ".join(
            f"{s}: {self[s].tolist()}" for s in range(-self.tau, 1)
        )
        return f"HistoryWindow({{{body}}})"

    def states(self) -> np.ndarray:
        """Copy of the states as a (tau + 1, dim) array, oldest first."""
        order = [(self._head + s) % (self.tau + 1) for s in range(-self.tau, 1)]
        return self._buffer[order].copy()

    @property
    def current(self) -> np.ndarray:
        return self[0]

    @property
    def window_norm(self) -> float:
        """Max Euclidean norm over all offsets."""
        return float(np.max(row_norms(self._buffer)))

    @property
    def past_norm(self) -> float:
        """Max Euclidean norm over offsets s != 0 (0 when tau = 0)."""
        if self.tau == 0:
            return 0.0
        past = np.delete(self._buffer, self._head, axis=0)
        return float(np.max(row_norms(past)))

    def copy(self) -> "HistoryWindow":
        clone = HistoryWindow.__new__(HistoryWindow)
        clone._buffer = self._buffer.copy()
        clone._head = self._head
        clone.tau = self.tau
        clone.dim = self.dim
        return clone

    def scaled(self, factor: float) -> "HistoryWindow":
        clone = self.copy()
        clone._buffer *= factor
        return clone

    def push(self, new_state: ArrayLike) -> None:
        """Advance in place: drop offset -tau and store ``new_state`` at offset 0.

        Raises:
            RejectedInputError: If ``new_state`` has the wrong dimension.
        """
        state = _as_state(new_state)
        if state.shape[0] != self.dim:
            raise RejectedInputError(
                f"New state has dimension {state.shape[0]}, window expects {self.dim}"
            )
        self._head = (self._head + 1) % (self.tau + 1)
        self._buffer[self._head] = state

    def shifted(self, new_state: ArrayLike) -> "HistoryWindow":
        """Return the next window x_{k+1} without touching this one."""
        clone = self.copy()
        clone.push(new_state)
        return clone


def shift(window: HistoryWindow, new_state: ArrayLike) -> HistoryWindow:
    """Index shift x_k -> x_{k+1}: drop offset -tau, append ``new_state`` at 0."""
    return window.shifted(new_state)
