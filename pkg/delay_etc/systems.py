"""Discrete-time delay dynamics: the linear system and user-supplied nonlinear ones.

The linear system is x(k+1) = A1 x(k) + A2 x(k - tau) + B u(k) with state
feedback u = K x. Nonlinear systems are evaluation contracts: a dynamics
callable taking the history window and the held input, and a feedback law.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING, Protocol

import numpy as np
from numpy.typing import ArrayLike

from delay_etc.errors import RejectedInputError
from delay_etc.history import HistoryWindow

if TYPE_CHECKING:
    from delay_etc.tuner import LipschitzConstants

# Zero-solution checks tolerate round-off from user dynamics.
_TRIVIAL_SOLUTION_ATOL = 1e-12


class MatrixNorm(StrEnum):
    """Induced matrix norm used for the certificate and Lipschitz constants."""

    SPECTRAL = "2"
    ONE = "1"
    INF = "inf"


_NORM_ORDERS = {MatrixNorm.SPECTRAL: 2, MatrixNorm.ONE: 1, MatrixNorm.INF: np.inf}


def induced_norm(matrix: ArrayLike, norm: MatrixNorm = MatrixNorm.SPECTRAL) -> float:
    """Induced matrix norm, by default the 2-norm (largest singular value).

    The 1- and inf-norms are the largest absolute column and row sums.
    Scalars and vectors are promoted to 2-D, so a scalar gain returns its
    absolute value.

    Raises:
        RejectedInputError: If the matrix has non-finite entries.
    """
    mat = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not np.all(np.isfinite(mat)):
        raise RejectedInputError("Matrix norm requested for non-finite entries")
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, _NORM_ORDERS[MatrixNorm(norm)]))


def _frozen_matrix(value: ArrayLike, name: str) -> np.ndarray:
    mat = np.atleast_2d(np.array(value, dtype=float))
    if mat.ndim != 2:
        raise RejectedInputError(f"{name} must be a 2-D matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise RejectedInputError(f"{name} has non-finite entries")
    mat.flags.writeable = False
    return mat


class DelaySystem(Protocol):
    """What the simulator needs from a plant plus its feedback law."""

    tau: int

    @property
    def dim(self) -> int: ...

    @property
    def input_dim(self) -> int: ...

    def dynamics(self, window: HistoryWindow, u: np.ndarray) -> np.ndarray: ...

    def feedback(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class LinearDelaySystem:
    """x(k+1) = A1 x(k) + A2 x(k - tau) + B u(k), u = K x.

    Attributes:
        A1: n x n matrix acting on the current state.
        A2: n x n matrix acting on the delayed state.
        B: n x m input matrix.
        K: m x n feedback gain.
        tau: Delay; the closed-form certificate requires tau = 1.
    """

    A1: np.ndarray
    A2: np.ndarray
    B: np.ndarray
    K: np.ndarray
    tau: int = 1

    def __post_init__(self) -> None:
        for name in ("A1", "A2", "B", "K"):
            object.__setattr__(self, name, _frozen_matrix(getattr(self, name), name))
        n = self.A1.shape[0]
        if self.A1.shape != (n, n):
            raise RejectedInputError(f"A1 must be square, got {self.A1.shape}")
        if self.A2.shape != (n, n):
            raise RejectedInputError(f"A2 must be {n}x{n}, got {self.A2.shape}")
        if self.B.shape[0] != n:
            raise RejectedInputError(f"B must have {n} rows, got {self.B.shape}")
        m = self.B.shape[1]
        if self.K.shape != (m, n):
            raise RejectedInputError(f"K must be {m}x{n}, got {self.K.shape}")
        if self.tau < 0:
            raise RejectedInputError(f"tau must be nonnegative, got {self.tau}")

    @property
    def dim(self) -> int:
        return self.A1.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B.shape[1]

    @property
    def bk(self) -> np.ndarray:
        return self.B @ self.K

    @property
    def closed_loop(self) -> np.ndarray:
        """A1 + BK, the current-state matrix under undelayed feedback."""
        return self.A1 + self.bk

    def dynamics(self, window: HistoryWindow, u: np.ndarray) -> np.ndarray:
        return eval_linear(self, window, u)

    def feedback(self, x: np.ndarray) -> np.ndarray:
        return self.K @ x


def eval_linear(system: LinearDelaySystem, window: HistoryWindow, u: ArrayLike) -> np.ndarray:
    """Evaluate A1 x(k) + A2 x(k - tau) + B u.

    Raises:
        RejectedInputError: If the window or input dimensions do not match.
    """
    if window.tau != system.tau or window.dim != system.dim:
        raise RejectedInputError(
            f"Window (tau={window.tau}, dim={window.dim}) does not match system "
            f"(tau={system.tau}, dim={system.dim})"
        )
    u_vec = np.atleast_1d(np.asarray(u, dtype=float))
    if u_vec.shape != (system.input_dim,):
        raise RejectedInputError(
            f"Input has shape {u_vec.shape}, expected ({system.input_dim},)"
        )
    return system.A1 @ window[0] + system.A2 @ window[-system.tau] + system.B @ u_vec


@dataclass(frozen=True)
class NonlinearDelaySystem:
    """A user-supplied plant with a declared Lipschitz structure.

    Attributes:
        dynamics: (window, input) -> next state; must map (0, 0) to 0.
        feedback: state -> input; must map 0 to 0.
        tau: Maximum delay the dynamics reads.
        dim: State dimension n.
        input_dim: Input dimension m.
        lipschitz: Constants the user vouches for (never estimated here).
    """

    dynamics: Callable[[HistoryWindow, np.ndarray], np.ndarray]
    feedback: Callable[[np.ndarray], np.ndarray]
    tau: int
    dim: int
    input_dim: int
    lipschitz: LipschitzConstants | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.tau < 0 or self.dim < 1 or self.input_dim < 1:
            raise RejectedInputError(
                f"Invalid sizes tau={self.tau}, dim={self.dim}, input_dim={self.input_dim}"
            )
        zero_window = HistoryWindow.zeros(self.dim, self.tau)
        zero_input = np.zeros(self.input_dim)
        at_rest = np.atleast_1d(np.asarray(self.dynamics(zero_window, zero_input), dtype=float))
        if at_rest.shape != (self.dim,) or not np.allclose(
            at_rest, 0.0, atol=_TRIVIAL_SOLUTION_ATOL
        ):
            raise RejectedInputError("Dynamics must satisfy f(0, 0) = 0")
        held = np.atleast_1d(np.asarray(self.feedback(np.zeros(self.dim)), dtype=float))
        if held.shape != (self.input_dim,) or not np.allclose(
            held, 0.0, atol=_TRIVIAL_SOLUTION_ATOL
        ):
            raise RejectedInputError("Feedback must satisfy p(0) = 0")


@dataclass(frozen=True)
class Example2Params:
    """Scalar plant x(k+1) = A1 x(k) + A2 cos(x(k)) sin(x(k - 1)) + B u(k), u = K x."""

    A1: float = 1.0
    A2: float = 0.05
    B: float = 2.0
    K: float = -0.3
    tau: int = 1


def eval_example2(params: Example2Params, window: HistoryWindow, u: float | ArrayLike) -> float:
    """Evaluate the scalar trigonometric delay plant.

    Raises:
        RejectedInputError: If the window is not a scalar tau = 1 window.
    """
    if window.dim != 1 or window.tau != 1:
        raise RejectedInputError(
            f"Scalar plant needs a dim=1, tau=1 window, got dim={window.dim}, tau={window.tau}"
        )
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    if u_arr.shape != (1,):
        raise RejectedInputError(f"Scalar plant needs a scalar input, got shape {u_arr.shape}")
    x = float(window[0][0])
    x_delayed = float(window[-1][0])
    return (
        params.A1 * x
        + params.A2 * math.cos(x) * math.sin(x_delayed)
        + params.B * float(u_arr[0])
    )
