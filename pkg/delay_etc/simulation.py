"""Closed-loop event-triggered simulation and the trace-level guarantees.

Each step runs in the order measure, trigger check, (maybe) update the held
input, advance the dynamics. k = 0 is always an event: the controller starts
from u(0) = p(x(0)).
"""

import logging
from collections.abc import Iterator
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path

import numpy as np

from delay_etc.certificate import KrasovskiiCertificate, evaluate_V
from delay_etc.errors import DivergedError, RejectedInputError
from delay_etc.history import HistoryWindow, euclidean_norm, row_norms
from delay_etc.reports import TRACE_TOLERANCE, ViolationReport
from delay_etc.systems import DelaySystem
from delay_etc.trigger import (
    MeasurementError,
    TriggerMode,
    TriggerParams,
    chi_threshold,
    should_trigger,
    threshold,
)
from delay_etc.tuner import TunerResult

logger = logging.getLogger(__name__)

DIVERGENCE_GUARD = 1e12


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    Attributes:
        horizon: Number of steps K; rows cover k = 0..K.
        phi: Initial function on offsets -tau..0.
        params: Trigger parameters.
        record_v: Whether to store V(x_k) at every step. The default functional
            covers tau <= 1 only, so longer delays leave it off or supply one.
    """

    horizon: int
    phi: HistoryWindow
    params: TriggerParams
    record_v: bool = False

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise RejectedInputError(f"horizon must be >= 1, got {self.horizon}")


@dataclass(frozen=True)
class TraceRow:
    k: int
    x: np.ndarray
    u: np.ndarray
    e_norm: float
    threshold: float
    is_event: bool
    v: float | None


@dataclass(frozen=True)
class SimTrace:
    """Column-oriented record of a run.

    Attributes:
        k: Step indices 0..K.
        x: States, shape (K + 1, n).
        u: Held inputs applied at each step, shape (K + 1, m).
        e_norm: ||x(k_i) - x(k)|| after the trigger decision (0 at events).
        threshold: Threshold in error-norm units.
        is_event: Event flags.
        v: V(x_k) per step, or None when not recorded.
        event_times: Strictly increasing event steps, starting at 0.
        params: Trigger parameters the run used.
    """

    k: np.ndarray
    x: np.ndarray
    u: np.ndarray
    e_norm: np.ndarray
    threshold: np.ndarray
    is_event: np.ndarray
    v: np.ndarray | None
    event_times: list[int]
    params: TriggerParams

    @property
    def horizon(self) -> int:
        return len(self.k) - 1

    @property
    def state_norms(self) -> np.ndarray:
        return row_norms(self.x)

    def __len__(self) -> int:
        return len(self.k)

    def row(self, k: int) -> TraceRow:
        return TraceRow(
            k=int(self.k[k]),
            x=self.x[k],
            u=self.u[k],
            e_norm=float(self.e_norm[k]),
            threshold=float(self.threshold[k]),
            is_event=bool(self.is_event[k]),
            v=None if self.v is None else float(self.v[k]),
        )

    @property
    def rows(self) -> Iterator[TraceRow]:
        return (self.row(k) for k in range(len(self.k)))

    def csv_header(self) -> list[str]:
        return (
            ["k"]
            + [f"x_{i}" for i in range(self.x.shape[1])]
            + [f"u_{j}" for j in range(self.u.shape[1])]
            + ["e_norm", "threshold", "is_event", "V"]
        )

    def to_csv(self, path: Path) -> Path:
        """Write the trace with 17 significant digits per float; V is nan when not recorded."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        v = np.full(len(self.k), np.nan) if self.v is None else self.v
        columns = np.column_stack(
            [self.k, self.x, self.u, self.e_norm, self.threshold, self.is_event.astype(int), v]
        )
        n, m = self.x.shape[1], self.u.shape[1]
        fmt = ["%d"] + ["%.17g"] * (n + m + 2) + ["%d", "%.17g"]
        np.savetxt(path, columns, fmt=fmt, delimiter=",", header=",".join(self.csv_header()), comments="")
        return path


def _as_vector(value: object, size: int, what: str) -> np.ndarray:
    vec = np.atleast_1d(np.asarray(value, dtype=float))
    if vec.shape != (size,):
        raise RejectedInputError(f"{what} has shape {vec.shape}, expected ({size},)")
    return vec


def simulate(system: DelaySystem, cert: KrasovskiiCertificate, config: SimConfig) -> SimTrace:
    """Run the event-triggered closed loop from the initial function.

    Args:
        system: Plant and feedback law (linear or user-supplied).
        cert: Certificate providing chi and alpha1 for the trigger rule.
        config: Horizon, initial function and trigger parameters.

    Returns:
        The full trace over k = 0..horizon.

    Raises:
        RejectedInputError: If phi does not match the system.
        DivergedError: If the state becomes non-finite or exceeds the guard.
    """
    phi = config.phi
    if phi.tau != system.tau or phi.dim != system.dim:
        raise RejectedInputError(
            f"Initial function (tau={phi.tau}, dim={phi.dim}) does not match system "
            f"(tau={system.tau}, dim={system.dim})"
        )
    if not np.all(np.isfinite(phi.states())):
        raise RejectedInputError("Initial function has non-finite entries")

    horizon, params = config.horizon, config.params
    n, m = system.dim, system.input_dim
    xs = np.empty((horizon + 1, n))
    us = np.empty((horizon + 1, m))
    e_norms = np.zeros(horizon + 1)
    thresholds = np.empty(horizon + 1)
    events = np.zeros(horizon + 1, dtype=bool)
    vs = np.empty(horizon + 1) if config.record_v else None
    event_times: list[int] = []

    window = phi.copy()
    x_event = window.current.copy()
    u = _as_vector(system.feedback(x_event), m, "Feedback")
    last_event = 0

    for k in range(horizon + 1):
        x = window.current.copy()
        if k == 0:
            is_event = True
        else:
            err = MeasurementError.since(x_event, x, last_event)
            is_event = should_trigger(err, x, k, params, cert)
            e_norms[k] = 0.0 if is_event else err.norm
        if is_event:
            x_event = x
            u = _as_vector(system.feedback(x_event), m, "Feedback")
            last_event = k
            event_times.append(k)

        xs[k] = x
        us[k] = u
        thresholds[k] = threshold(params, cert, x, k)
        events[k] = is_event
        if vs is not None:
            vs[k] = evaluate_V(cert, window)

        if k < horizon:
            x_next = np.atleast_1d(np.asarray(system.dynamics(window, u), dtype=float))
            if not np.all(np.isfinite(x_next)) or euclidean_norm(x_next) > DIVERGENCE_GUARD:
                logger.warning(f"State left the divergence guard at step {k + 1}")
                raise DivergedError(k)
            window.push(x_next)

    logger.debug(f"Simulated {horizon} steps with {len(event_times)} events")
    return SimTrace(
        k=np.arange(horizon + 1),
        x=xs,
        u=us,
        e_norm=e_norms,
        threshold=thresholds,
        is_event=events,
        v=vs,
        event_times=event_times,
        params=params,
    )


def inter_event_times(trace: SimTrace) -> list[int]:
    return [int(gap) for gap in np.diff(trace.event_times)]


def count_events(trace: SimTrace, upto: int, include_initial: bool = True) -> int:
    """Events in [0, upto], or in (0, upto] without the implicit k = 0 update."""
    if upto > trace.horizon:
        raise RejectedInputError(f"upto={upto} exceeds the trace horizon {trace.horizon}")
    lower = 0 if include_initial else 1
    return sum(1 for t in trace.event_times if lower <= t <= upto)


class EventSequenceClass(StrEnum):
    TRIVIAL = "trivial"
    WEAKLY_NONTRIVIAL = "weakly_nontrivial"
    STRONGLY_NONTRIVIAL = "strongly_nontrivial"


def classify_event_sequence(trace: SimTrace) -> EventSequenceClass:
    """Trivial if every gap is 1, strongly nontrivial if every gap is at least 2.

    Fewer than two events make the sequence strongly nontrivial vacuously.
    """
    gaps = inter_event_times(trace)
    if all(g >= 2 for g in gaps):
        return EventSequenceClass.STRONGLY_NONTRIVIAL
    if all(g == 1 for g in gaps):
        return EventSequenceClass.TRIVIAL
    return EventSequenceClass.WEAKLY_NONTRIVIAL


def check_restriction(trace: SimTrace, cert: KrasovskiiCertificate) -> ViolationReport:
    """Report non-event steps k > 0 where the error exceeded the threshold.

    The comparison is in chi units, or directly in error norm for the
    time-only rule.
    """
    report = ViolationReport(name="restriction")
    params = trace.params
    for k in range(1, len(trace.k)):
        if trace.is_event[k]:
            continue
        e_norm = float(trace.e_norm[k])
        if params.mode is TriggerMode.TIME_ONLY:
            lhs, rhs = e_norm, params.time_term(k)
        else:
            lhs, rhs = cert.chi(e_norm), chi_threshold(params, cert, trace.x[k], k)
        if lhs > rhs + TRACE_TOLERANCE:
            report.add(k, lhs, rhs)
    report.checked_steps = max(len(trace.k) - 1, 0)
    return report


def state_bound(result: TunerResult, cert: KrasovskiiCertificate, k: np.ndarray) -> np.ndarray:
    """alpha1^{-1}(M (1 - eta)^k) evaluated elementwise."""
    levels = result.m * (1.0 - result.eta) ** np.asarray(k, dtype=float)
    return np.array([cert.alpha1.inverse(float(level)) for level in levels])


def verify_state_bound(
    trace: SimTrace, result: TunerResult, cert: KrasovskiiCertificate
) -> ViolationReport:
    """Report every k with ||x(k)|| > alpha1^{-1}(M (1 - eta)^k) + tolerance."""
    report = ViolationReport(name="state_bound")
    norms = trace.state_norms
    bounds = state_bound(result, cert, trace.k)
    for k in np.flatnonzero(norms > bounds + TRACE_TOLERANCE):
        report.add(int(k), float(norms[k]), float(bounds[k]))
    report.checked_steps = len(trace.k)
    return report


def bound_margin(trace: SimTrace, result: TunerResult, cert: KrasovskiiCertificate) -> float:
    """min over k of alpha1^{-1}(M (1 - eta)^k) - ||x(k)||."""
    return float(np.min(state_bound(result, cert, trace.k) - trace.state_norms))


def geometric_v_bound(v0: float, k: int | np.ndarray, eta: float, m_bar: float) -> float | np.ndarray:
    """(1 - eta)^k (v0 + M_bar)."""
    return (1.0 - eta) ** k * (v0 + m_bar)


def iterate_v_recursion(v0: float, a: float, L: float, b: float, c: float, steps: int) -> np.ndarray:
    """Iterate v_{k+1} = (1 - c) v_k + a L (1 - b)^k; returns v_0..v_steps."""
    v = np.empty(steps + 1)
    v[0] = v0
    for k in range(steps):
        v[k + 1] = (1.0 - c) * v[k] + a * L * (1.0 - b) ** k
    return v


def v_bound_oracle(
    trace: SimTrace, cert: KrasovskiiCertificate, result: TunerResult
) -> ViolationReport:
    """Check V against its one-step recursion and the matching geometric bound.

    Recursion: V(k+1) <= (1 - c) V(k) + a L (1 - b)^k.
    Geometric: V(k+1) <= (1 - eta)^(k+1) (V(0) + M_bar).

    Raises:
        RejectedInputError: If the trace was recorded without V.
    """
    if trace.v is None:
        raise RejectedInputError("Trace has no V column; simulate with record_v=True")
    report = ViolationReport(name="v_bound")
    v = trace.v
    params = trace.params
    L = cert.chi_lipschitz
    for k in range(len(v) - 1):
        recursion = (1.0 - result.c) * v[k] + params.a * L * (1.0 - params.b) ** k
        if v[k + 1] > recursion + TRACE_TOLERANCE:
            report.add(k, float(v[k + 1]), float(recursion), "v_recursion")
        closed = geometric_v_bound(float(v[0]), k + 1, result.eta, result.m_bar)
        if v[k + 1] > closed + TRACE_TOLERANCE:
            report.add(k, float(v[k + 1]), float(closed), "v_geometric")
    report.checked_steps = max(len(v) - 1, 0)
    return report


def final_state_norm(trace: SimTrace) -> float:
    return euclidean_norm(trace.x[-1])


def zero_state_from(trace: SimTrace) -> int | None:
    """First k from which x(k) is exactly zero through the end of the trace."""
    nonzero = np.flatnonzero(np.any(trace.x != 0.0, axis=1))
    start = 0 if len(nonzero) == 0 else int(nonzero[-1]) + 1
    return start if start < len(trace.k) else None
