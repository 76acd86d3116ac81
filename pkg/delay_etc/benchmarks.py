"""Reference plants, initial functions and published event counts.

The two-state linear plant and the scalar trigonometric plant are the
benchmark systems used throughout the tests, the shipped configs and the
event-count reproduction.
"""

from dataclasses import dataclass

import numpy as np

from delay_etc.certificate import LinearCertificate, derive_example2_certificate
from delay_etc.history import HistoryWindow
from delay_etc.systems import Example2Params, LinearDelaySystem, NonlinearDelaySystem, eval_example2
from delay_etc.trigger import TriggerMode, TriggerParams
from delay_etc.tuner import LipschitzConstants

EXAMPLE1_A1 = [[0.95, 0.0], [0.01, 1.05]]
EXAMPLE1_A2 = [[0.0, -0.01], [-0.01, 0.0]]
EXAMPLE1_B = [[3.0, 0.2], [0.5, 1.0]]
EXAMPLE1_K = [[-0.1621, 0.0324], [0.0810, -0.4862]]

EXAMPLE1_INITIALS: tuple[tuple[float, ...], ...] = ((1.0, 1.0), (-2.0, 3.0))
EXAMPLE2_INITIAL = 0.2

EXAMPLE1_PARAMS = TriggerParams(sigma=0.1, a=16.0, b=0.03)
EXAMPLE2_PARAMS = TriggerParams(sigma=0.05, a=2.2, b=0.02)
EXAMPLE2_STATE_ONLY = TriggerParams.state_only(sigma=0.05, b=0.02)

SHORT_HORIZON = 10_000
LONG_HORIZON = 100_000

COUNT_TOLERANCE = 0.05
# Time-only runs stop firing near k = 74,000, where the state and a (1 - b)^k
# both round to exactly zero; the published time-only counts run on past that.
TIME_ONLY_COUNT_TOLERANCE = 0.10


def example1_system() -> LinearDelaySystem:
    return LinearDelaySystem(A1=EXAMPLE1_A1, A2=EXAMPLE1_A2, B=EXAMPLE1_B, K=EXAMPLE1_K, tau=1)


def example1_phi(initial: tuple[float, ...] = EXAMPLE1_INITIALS[0]) -> HistoryWindow:
    return HistoryWindow.constant(np.array(initial, dtype=float), tau=1)


def example2_lipschitz(params: Example2Params) -> LipschitzConstants:
    bk = abs(params.B * params.K)
    return LipschitzConstants(l11=abs(1.0 - params.A1), l12=abs(params.A2), l2=bk, L=bk, L1=1.0)


def example2_system(params: Example2Params | None = None) -> NonlinearDelaySystem:
    """The scalar plant wrapped as a generic nonlinear delay system."""
    params = params or Example2Params()
    return NonlinearDelaySystem(
        dynamics=lambda window, u: np.array([eval_example2(params, window, u)]),
        feedback=lambda x: np.array([params.K * x[0]]),
        tau=params.tau,
        dim=1,
        input_dim=1,
        lipschitz=example2_lipschitz(params),
    )


def example2_certificate(params: Example2Params | None = None) -> LinearCertificate:
    return derive_example2_certificate(params or Example2Params(), eps=0.1)


def example2_phi(initial: float = EXAMPLE2_INITIAL) -> HistoryWindow:
    return HistoryWindow.constant([initial], tau=1)


@dataclass(frozen=True)
class PublishedCell:
    """One published event count.

    Attributes:
        group: "amplitude_decay" (sigma fixed, a and b varied) or
            "rule_comparison" (mixed rule against the time-only rule).
        params: Trigger parameters of the row.
        initial: Constant initial function.
        horizon: Counting window [0, horizon].
        published: The published integer.
        tolerance: Accepted relative deviation of the computed count.
    """

    group: str
    params: TriggerParams
    initial: tuple[float, ...]
    horizon: int
    published: int
    tolerance: float = COUNT_TOLERANCE


_AMPLITUDE_DECAY_ROWS = (
    ((16.0, 0.01), (2135, 2141)),
    ((16.0, 0.03), (2317, 2323)),
    ((24.0, 0.03), (2315, 2320)),
)
_RULE_COMPARISON_ROWS = (
    (0.1, (15845, 15857)),
    (0.0, (17373, 17369)),
)


def published_cells() -> list[PublishedCell]:
    """All published cells, amplitude/decay grid first, rows in published order."""
    cells: list[PublishedCell] = []
    for (a, b), counts in _AMPLITUDE_DECAY_ROWS:
        params = TriggerParams(sigma=0.1, a=a, b=b)
        for initial, count in zip(EXAMPLE1_INITIALS, counts, strict=True):
            cells.append(PublishedCell("amplitude_decay", params, initial, SHORT_HORIZON, count))
    for sigma, counts in _RULE_COMPARISON_ROWS:
        time_only = sigma == 0.0
        mode = TriggerMode.TIME_ONLY if time_only else TriggerMode.FULL
        params = TriggerParams(sigma=sigma, a=16.0, b=0.01, mode=mode)
        tolerance = TIME_ONLY_COUNT_TOLERANCE if time_only else COUNT_TOLERANCE
        for initial, count in zip(EXAMPLE1_INITIALS, counts, strict=True):
            cells.append(
                PublishedCell("rule_comparison", params, initial, LONG_HORIZON, count, tolerance)
            )
    return cells


def example1_config(
    params: TriggerParams = EXAMPLE1_PARAMS, horizons: tuple[int, ...] = (SHORT_HORIZON,)
) -> dict:
    """JSON-ready experiment config for the linear plant."""
    return {
        "system": {
            "linear": {"A1": EXAMPLE1_A1, "A2": EXAMPLE1_A2, "B": EXAMPLE1_B, "K": EXAMPLE1_K, "tau": 1}
        },
        "trigger": params.to_dict(),
        "initial": [list(init) for init in EXAMPLE1_INITIALS],
        "horizons": list(horizons),
        "outputs": {"trace_csv": "example1_trace.csv", "summary_json": "example1_summary.json"},
    }


def example2_config(
    params: TriggerParams = EXAMPLE2_PARAMS, horizons: tuple[int, ...] = (200,)
) -> dict:
    """JSON-ready experiment config for the scalar plant (eps fixed at 0.1)."""
    p = Example2Params()
    return {
        "system": {"example2": {"A1": p.A1, "A2": p.A2, "B": p.B, "K": p.K, "tau": p.tau}},
        "certificate": {"eps": 0.1},
        "trigger": params.to_dict(),
        "initial": [[EXAMPLE2_INITIAL]],
        "horizons": list(horizons),
        "outputs": {"trace_csv": "example2_trace.csv", "summary_json": "example2_summary.json"},
    }
