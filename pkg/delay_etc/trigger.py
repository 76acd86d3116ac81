"""Event-triggering rule: threshold evaluation and the update decision.

The input is refreshed at the first step k after the last event where

    chi(||e(k)||) > sigma * alpha1(||x(k)||) + chi(a * (1 - b)^k)

with e(k) = x(k_i) - x(k). Ties do not trigger.
"""

import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from delay_etc.certificate import KrasovskiiCertificate
from delay_etc.errors import RejectedInputError
from delay_etc.history import euclidean_norm


class TriggerMode(StrEnum):
    FULL = "full"
    STATE_ONLY = "state_only"
    TIME_ONLY = "time_only"


@dataclass(frozen=True)
class TriggerParams:
    """Parameters of the execution rule.

    Attributes:
        sigma: Weight of the state-dependent part (>= 0).
        a: Amplitude of the time-dependent part (>= 0).
        b: Decay of the time-dependent part, in (0, 1).
        mode: full, state_only (a = 0) or time_only (sigma = 0).
    """

    sigma: float
    a: float
    b: float
    mode: TriggerMode = TriggerMode.FULL

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", TriggerMode(self.mode))
        for name in ("sigma", "a", "b"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise RejectedInputError(f"{name} must be finite, got {value}")
        if self.sigma < 0.0 or self.a < 0.0:
            raise RejectedInputError(
                f"sigma and a must be nonnegative, got sigma={self.sigma}, a={self.a}"
            )
        if not 0.0 < self.b < 1.0:
            raise RejectedInputError(f"b must lie in (0, 1), got {self.b}")
        if self.mode is TriggerMode.STATE_ONLY and not (self.a == 0.0 and self.sigma > 0.0):
            raise RejectedInputError("state_only mode needs a = 0 and sigma > 0")
        if self.mode is TriggerMode.TIME_ONLY and not (self.sigma == 0.0 and self.a > 0.0):
            raise RejectedInputError("time_only mode needs sigma = 0 and a > 0")

    @classmethod
    def state_only(cls, sigma: float, b: float = 0.5) -> "TriggerParams":
        return cls(sigma=sigma, a=0.0, b=b, mode=TriggerMode.STATE_ONLY)

    @classmethod
    def time_only(cls, a: float, b: float) -> "TriggerParams":
        return cls(sigma=0.0, a=a, b=b, mode=TriggerMode.TIME_ONLY)

    def time_term(self, k: int) -> float:
        """a (1 - b)^k; underflows quietly to 0 for long horizons."""
        return self.a * (1.0 - self.b) ** k

    def to_dict(self) -> dict[str, Any]:
        return {"sigma": self.sigma, "a": self.a, "b": self.b, "mode": str(self.mode)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TriggerParams":
        try:
            return cls(
                sigma=float(data["sigma"]),
                a=float(data["a"]),
                b=float(data["b"]),
                mode=TriggerMode(data.get("mode", TriggerMode.FULL)),
            )
        except KeyError as missing:
            raise RejectedInputError(f"Trigger parameters missing field {missing}") from None


@dataclass(frozen=True)
class MeasurementError:
    """e = x(k_i) - x(k) together with the last event time k_i."""

    e: np.ndarray
    last_event: int

    @property
    def norm(self) -> float:
        return euclidean_norm(self.e)

    @classmethod
    def since(cls, x_event: ArrayLike, x: ArrayLike, last_event: int) -> "MeasurementError":
        return cls(
            e=np.asarray(x_event, dtype=float) - np.asarray(x, dtype=float),
            last_event=last_event,
        )


def chi_threshold(
    params: TriggerParams, cert: KrasovskiiCertificate, x: ArrayLike, k: int
) -> float:
    """sigma * alpha1(||x||) + chi(a (1 - b)^k), in chi units."""
    if k < 0:
        raise RejectedInputError(f"k must be nonnegative, got {k}")
    return params.sigma * cert.alpha1(euclidean_norm(x)) + cert.chi(params.time_term(k))


def threshold(
    params: TriggerParams, cert: KrasovskiiCertificate, x: ArrayLike, k: int
) -> float:
    """The threshold in error-norm units, chi^{-1}(chi_threshold).

    For a linear gain chi(r) = L r this is sigma ||x|| / L + a (1 - b)^k,
    the value plotted against ||e||. A zero gain never triggers, so its
    threshold is infinite.
    """
    if k < 0:
        raise RejectedInputError(f"k must be nonnegative, got {k}")
    if params.mode is TriggerMode.TIME_ONLY:
        return params.time_term(k)
    if cert.chi_is_linear:
        slope = cert.chi.slope
        if slope == 0.0:
            return math.inf
        return params.sigma * cert.alpha1(euclidean_norm(x)) / slope + params.time_term(k)
    return cert.chi.inverse(chi_threshold(params, cert, x, k))


def should_trigger(
    err: MeasurementError,
    x: ArrayLike,
    k: int,
    params: TriggerParams,
    cert: KrasovskiiCertificate,
) -> bool:
    """Whether step k is the next event time.

    Raises:
        RejectedInputError: If k is not strictly after the last event.
    """
    if k <= err.last_event:
        raise RejectedInputError(
            f"Trigger queried at k={k}, not after the last event {err.last_event}"
        )
    return exceeds_threshold(err.norm, x, k, params, cert)


def exceeds_threshold(
    e_norm: float,
    x: ArrayLike,
    k: int,
    params: TriggerParams,
    cert: KrasovskiiCertificate,
) -> bool:
    """The strict event inequality for an error of norm ``e_norm`` at step k.

    The time-only rule compares ||e|| > a (1 - b)^k directly.
    """
    if params.mode is TriggerMode.TIME_ONLY:
        return e_norm > params.time_term(k)
    return cert.chi(e_norm) > chi_threshold(params, cert, x, k)
