"""Event-triggered control of discrete-time delay systems."""

from delay_etc.certificate import (
    ClassKFunction,
    KrasovskiiCertificate,
    LinearCertificate,
    LinearGain,
    derive_example2_certificate,
    derive_linear_certificate,
    evaluate_V,
)
from delay_etc.errors import (
    CertificateInfeasibleError,
    DelayEtcError,
    DivergedError,
    InfeasibleError,
    InvariantViolationError,
    RejectedInputError,
    SearchFailedError,
    TunerInfeasibleError,
)
from delay_etc.history import HistoryWindow, shift
from delay_etc.simulation import SimConfig, SimTrace, simulate
from delay_etc.systems import LinearDelaySystem, NonlinearDelaySystem, induced_norm
from delay_etc.trigger import TriggerMode, TriggerParams
from delay_etc.tuner import LipschitzConstants, TunerResult, tune

__all__ = [
    "CertificateInfeasibleError",
    "ClassKFunction",
    "DelayEtcError",
    "DivergedError",
    "HistoryWindow",
    "InfeasibleError",
    "InvariantViolationError",
    "KrasovskiiCertificate",
    "LinearCertificate",
    "LinearDelaySystem",
    "LinearGain",
    "LipschitzConstants",
    "NonlinearDelaySystem",
    "RejectedInputError",
    "SearchFailedError",
    "SimConfig",
    "SimTrace",
    "TriggerMode",
    "TriggerParams",
    "TunerInfeasibleError",
    "TunerResult",
    "derive_example2_certificate",
    "derive_linear_certificate",
    "evaluate_V",
    "induced_norm",
    "shift",
    "simulate",
    "tune",
]
