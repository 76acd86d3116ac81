"""Lyapunov-Krasovskii certificates and their closed-form linear construction.

A certificate bundles the decay rate mu, the bounding maps alpha1..alpha3,
the input gain chi and the Lipschitz constants the trigger design needs.
The functional is V(phi) = ||phi(0)|| + eps * ||phi(-1)||.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Protocol

from scipy.optimize import brentq

from delay_etc.errors import CertificateInfeasibleError, RejectedInputError
from delay_etc.history import HistoryWindow, euclidean_norm
from delay_etc.reports import TRACE_TOLERANCE, ViolationReport
from delay_etc.systems import Example2Params, LinearDelaySystem, MatrixNorm, induced_norm

if TYPE_CHECKING:
    from delay_etc.simulation import SimTrace

logger = logging.getLogger(__name__)


class ScalarGain(Protocol):
    """A class-K map r -> gain(r) on [0, inf) with a usable inverse."""

    def __call__(self, r: float) -> float: ...

    def inverse(self, s: float) -> float: ...


@dataclass(frozen=True)
class LinearGain:
    """r -> slope * r."""

    slope: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.slope) or self.slope < 0:
            raise RejectedInputError(f"Gain slope must be finite and >= 0, got {self.slope}")

    def __call__(self, r: float) -> float:
        return self.slope * r

    def inverse(self, s: float) -> float:
        if self.slope == 0.0:
            return 0.0 if s <= 0.0 else math.inf
        return s / self.slope

    def lipschitz_on(self, upper: float) -> float:
        return self.slope


@dataclass(frozen=True)
class ClassKFunction:
    """A user-supplied class-K map with a numerical inverse.

    Attributes:
        fn: The map itself; must vanish at 0 and increase strictly.
        name: Label used in logs.
        lipschitz: Optional user-declared map upper -> Lipschitz constant on
            [0, upper]. When present the tuner re-checks L after choosing a.
    """

    fn: Callable[[float], float]
    name: str = "custom"
    lipschitz: Callable[[float], float] | None = field(default=None, compare=False)

    def __call__(self, r: float) -> float:
        return self.fn(r)

    def inverse(self, s: float) -> float:
        if s <= 0.0:
            return 0.0
        upper = 1.0
        for _ in range(1100):
            if self.fn(upper) >= s:
                return float(brentq(lambda r: self.fn(r) - s, 0.0, upper, xtol=1e-14))
            upper *= 2.0
        return math.inf

    def lipschitz_on(self, upper: float) -> float | None:
        return None if self.lipschitz is None else self.lipschitz(upper)


@dataclass(frozen=True)
class KrasovskiiCertificate:
    """Data of an ISS Lyapunov-Krasovskii certificate for the closed loop.

    Attributes:
        mu: Decay rate in [0, 1).
        eps: Weight of the past-state part of V.
        chi_lipschitz: Lipschitz constant L of chi on [0, a].
        alpha1_inv_lipschitz: Lipschitz constant L1 of alpha1^{-1}.
        alpha1, alpha2: Bounds on the current-state part (identity by default).
        alpha3: Bound on the past-state part (eps * r by default).
        chi: Input gain (chi_lipschitz * r by default).
        functional: Optional custom V; defaults to ||phi(0)|| + eps ||phi(-1)||.
    """

    mu: float
    eps: float
    chi_lipschitz: float
    alpha1_inv_lipschitz: float = 1.0
    alpha1: ScalarGain = LinearGain(1.0)
    alpha2: ScalarGain = LinearGain(1.0)
    alpha3: ScalarGain | None = None
    chi: ScalarGain | None = None
    functional: Callable[[HistoryWindow], float] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.mu < 1.0:
            raise RejectedInputError(f"mu must lie in [0, 1), got {self.mu}")
        for name in ("eps", "chi_lipschitz", "alpha1_inv_lipschitz"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise RejectedInputError(f"{name} must be finite and >= 0, got {value}")
        if self.alpha3 is None:
            object.__setattr__(self, "alpha3", LinearGain(self.eps))
        if self.chi is None:
            object.__setattr__(self, "chi", LinearGain(self.chi_lipschitz))

    @property
    def chi_is_linear(self) -> bool:
        return isinstance(self.chi, LinearGain)

    def with_mu(self, mu: float) -> KrasovskiiCertificate:
        return replace(self, mu=mu)

    def to_dict(self) -> dict[str, float]:
        return {
            "mu": self.mu,
            "eps": self.eps,
            "L": self.chi_lipschitz,
            "L1": self.alpha1_inv_lipschitz,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> KrasovskiiCertificate:
        """Rebuild a linear-gain certificate from its serialized constants."""
        try:
            return cls(
                mu=float(data["mu"]),
                eps=float(data["eps"]),
                chi_lipschitz=float(data["L"]),
                alpha1_inv_lipschitz=float(data.get("L1", 1.0)),
            )
        except KeyError as missing:
            raise RejectedInputError(f"Certificate is missing field {missing}") from None


@dataclass(frozen=True)
class LinearCertificate:
    """Closed-form certificate of a tau = 1 linear (or norm-bounded) plant.

    Attributes:
        cert: The certificate proper.
        bk_norm: ||BK||, also the Lipschitz constant of chi.
        closed_loop_norm: ||A1 + BK||.
        delay_norm: ||A2||.
    """

    cert: KrasovskiiCertificate
    bk_norm: float
    closed_loop_norm: float = 0.0
    delay_norm: float = 0.0


def certificate_from_norms(
    closed_loop_norm: float,
    delay_norm: float,
    bk_norm: float,
    eps: float | None = None,
) -> LinearCertificate:
    """Build the V = ||phi(0)|| + eps ||phi(-1)|| certificate from three norms.

    Without ``eps`` the weight is the positive root of
    eps^2 + q eps - ||A2|| = 0 (q = ||A1 + BK||), which balances both decay
    branches. With ``eps`` given, mu = min{1 - eps - q, 1 - ||A2|| / eps}.

    Raises:
        CertificateInfeasibleError: If mu <= 0.
    """
    q, d = closed_loop_norm, delay_norm
    root = math.sqrt(q * q + 4.0 * d)
    if eps is None:
        eps = 0.5 * (-q + root)
        mu = 0.5 * (2.0 - q - root)
    else:
        if eps < 0.0:
            raise RejectedInputError(f"eps must be nonnegative, got {eps}")
        delay_branch = 1.0 - d / eps if eps > 0.0 else (1.0 if d == 0.0 else -math.inf)
        mu = min(1.0 - eps - q, delay_branch)
    if mu <= 0.0:
        raise CertificateInfeasibleError(mu)
    if mu >= 1.0:
        logger.warning(f"Certificate mu = {mu} capped just below 1")
        mu = math.nextafter(1.0, 0.0)
    cert = KrasovskiiCertificate(mu=mu, eps=eps, chi_lipschitz=bk_norm, alpha1_inv_lipschitz=1.0)
    return LinearCertificate(cert=cert, bk_norm=bk_norm, closed_loop_norm=q, delay_norm=d)


def derive_linear_certificate(
    system: LinearDelaySystem,
    eps: float | None = None,
    norm: MatrixNorm = MatrixNorm.SPECTRAL,
) -> LinearCertificate:
    """Derive the closed-form certificate of a tau = 1 linear delay system.

    Args:
        system: The plant with its feedback gain.
        eps: Optional weight override; the quadratic root is used otherwise.
        norm: Induced matrix norm for ||A1 + BK||, ||A2|| and ||BK||.

    Returns:
        Certificate with chi(r) = ||BK|| r, alpha1 = alpha2 = identity and
        alpha3(r) = eps r.

    Raises:
        RejectedInputError: If tau != 1.
        CertificateInfeasibleError: If mu <= 0.
    """
    if system.tau != 1:
        raise RejectedInputError(f"Closed-form certificate needs tau = 1, got {system.tau}")
    result = certificate_from_norms(
        induced_norm(system.closed_loop, norm),
        induced_norm(system.A2, norm),
        induced_norm(system.bk, norm),
        eps=eps,
    )
    logger.debug(
        f"Linear certificate: mu={result.cert.mu:.6f}, eps={result.cert.eps:.6f}, "
        f"||BK||={result.bk_norm:.6f}"
    )
    return result


def derive_example2_certificate(params: Example2Params, eps: float = 0.1) -> LinearCertificate:
    """Certificate of the scalar trigonometric plant with a hand-picked eps.

    |cos(x) sin(y)| <= |y| gives the same norm bound as a linear delay term
    with gain |A2|.
    """
    if params.tau != 1:
        raise RejectedInputError(f"Scalar plant certificate needs tau = 1, got {params.tau}")
    bk = abs(params.B * params.K)
    return certificate_from_norms(
        abs(params.A1 + params.B * params.K), abs(params.A2), bk, eps=eps
    )


def evaluate_V(cert: KrasovskiiCertificate, window: HistoryWindow) -> float:
    """V(phi) = ||phi(0)|| + eps ||phi(-1)|| (or the certificate's custom functional)."""
    if cert.functional is not None:
        return float(cert.functional(window))
    if window.tau > 1:
        raise RejectedInputError(
            f"Default functional covers tau <= 1, got tau = {window.tau}; supply a functional"
        )
    current = euclidean_norm(window[0])
    if window.tau == 0:
        return current
    return current + cert.eps * euclidean_norm(window[-1])


def check_functional_bounds(
    cert: KrasovskiiCertificate, window: HistoryWindow, tol: float = 1e-12
) -> bool:
    """alpha1(||phi(0)||) <= V(phi) <= alpha2(||phi(0)||) + alpha3(||phi||_past)."""
    value = evaluate_V(cert, window)
    current = euclidean_norm(window[0])
    lower = cert.alpha1(current)
    upper = cert.alpha2(current) + cert.alpha3(window.past_norm)
    return lower - tol <= value <= upper + tol


def check_iss_decrement(cert: KrasovskiiCertificate, trace: SimTrace) -> ViolationReport:
    """Check V(x_{k+1}) - V(x_k) <= -mu V(x_k) + chi(||e(k)||) along a trace.

    Raises:
        RejectedInputError: If the trace was recorded without V.
    """
    if trace.v is None:
        raise RejectedInputError("Trace has no V column; simulate with record_v=True")
    report = ViolationReport(name="iss_decrement")
    v = trace.v
    for k in range(len(v) - 1):
        lhs = float(v[k + 1] - v[k])
        rhs = -cert.mu * float(v[k]) + cert.chi(float(trace.e_norm[k]))
        if lhs > rhs + TRACE_TOLERANCE:
            report.add(k, lhs, rhs)
    report.checked_steps = max(len(v) - 1, 0)
    return report
