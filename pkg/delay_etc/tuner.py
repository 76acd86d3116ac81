"""Trigger-parameter synthesis for strongly nontrivial event sequences.

Given a certificate with decay rate mu and the Lipschitz structure of the
closed loop, ``tune`` picks (sigma, a, b) so that every inter-event gap is at
least two steps:

1. sigma such that c = mu - sigma > L L1 (l11 + l12 + l2);
2. a large enough that L1 (l11 + l12 + l2) (L / c + M~ / a) < 1;
3. b in (0, c) small enough that
   L1 / (1 - b) (l11 + l12 / (1 - b)^tau + l2) (L / (c - b) + M~ / a) <= 1.

The last inequality multiplied by a is the nontriviality condition on a.
"""

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Any

import numpy as np

from delay_etc.certificate import KrasovskiiCertificate
from delay_etc.errors import RejectedInputError, SearchFailedError, TunerInfeasibleError
from delay_etc.history import HistoryWindow, euclidean_norm
from delay_etc.systems import LinearDelaySystem, MatrixNorm, induced_norm
from delay_etc.trigger import TriggerMode, TriggerParams

logger = logging.getLogger(__name__)

_GRID_RATIO = 0.5
_MAX_GRID_STEPS = 200
_AMPLITUDE_MARGIN = 0.95
_MAX_RETUNES = 20


class NontrivialityVariant(StrEnum):
    SPLIT = "split"
    COMBINED = "combined"


@dataclass(frozen=True)
class LipschitzConstants:
    """Lipschitz data of the closed loop.

    Attributes:
        l11: Bound of phi(0) - f(phi, p(x)) in ||phi(0)||.
        l12: Bound in the past part ||phi||_past.
        l2: Bound in ||x|| through the feedback.
        L: Lipschitz constant of chi on [0, a].
        L1: Lipschitz constant of alpha1^{-1} on [0, M].
    """

    l11: float
    l12: float
    l2: float
    L: float
    L1: float

    def __post_init__(self) -> None:
        for name in ("l11", "l12", "l2", "L", "L1"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise RejectedInputError(f"Lipschitz constant {name} must be finite and >= 0, got {value}")

    @property
    def fbar_sum(self) -> float:
        return self.l11 + self.l12 + self.l2

    @property
    def product(self) -> float:
        """L * L1 * (l11 + l12 + l2), which mu must exceed."""
        return self.L * self.L1 * self.fbar_sum

    def to_dict(self) -> dict[str, float]:
        return {"l11": self.l11, "l12": self.l12, "l2": self.l2, "L": self.L, "L1": self.L1}


@dataclass(frozen=True)
class TunerResult:
    """Trigger parameters together with the constants that certify them.

    Attributes:
        sigma, a, b: The execution-rule parameters.
        c: mu - sigma.
        m_tilde: alpha2(||phi(0)||) + alpha3(||phi||_past).
        m_bar: Contribution of the time-dependent threshold to the V bound.
        m: m_bar + m_tilde.
        xi: Auxiliary rate, only meaningful when b == c.
        eta: Decay rate of the V bound: min(b, c), or xi when b == c.
        nontrivial_certified: Whether b < c and the nontriviality condition hold.
        mode: Trigger mode the parameters are meant for.
    """

    sigma: float
    a: float
    b: float
    c: float
    m_tilde: float
    m_bar: float
    m: float
    xi: float | None
    eta: float
    nontrivial_certified: bool
    mode: TriggerMode = TriggerMode.FULL

    @property
    def params(self) -> TriggerParams:
        return TriggerParams(sigma=self.sigma, a=self.a, b=self.b, mode=self.mode)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sigma": self.sigma,
            "a": self.a,
            "b": self.b,
            "mode": str(self.mode),
            "c": self.c,
            "m_tilde": self.m_tilde,
            "m_bar": self.m_bar,
            "m": self.m,
            "xi": self.xi,
            "eta": self.eta,
            "nontrivial_certified": self.nontrivial_certified,
        }


def linear_lipschitz_constants(
    system: LinearDelaySystem,
    cert: KrasovskiiCertificate,
    norm: MatrixNorm = MatrixNorm.SPECTRAL,
) -> LipschitzConstants:
    """||I - A1||, ||A2||, ||BK|| in the given norm plus the certificate's L and L1."""
    identity = np.eye(system.dim)
    return LipschitzConstants(
        l11=induced_norm(identity - system.A1, norm),
        l12=induced_norm(system.A2, norm),
        l2=induced_norm(system.bk, norm),
        L=cert.chi_lipschitz,
        L1=cert.alpha1_inv_lipschitz,
    )


def compute_m_tilde(cert: KrasovskiiCertificate, phi: HistoryWindow) -> float:
    """alpha2(||phi(0)||) + alpha3(||phi||_past) for the initial function."""
    current = euclidean_norm(phi[0])
    return cert.alpha2(current) + cert.alpha3(phi.past_norm)


def compute_m_bar(a: float, L: float, b: float, c: float, xi: float | None = None) -> float:
    """Bound contribution aL/|c - b|, or its logarithmic form when b == c.

    Raises:
        RejectedInputError: If b == c and xi is not in (0, b).
    """
    if not 0.0 < b < 1.0:
        raise RejectedInputError(f"b must lie in (0, 1), got {b}")
    if a == 0.0:
        return 0.0
    if b != c:
        return a * L / abs(c - b)
    if xi is None or not 0.0 < xi < b:
        raise RejectedInputError(f"b == c needs xi in (0, {b}), got {xi}")
    return a * L / ((1.0 - c) * (math.log(1.0 - xi) - math.log(1.0 - c)))


def decay_rate(b: float, c: float, xi: float | None = None) -> float:
    """eta = min(b, c) when b != c, otherwise xi."""
    if b != c:
        return min(b, c)
    if xi is None:
        raise RejectedInputError("b == c needs xi to define the decay rate")
    return xi


def nontriviality_bound(
    b: float, consts: LipschitzConstants, m: float, tau: int, variant: NontrivialityVariant
) -> float:
    """Smallest admissible a for the chosen variant of the nontriviality condition."""
    if not 0.0 < b < 1.0:
        raise RejectedInputError(f"b must lie in (0, 1), got {b}")
    delay_factor = (1.0 - b) ** tau
    if variant is NontrivialityVariant.COMBINED:
        inner = (consts.l11 + consts.l12) / delay_factor + consts.l2
    else:
        inner = consts.l11 + consts.l12 / delay_factor + consts.l2
    return m * consts.L1 / (1.0 - b) * inner


def check_nontriviality(
    params: TriggerParams,
    consts: LipschitzConstants,
    m: float,
    tau: int,
    variant: NontrivialityVariant = NontrivialityVariant.SPLIT,
) -> bool:
    """Whether a meets the lower bound that rules out back-to-back updates.

    ``split`` weighs the current and past Lipschitz parts separately;
    ``combined`` lumps them (more conservative).
    """
    return params.a >= nontriviality_bound(
        params.b, consts, m, tau, NontrivialityVariant(variant)
    )


def check_linear_feasibility(
    system: LinearDelaySystem, norm: MatrixNorm = MatrixNorm.SPECTRAL
) -> bool:
    """Closed-form test that a certified trigger design exists for a tau = 1 plant.

    2 - ||A1+BK|| - sqrt(||A1+BK||^2 + 4||A2||) >= 2||BK|| (||I-A1|| + ||A2|| + ||BK||)
    """
    if system.tau != 1:
        raise RejectedInputError(f"Feasibility test needs tau = 1, got {system.tau}")
    q = induced_norm(system.closed_loop, norm)
    d = induced_norm(system.A2, norm)
    bk = induced_norm(system.bk, norm)
    drift = induced_norm(np.eye(system.dim) - system.A1, norm)
    lhs = 2.0 - q - math.sqrt(q * q + 4.0 * d)
    rhs = 2.0 * bk * (drift + d + bk)
    return lhs >= rhs


def satisfies_rate_condition(c: float, consts: LipschitzConstants) -> bool:
    return c > consts.product


def amplitude_ratio(a: float, c: float, m_tilde: float, consts: LipschitzConstants) -> float:
    """L1 (l11 + l12 + l2) (L / c + M~ / a); must stay below 1."""
    return consts.L1 * consts.fbar_sum * (consts.L / c + m_tilde / a)


def decay_ratio(
    b: float, a: float, c: float, m_tilde: float, consts: LipschitzConstants, tau: int
) -> float:
    """Left side of the b condition; at most 1 means a certified design."""
    inner = consts.l11 + consts.l12 / (1.0 - b) ** tau + consts.l2
    return consts.L1 / (1.0 - b) * inner * (consts.L / (c - b) + m_tilde / a)


def satisfies_amplitude_condition(
    a: float, c: float, m_tilde: float, consts: LipschitzConstants
) -> bool:
    return amplitude_ratio(a, c, m_tilde, consts) < 1.0


def satisfies_decay_condition(
    b: float, a: float, c: float, m_tilde: float, consts: LipschitzConstants, tau: int
) -> bool:
    return 0.0 < b < c and decay_ratio(b, a, c, m_tilde, consts, tau) <= 1.0


def evaluate_constants(
    params: TriggerParams,
    cert: KrasovskiiCertificate,
    consts: LipschitzConstants,
    phi: HistoryWindow,
    xi: float | None = None,
) -> TunerResult:
    """Re-validate user-supplied parameters against one initial function.

    When b == c and no xi is given, xi = b / 2.
    """
    c = cert.mu - params.sigma
    m_tilde = compute_m_tilde(cert, phi)
    if c <= 0.0:
        logger.warning(f"sigma={params.sigma} >= mu={cert.mu}: no decay guarantee")
        return TunerResult(
            sigma=params.sigma, a=params.a, b=params.b, c=c, m_tilde=m_tilde,
            m_bar=math.inf, m=math.inf, xi=None, eta=0.0,
            nontrivial_certified=False, mode=params.mode,
        )
    if params.b == c and xi is None:
        xi = params.b / 2.0
    m_bar = compute_m_bar(params.a, consts.L, params.b, c, xi)
    m = m_bar + m_tilde
    eta = decay_rate(params.b, c, xi)
    certified = params.b < c and check_nontriviality(params, consts, m, phi.tau)
    return TunerResult(
        sigma=params.sigma, a=params.a, b=params.b, c=c, m_tilde=m_tilde,
        m_bar=m_bar, m=m, xi=xi if params.b == c else None, eta=eta,
        nontrivial_certified=certified, mode=params.mode,
    )


def _search_sigma(mu: float, consts: LipschitzConstants) -> float:
    sigma = 0.5 * mu
    for _ in range(_MAX_GRID_STEPS):
        if satisfies_rate_condition(mu - sigma, consts):
            return sigma
        sigma *= _GRID_RATIO
    if satisfies_rate_condition(mu, consts):
        return 0.0
    raise SearchFailedError("sigma", {"sigma": sigma, "mu": mu})


def _search_amplitude(c: float, m_tilde: float, consts: LipschitzConstants) -> float:
    floor = consts.L1 * consts.fbar_sum * consts.L / c
    target = max(_AMPLITUDE_MARGIN, 0.5 * (1.0 + floor))
    a = m_tilde if m_tilde > 0.0 else 1.0
    for _ in range(_MAX_GRID_STEPS):
        if amplitude_ratio(a, c, m_tilde, consts) <= target:
            return a
        a /= _GRID_RATIO
    raise SearchFailedError("a", {"a": a, "c": c, "target": target})


def _search_decay(
    a: float, c: float, m_tilde: float, consts: LipschitzConstants, tau: int
) -> float:
    b = 0.5 * c
    for _ in range(_MAX_GRID_STEPS):
        if satisfies_decay_condition(b, a, c, m_tilde, consts, tau):
            return b
        b *= _GRID_RATIO
    raise SearchFailedError("b", {"a": a, "b": b, "c": c})


def _refreshed_chi_lipschitz(
    cert: KrasovskiiCertificate, consts: LipschitzConstants, a: float
) -> LipschitzConstants | None:
    lipschitz_on = getattr(cert.chi, "lipschitz_on", None)
    if cert.chi_is_linear or lipschitz_on is None:
        return None
    tightened = lipschitz_on(a)
    if tightened is None or tightened <= consts.L:
        return None
    return LipschitzConstants(consts.l11, consts.l12, consts.l2, tightened, consts.L1)


def tune(
    mu: float,
    consts: LipschitzConstants,
    phi: HistoryWindow,
    cert: KrasovskiiCertificate,
    tau: int,
) -> TunerResult:
    """Select (sigma, a, b) certifying a strongly nontrivial event sequence.

    The three conditions are solved in order over geometric grids: sigma
    downward from mu / 2, a upward from M~, b downward from c / 2.

    Args:
        mu: Decay rate of the certificate.
        consts: Lipschitz structure of the closed loop.
        phi: Initial function; M~ and hence a depend on it.
        cert: Certificate supplying alpha2, alpha3 and chi.
        tau: Delay of the plant.

    Returns:
        A result with nontrivial_certified = True.

    Raises:
        TunerInfeasibleError: If mu <= L L1 (l11 + l12 + l2).
        SearchFailedError: If a grid is exhausted or the Lipschitz constant of
            chi on [0, a] does not settle.
    """
    if mu <= consts.product:
        raise TunerInfeasibleError(mu, consts.product)
    m_tilde = compute_m_tilde(cert, phi)

    sigma = _search_sigma(mu, consts)
    c = mu - sigma
    a = _search_amplitude(c, m_tilde, consts)
    for _ in range(_MAX_RETUNES):
        refreshed = _refreshed_chi_lipschitz(cert, consts, a)
        if refreshed is None:
            break
        logger.info(f"chi Lipschitz constant on [0, {a:.4g}] is {refreshed.L:.4g}; retuning")
        consts = refreshed
        if mu <= consts.product:
            raise TunerInfeasibleError(mu, consts.product)
        sigma = _search_sigma(mu, consts)
        c = mu - sigma
        a = _search_amplitude(c, m_tilde, consts)
    else:
        # L on [0, a] must cover the final a
        if _refreshed_chi_lipschitz(cert, consts, a) is not None:
            raise SearchFailedError(
                "a", {"a": a, "L": consts.L, "reason": "chi Lipschitz constant kept growing"}
            )
    b = _search_decay(a, c, m_tilde, consts, tau)

    m_bar = compute_m_bar(a, consts.L, b, c)
    result = TunerResult(
        sigma=sigma, a=a, b=b, c=c, m_tilde=m_tilde, m_bar=m_bar, m=m_bar + m_tilde,
        xi=None, eta=decay_rate(b, c), nontrivial_certified=True,
    )
    if not check_nontriviality(result.params, consts, result.m, tau):
        raise SearchFailedError("b", {"sigma": sigma, "a": a, "b": b, "reason": "revalidation"})
    logger.info(f"Tuned sigma={sigma:.6g}, a={a:.6g}, b={b:.6g} (c={c:.6g}, M={result.m:.6g})")
    return result
