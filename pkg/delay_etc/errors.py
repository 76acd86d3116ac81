"""Exceptions raised by the delay_etc package."""

from typing import Any


class DelayEtcError(Exception):
    """Base class for all package errors."""


class RejectedInputError(DelayEtcError, ValueError):
    """Input violates a documented precondition (shape, range, missing data)."""


class InfeasibleError(DelayEtcError):
    """The system admits no certified trigger design."""


class CertificateInfeasibleError(InfeasibleError):
    """The derived decay rate mu is not positive.

    Attributes:
        mu: The computed (non-positive) decay rate.
    """

    def __init__(self, mu: float) -> None:
        super().__init__(f"Certificate infeasible: mu = {mu:.6g} is not positive")
        self.mu = mu


class TunerInfeasibleError(InfeasibleError):
    """mu does not dominate the Lipschitz product, so no tuning exists.

    Attributes:
        mu: Decay rate of the certificate.
        lipschitz_product: L * L1 * (l11 + l12 + l2).
    """

    def __init__(self, mu: float, lipschitz_product: float) -> None:
        super().__init__(
            f"Tuning infeasible: mu = {mu:.6g} must exceed "
            f"L*L1*(l11+l12+l2) = {lipschitz_product:.6g}"
        )
        self.mu = mu
        self.lipschitz_product = lipschitz_product


class SearchFailedError(DelayEtcError):
    """A tuner grid sweep ran out of candidates.

    Attributes:
        stage: Which parameter was being searched ("sigma", "a" or "b").
        last_iterate: The last candidate values tried.
    """

    def __init__(self, stage: str, last_iterate: dict[str, Any]) -> None:
        super().__init__(f"Search for {stage} failed; last iterate {last_iterate}")
        self.stage = stage
        self.last_iterate = last_iterate


class DivergedError(DelayEtcError):
    """The simulated state became non-finite or exceeded the divergence guard.

    Attributes:
        last_finite_k: Last step whose state was finite and within the guard.
    """

    def __init__(self, last_finite_k: int) -> None:
        super().__init__(f"Simulation diverged after step {last_finite_k}")
        self.last_finite_k = last_finite_k


class InvariantViolationError(DelayEtcError):
    """A certified run reported violations of a guaranteed property."""
