"""Violation reports produced by the trace checkers."""

from dataclasses import dataclass, field
from typing import Any

# Absolute slack for inequality checks along traces; V values stay O(1)-O(30).
TRACE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Violation:
    """One step where a checked inequality failed: lhs > rhs (+ tolerance)."""

    k: int
    lhs: float
    rhs: float
    check: str

    def to_dict(self) -> dict[str, Any]:
        return {"k": self.k, "lhs": self.lhs, "rhs": self.rhs, "check": self.check}


@dataclass
class ViolationReport:
    """Outcome of checking one property along a trace.

    Attributes:
        name: Short identifier of the property checked.
        violations: Every failing step, in increasing k.
        checked_steps: How many steps were examined.
    """

    name: str
    violations: list[Violation] = field(default_factory=list)
    checked_steps: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def steps(self) -> list[int]:
        return sorted({v.k for v in self.violations})

    def add(self, k: int, lhs: float, rhs: float, check: str | None = None) -> None:
        self.violations.append(Violation(k=k, lhs=lhs, rhs=rhs, check=check or self.name))

    def to_dict(self, limit: int = 20) -> dict[str, Any]:
        return {
            "name": self.name,
            "ok": self.ok,
            "checked_steps": self.checked_steps,
            "violation_count": len(self.violations),
            "violations": [v.to_dict() for v in self.violations[:limit]],
        }
