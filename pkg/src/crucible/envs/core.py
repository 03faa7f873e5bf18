from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, List, Tuple

DOMAINS = ("abr", "cartpole", "sched")


@dataclass(frozen=True)
class StepTriplet:
    state: str
    action: str
    outcome: str

    def __post_init__(self):
        if not self.state:
            raise ValueError("triplet state must be non-empty")

    def line(self) -> str:
        return f"state: {self.state} | action: {self.action} | outcome: {self.outcome}"

    def to_dict(self) -> dict:
        return {"state": self.state, "action": self.action, "outcome": self.outcome}


@dataclass(frozen=True)
class EnvironmentDescriptor:
    """A named evaluation environment.

    ``payload`` depends on the domain: an ``AbrPayload`` (traces + manifest),
    a tuple of integer seeds (cartpole), or a ``SchedPayload`` (workloads +
    executor count).
    """

    domain: str
    name: str
    payload: Any

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if not self.cases():
            raise ValueError(f"environment {self.name!r} has an empty payload")

    def cases(self) -> Tuple[str, ...]:
        """Stable identifiers for the traces / seeds / workloads in the payload."""
        if self.domain == "cartpole":
            return tuple(f"seed-{s}" for s in self.payload)
        if self.domain == "abr":
            return tuple(t.name for t in self.payload.traces)
        return tuple(w.name for w in self.payload.workloads)


@dataclass
class CaseResult:
    case_id: str
    score: float
    triplets: List[StepTriplet] = field(default_factory=list)
    failed: bool = False


@dataclass
class EvalResult:
    env: str
    score: float
    cases: List[CaseResult]

    @property
    def triplets(self) -> List[StepTriplet]:
        return [t for c in self.cases for t in c.triplets]

    def case_scores(self) -> dict:
        return {c.case_id: c.score for c in self.cases}
