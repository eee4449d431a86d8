"""Named bundles of security parameters a vehicle can run under.

A policy ties together the pseudonym change policy, the certificate omission
strategy, and the verification budget, so different vehicle classes (or
experiment arms) can be configured by name instead of by a dozen scattered
numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

from .beaconing import BeaconingError, OmissionStrategy
from .identity import PseudonymChangePolicy


@dataclass(frozen=True)
class VehiclePolicy:
    change_policy: PseudonymChangePolicy
    strategy: OmissionStrategy
    budget_per_second: int = 50
    queue_capacity: int = 64

    def __post_init__(self) -> None:
        if self.budget_per_second < 1:
            raise BeaconingError("budget must be at least 1 per second")
        if self.queue_capacity < 1:
            raise BeaconingError("queue capacity must be positive")


class PolicySet:
    """Registry of named vehicle policies. Lookup of a missing name raises."""

    def __init__(self) -> None:
        self._policies: dict[str, VehiclePolicy] = {}

    def add(self, name: str, policy: VehiclePolicy) -> None:
        if not name:
            raise ValueError("policy name must be nonempty")
        self._policies[name] = policy

    def get(self, name: str) -> VehiclePolicy:
        try:
            return self._policies[name]
        except KeyError:
            raise KeyError(f"no policy named {name!r}") from None

    def names(self) -> list[str]:
        return sorted(self._policies)

    def __contains__(self, name: str) -> bool:
        return name in self._policies

    def __len__(self) -> int:
        return len(self._policies)
