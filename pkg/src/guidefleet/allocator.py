"""Guide-robot selection: filter by status/battery/freshness, pick minimum mileage.

Selection is pure over one store snapshot; the reservation table is the
single serialization point that prevents double assignment.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from guidefleet.core.clock import Clock
from guidefleet.core.errors import FleetError
from guidefleet.core.types import OperationalStatus, RobotKind
from guidefleet.shadow import ShadowView


class NoRobotAvailable(FleetError):
    def __init__(self, snapshot: tuple["CandidateRecord", ...] = ()):
        super().__init__("no eligible guide robot")
        self.snapshot = snapshot


class AlreadyReserved(FleetError):
    pass


class UnknownReservation(FleetError):
    pass


@dataclass(frozen=True)
class AllocationPolicy:
    min_battery_pct: float = 30.0
    eligible_statuses: frozenset[OperationalStatus] = frozenset({OperationalStatus.IDLE})
    require_fresh_shadow: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.min_battery_pct <= 100.0):
            raise ValueError("min_battery_pct must be in [0, 100]")
        if not self.eligible_statuses:
            raise ValueError("eligible_statuses must be nonempty")


@dataclass(frozen=True)
class CandidateRecord:
    robot_id: str
    status: str
    battery_pct: float | None
    mileage_m: float | None
    eligible: bool
    reason: str

    def to_dict(self) -> dict:
        return {
            "robot_id": self.robot_id,
            "status": self.status,
            "battery_pct": self.battery_pct,
            "mileage_m": self.mileage_m,
            "eligible": self.eligible,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class AllocationResult:
    robot_id: str
    decided_at_ms: int
    snapshot: tuple[CandidateRecord, ...]

    def to_dict(self) -> dict:
        return {
            "robot_id": self.robot_id,
            "decided_at_ms": self.decided_at_ms,
            "snapshot": [c.to_dict() for c in self.snapshot],
        }


def eligible(view: ShadowView, policy: AllocationPolicy) -> tuple[bool, str]:
    """Eligibility of one shadow, with a machine-readable reason."""
    if view.kind is not RobotKind.GUIDE:
        return False, "wrong-kind"
    f = view.fields
    if not (f["status"].reported and f["battery"].reported and f["mileage"].reported):
        return False, "never-reported"
    if policy.require_fresh_shadow and (f["status"].stale or f["position"].stale):
        return False, "stale-shadow"
    if view.effective_status not in policy.eligible_statuses:
        return False, "busy"
    if view.battery_pct < policy.min_battery_pct:  # type: ignore[operator]
        return False, "low-battery"
    return True, "eligible"


def select_robot(
    shadows: list[ShadowView],
    policy: AllocationPolicy,
    clock: Clock,
) -> AllocationResult:
    """Pick the eligible robot with minimum mileage; ties break on robot id.

    The returned snapshot records every candidate with its eligibility
    verdict, which becomes the audit record for the decision.
    """
    snapshot: list[CandidateRecord] = []
    best: tuple[float, str] | None = None
    for view in shadows:
        ok, reason = eligible(view, policy)
        snapshot.append(
            CandidateRecord(
                robot_id=view.robot_id,
                status=view.effective_status.value,
                battery_pct=view.battery_pct,
                mileage_m=view.mileage_m,
                eligible=ok,
                reason=reason,
            )
        )
        if ok:
            key = (view.mileage_m, view.robot_id)  # type: ignore[arg-type]
            if best is None or key < best:
                best = key
    if best is None:
        raise NoRobotAvailable(tuple(snapshot))
    return AllocationResult(
        robot_id=best[1],
        decided_at_ms=clock.wall(),
        snapshot=tuple(snapshot),
    )


@dataclass(frozen=True)
class ReservationEvent:
    action: str  # "reserve" | "release"
    robot_id: str
    job_id: str
    at_ns: int


class ReservationTable:
    """Atomic robot-to-job binding with an append-only event log.

    The log exists so tests can check linearizability: no robot ever holds
    two overlapping reservations.
    """

    def __init__(self, clock: Clock):
        self.clock = clock
        self._held: dict[str, str] = {}
        self._log: list[ReservationEvent] = []
        self._lock = threading.Lock()

    def reserve(self, robot_id: str, job_id: str) -> None:
        with self._lock:
            holder = self._held.get(robot_id)
            if holder is not None:
                raise AlreadyReserved(f"robot {robot_id!r} already bound to job {holder!r}")
            self._held[robot_id] = job_id
            self._log.append(ReservationEvent("reserve", robot_id, job_id, self.clock.now()))

    def release(self, robot_id: str, job_id: str) -> None:
        with self._lock:
            holder = self._held.get(robot_id)
            if holder != job_id:
                raise UnknownReservation(f"robot {robot_id!r} not bound to job {job_id!r}")
            del self._held[robot_id]
            self._log.append(ReservationEvent("release", robot_id, job_id, self.clock.now()))

    def holder(self, robot_id: str) -> str | None:
        with self._lock:
            return self._held.get(robot_id)

    def log(self) -> list[ReservationEvent]:
        with self._lock:
            return list(self._log)
