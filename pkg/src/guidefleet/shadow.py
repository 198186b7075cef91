"""Robot Shadow store: last recorded state per robot with staleness semantics.

Reads never fail for a registered robot. A field is stale once its refresh
interval times the staleness factor has passed without an update; the status
field is special-cased: it is event-driven, so its staleness (and the derived
offline status) is judged by the position heartbeat, the fastest periodic
stream a live robot produces.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

from guidefleet.core.clock import Clock
from guidefleet.core.errors import FleetError
from guidefleet.core.types import OperationalStatus, Position, RobotKind, validate_robot_id

FIELD_NAMES = ("position", "battery", "status", "mileage")


class DuplicateRobot(FleetError):
    pass


class UnknownRobot(FleetError):
    pass


class InconsistentMileage(FleetError):
    """Cumulative mileage can never decrease."""


class InvalidReport(FleetError):
    pass


@dataclass(frozen=True)
class FieldReport:
    """One robot-side report for one shadow field.

    seq is per (robot, field) and strictly increasing, starting at 1; it is
    what makes merges idempotent and order-insensitive.
    """

    field: str
    value: object
    seq: int
    reported_at: int  # robot-side monotonic ns, informational only

    def __post_init__(self) -> None:
        if self.field not in FIELD_NAMES:
            raise InvalidReport(f"unknown field {self.field!r}")
        if self.seq < 1:
            raise InvalidReport("report seq must be >= 1")


@dataclass(frozen=True)
class ReportingPolicy:
    """Per-field refresh cadences and the staleness multiplier."""

    position_interval_s: float = 2.0
    battery_interval_s: float = 10.0
    mileage_interval_s: float = 10.0
    staleness_factor: float = 3.0

    def __post_init__(self) -> None:
        for name in ("position_interval_s", "battery_interval_s", "mileage_interval_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.staleness_factor <= 0:
            raise ValueError("staleness_factor must be > 0")

    def interval_s(self, field_name: str) -> float:
        # status is event-driven; its liveness rides the position heartbeat
        if field_name in ("position", "status"):
            return self.position_interval_s
        if field_name == "battery":
            return self.battery_interval_s
        return self.mileage_interval_s

    def staleness_threshold_ns(self, field_name: str) -> int:
        return int(self.interval_s(field_name) * self.staleness_factor * 1e9)


@dataclass
class _Slot:
    value: object = None
    seq: int = 0
    reported: bool = False
    applied_mono_ns: int = 0
    applied_wall_ms: int = 0


@dataclass(frozen=True)
class FieldView:
    value: object
    seq: int
    reported: bool
    last_update_ms: int | None
    stale: bool


@dataclass(frozen=True)
class ShadowView:
    """Immutable snapshot of one robot shadow with per-field staleness flags."""

    robot_id: str
    kind: RobotKind
    fields: dict[str, FieldView]
    effective_status: OperationalStatus
    current_job: str | None

    @property
    def battery_pct(self) -> float | None:
        v = self.fields["battery"].value
        return float(v) if v is not None else None

    @property
    def mileage_m(self) -> float | None:
        v = self.fields["mileage"].value
        return float(v) if v is not None else None

    @property
    def position(self) -> Position | None:
        return self.fields["position"].value  # type: ignore[return-value]

    def to_dict(self) -> dict:
        out: dict = {
            "robot_id": self.robot_id,
            "kind": self.kind.value,
            "effective_status": self.effective_status.value,
            "current_job": self.current_job,
            "fields": {},
        }
        for name, fv in self.fields.items():
            value = fv.value
            if isinstance(value, Position):
                value = value.to_dict()
            elif isinstance(value, OperationalStatus):
                value = value.value
            out["fields"][name] = {
                "value": value,
                "seq": fv.seq,
                "last_update_ms": fv.last_update_ms,
                "stale": fv.stale,
                "reported": fv.reported,
            }
        return out


@dataclass
class _Record:
    robot_id: str
    kind: RobotKind
    slots: dict[str, _Slot] = field(default_factory=lambda: {n: _Slot() for n in FIELD_NAMES})
    current_job: str | None = None
    out_of_order: int = 0


def _check_value(field_name: str, value: object) -> object:
    if field_name == "position":
        if not isinstance(value, Position):
            raise InvalidReport("position report must carry a Position")
        return value
    if field_name == "battery":
        pct = float(value)  # type: ignore[arg-type]
        if not (0.0 <= pct <= 100.0):
            raise InvalidReport(f"battery {pct} outside [0, 100]")
        return pct
    if field_name == "status":
        status = OperationalStatus(value)
        if status is OperationalStatus.OFFLINE:
            raise InvalidReport("offline is derived from staleness, never self-reported")
        return status
    meters = float(value)  # type: ignore[arg-type]
    if meters < 0:
        raise InvalidReport("mileage must be >= 0")
    return meters


class ShadowStore:
    """Thread-safe store of robot shadows; merges per robot are serialized."""

    def __init__(
        self,
        clock: Clock,
        policy: ReportingPolicy | None = None,
        on_change: Callable[[ShadowView], None] | None = None,
    ):
        self.clock = clock
        self.policy = policy or ReportingPolicy()
        self.on_change = on_change
        self._records: dict[str, _Record] = {}
        self._lock = threading.RLock()

    def register(self, robot_id: str, kind: RobotKind) -> ShadowView:
        validate_robot_id(robot_id)
        with self._lock:
            if robot_id in self._records:
                raise DuplicateRobot(f"robot {robot_id!r} already registered")
            self._records[robot_id] = _Record(robot_id=robot_id, kind=kind)
            view = self._view(self._records[robot_id])
        self._notify(view)
        return view

    def registered(self, robot_id: str) -> bool:
        with self._lock:
            return robot_id in self._records

    def apply_report(self, robot_id: str, report: FieldReport) -> ShadowView:
        """Merge one report; stale/out-of-order seqs are counted and discarded."""
        with self._lock:
            rec = self._require(robot_id)
            slot = rec.slots[report.field]
            if report.seq <= slot.seq:
                rec.out_of_order += 1
                return self._view(rec)
            value = _check_value(report.field, report.value)
            if report.field == "mileage" and slot.reported and value < slot.value:  # type: ignore[operator]
                raise InconsistentMileage(
                    f"mileage {value} < recorded {slot.value} for {robot_id!r}"
                )
            slot.value = value
            slot.seq = report.seq
            slot.reported = True
            slot.applied_mono_ns = self.clock.now()
            slot.applied_wall_ms = self.clock.wall()
            view = self._view(rec)
        self._notify(view)
        return view

    def force_status(self, robot_id: str, status: OperationalStatus) -> ShadowView:
        """Server-side status transition (reserve/release); robot seqs still win.

        The stored seq is left untouched so any robot report with a newer seq
        overrides the forced value as soon as it arrives.
        """
        with self._lock:
            rec = self._require(robot_id)
            slot = rec.slots["status"]
            slot.value = status
            slot.reported = True
            slot.applied_mono_ns = self.clock.now()
            slot.applied_wall_ms = self.clock.wall()
            view = self._view(rec)
        self._notify(view)
        return view

    def set_current_job(self, robot_id: str, job_id: str | None) -> None:
        with self._lock:
            self._require(robot_id).current_job = job_id

    def get_shadow(self, robot_id: str) -> ShadowView:
        with self._lock:
            return self._view(self._require(robot_id))

    def list_shadows(
        self,
        kind: RobotKind | None = None,
        status: OperationalStatus | None = None,
    ) -> list[ShadowView]:
        with self._lock:
            views = [self._view(rec) for _, rec in sorted(self._records.items())]
        if kind is not None:
            views = [v for v in views if v.kind == kind]
        if status is not None:
            views = [v for v in views if v.effective_status == status]
        return views

    def out_of_order_count(self, robot_id: str) -> int:
        with self._lock:
            return self._require(robot_id).out_of_order

    def _require(self, robot_id: str) -> _Record:
        rec = self._records.get(robot_id)
        if rec is None:
            raise UnknownRobot(f"robot {robot_id!r} not registered")
        return rec

    def _stale(self, slot: _Slot, field_name: str, now_ns: int) -> bool:
        if not slot.reported:
            return True
        return (now_ns - slot.applied_mono_ns) > self.policy.staleness_threshold_ns(field_name)

    def _view(self, rec: _Record) -> ShadowView:
        now_ns = self.clock.now()
        heartbeat_stale = self._stale(rec.slots["position"], "position", now_ns)
        fields: dict[str, FieldView] = {}
        for name in FIELD_NAMES:
            slot = rec.slots[name]
            stale = heartbeat_stale if name == "status" else self._stale(slot, name, now_ns)
            fields[name] = FieldView(
                value=slot.value,
                seq=slot.seq,
                reported=slot.reported,
                last_update_ms=slot.applied_wall_ms if slot.reported else None,
                stale=stale,
            )
        status_slot = rec.slots["status"]
        if not status_slot.reported or fields["status"].stale:
            effective = OperationalStatus.OFFLINE
        else:
            effective = status_slot.value  # type: ignore[assignment]
        return ShadowView(
            robot_id=rec.robot_id,
            kind=rec.kind,
            fields=fields,
            effective_status=effective,
            current_job=rec.current_job,
        )

    def _notify(self, view: ShadowView) -> None:
        if self.on_change is not None:
            self.on_change(view)
