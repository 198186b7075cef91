"""Pure guide-job state machine: states, events, transition table, replay.

advance() is a pure function of (job, event); everything time- or IO-shaped
(timers, message intake, command publishing) lives in the engine. That is
what makes a job's transition log replayable bit-for-bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Union

from guidefleet.core.errors import FleetError
from guidefleet.core.types import Position


class IllegalTransition(FleetError):
    pass


class JobState(str, enum.Enum):
    ALLOCATING = "allocating"
    DISPATCHING_PICKUP = "dispatching_pickup"
    PICKUP = "pickup"
    DISPATCHING_GUIDE = "dispatching_guide"
    GUIDING = "guiding"
    DISPATCHING_RETURN = "dispatching_return"
    RETURNING = "returning"
    COMPLETED = "completed"
    FAILED = "failed"
    CANCELED = "canceled"


TERMINAL_STATES = frozenset({JobState.COMPLETED, JobState.FAILED, JobState.CANCELED})

# Task-phase names used for timeouts and failure reasons.
_PHASE_FOR_STATE = {
    JobState.DISPATCHING_PICKUP: "pickup",
    JobState.PICKUP: "pickup",
    JobState.DISPATCHING_GUIDE: "guiding",
    JobState.GUIDING: "guiding",
    JobState.DISPATCHING_RETURN: "returning",
    JobState.RETURNING: "returning",
}


class CommandKind(str, enum.Enum):
    PICKUP = "pickup"
    GUIDE = "guide"
    RETURN = "return"
    ABORT = "abort"


class EventKind(str, enum.Enum):
    ROBOT_ALLOCATED = "robot_allocated"
    COMMAND_ACKED = "command_acked"
    COMMAND_REFUSED = "command_refused"
    TASK_COMPLETED = "task_completed"
    TASK_FAILED = "task_failed"
    TIMEOUT = "timeout"
    ROBOT_OFFLINE = "robot_offline"
    CANCEL = "cancel"


@dataclass(frozen=True)
class JobEvent:
    kind: EventKind
    phase: str | None = None
    reason: str | None = None
    robot_id: str | None = None
    command_id: str | None = None

    def cause(self) -> str:
        if self.kind is EventKind.TIMEOUT:
            return f"{self.phase}-timeout"
        if self.kind is EventKind.TASK_FAILED:
            return f"task-failed:{self.reason}" if self.reason else "task-failed"
        return self.kind.value.replace("_", "-")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "phase": self.phase,
            "reason": self.reason,
            "robot_id": self.robot_id,
            "command_id": self.command_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JobEvent":
        return cls(
            kind=EventKind(d["kind"]),
            phase=d.get("phase"),
            reason=d.get("reason"),
            robot_id=d.get("robot_id"),
            command_id=d.get("command_id"),
        )


@dataclass(frozen=True)
class PublishCommand:
    kind: CommandKind


@dataclass(frozen=True)
class ReleaseRobot:
    pass


@dataclass(frozen=True)
class Notify:
    severity: str  # info | warning | error
    message: str


Action = Union[PublishCommand, ReleaseRobot, Notify]


@dataclass(frozen=True)
class GuideRequest:
    request_id: str
    reception_robot: str
    destination_id: str
    facial_blob: str  # blob id; may reference an empty blob
    created_at_ms: int

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "reception_robot": self.reception_robot,
            "destination_id": self.destination_id,
            "facial_blob": self.facial_blob,
            "created_at_ms": self.created_at_ms,
        }


@dataclass(frozen=True)
class TaskTimeouts:
    pickup_s: float = 120.0
    guiding_s: float = 600.0
    returning_s: float = 600.0

    def for_phase(self, phase: str) -> float:
        return {"pickup": self.pickup_s, "guiding": self.guiding_s, "returning": self.returning_s}[phase]


@dataclass(frozen=True)
class Command:
    command_id: str
    robot_id: str
    kind: CommandKind
    destination: Position | None
    blob_url: str | None
    issued_at_ms: int

    def to_payload(self) -> dict:
        return {
            "command_id": self.command_id,
            "kind": self.kind.value,
            "destination": self.destination.to_dict() if self.destination else None,
            "blob_url": self.blob_url,
            "issued_at": self.issued_at_ms,
        }


@dataclass(frozen=True)
class TransitionRecord:
    from_state: str
    to_state: str
    cause: str
    at_ms: int
    at_ns: int
    event: dict | None  # serialized JobEvent; None for the creation record

    def to_dict(self) -> dict:
        return {
            "from": self.from_state,
            "to": self.to_state,
            "cause": self.cause,
            "at_ms": self.at_ms,
            "at_ns": self.at_ns,
            "event": self.event,
        }


@dataclass(frozen=True)
class GuideJob:
    job_id: str
    request: GuideRequest
    state: JobState
    assigned_robot: str | None = None
    failure_reason: str | None = None
    transitions: tuple[TransitionRecord, ...] = ()
    created_at_ms: int = 0
    poll_interval_s: float = 2.0
    timeouts: TaskTimeouts = field(default_factory=TaskTimeouts)
    phase_started_ns: int | None = None
    current_command_id: str | None = None

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES

    @property
    def phase(self) -> str | None:
        return _PHASE_FOR_STATE.get(self.state)

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "request": self.request.to_dict(),
            "state": self.state.value,
            "assigned_robot": self.assigned_robot,
            "failure_reason": self.failure_reason,
            "created_at_ms": self.created_at_ms,
            "transitions": [t.to_dict() for t in self.transitions],
        }


def new_job(
    job_id: str,
    request: GuideRequest,
    now_ms: int,
    now_ns: int,
    poll_interval_s: float = 2.0,
    timeouts: TaskTimeouts | None = None,
) -> GuideJob:
    record = TransitionRecord(
        from_state="created",
        to_state=JobState.ALLOCATING.value,
        cause="created",
        at_ms=now_ms,
        at_ns=now_ns,
        event=None,
    )
    return GuideJob(
        job_id=job_id,
        request=request,
        state=JobState.ALLOCATING,
        transitions=(record,),
        created_at_ms=now_ms,
        poll_interval_s=poll_interval_s,
        timeouts=timeouts or TaskTimeouts(),
    )


_ACK_NEXT = {
    JobState.DISPATCHING_PICKUP: JobState.PICKUP,
    JobState.DISPATCHING_GUIDE: JobState.GUIDING,
    JobState.DISPATCHING_RETURN: JobState.RETURNING,
}

_COMPLETED_NEXT = {
    JobState.PICKUP: (JobState.DISPATCHING_GUIDE, CommandKind.GUIDE),
    JobState.GUIDING: (JobState.DISPATCHING_RETURN, CommandKind.RETURN),
    JobState.RETURNING: (JobState.COMPLETED, None),
}


def advance(job: GuideJob, event: JobEvent, now_ms: int, now_ns: int) -> tuple[GuideJob, list[Action]]:
    """Apply one event; returns the new job plus the side effects to perform.

    Raises IllegalTransition when the event is not legal in the current state
    (terminal states absorb nothing).
    """
    if job.terminal:
        raise IllegalTransition(f"job {job.job_id} is terminal ({job.state.value})")

    kind = event.kind
    actions: list[Action] = []

    if kind is EventKind.ROBOT_ALLOCATED:
        if job.state is not JobState.ALLOCATING or not event.robot_id:
            raise IllegalTransition(f"robot_allocated not legal in {job.state.value}")
        nxt = replace(job, state=JobState.DISPATCHING_PICKUP, assigned_robot=event.robot_id, phase_started_ns=now_ns)
        actions.append(PublishCommand(CommandKind.PICKUP))

    elif kind is EventKind.COMMAND_ACKED:
        target = _ACK_NEXT.get(job.state)
        if target is None:
            raise IllegalTransition(f"command_acked not legal in {job.state.value}")
        nxt = replace(job, state=target)

    elif kind is EventKind.COMMAND_REFUSED:
        if job.state not in _ACK_NEXT:
            raise IllegalTransition(f"command_refused not legal in {job.state.value}")
        nxt = replace(job, state=JobState.FAILED, failure_reason="command-refused")
        if job.assigned_robot:
            actions.append(ReleaseRobot())
        actions.append(Notify("error", f"job {job.job_id}: command refused by {job.assigned_robot}"))

    elif kind is EventKind.TASK_COMPLETED:
        step = _COMPLETED_NEXT.get(job.state)
        if step is None:
            raise IllegalTransition(f"task_completed not legal in {job.state.value}")
        target, command = step
        if command is not None:
            nxt = replace(job, state=target, phase_started_ns=now_ns)
            actions.append(PublishCommand(command))
        else:
            nxt = replace(job, state=target)
            actions.append(ReleaseRobot())
            actions.append(Notify("info", f"job {job.job_id} completed by {job.assigned_robot}"))

    elif kind in (EventKind.TASK_FAILED, EventKind.TIMEOUT, EventKind.ROBOT_OFFLINE):
        if kind is EventKind.TIMEOUT:
            reason = f"{event.phase}-timeout"
        elif kind is EventKind.ROBOT_OFFLINE:
            reason = "robot-offline"
        else:
            reason = event.reason or (f"{event.phase}-failed" if event.phase else "task-failed")
        nxt = replace(job, state=JobState.FAILED, failure_reason=reason)
        if job.assigned_robot:
            actions.append(PublishCommand(CommandKind.ABORT))
            actions.append(ReleaseRobot())
        actions.append(Notify("error", f"job {job.job_id} failed: {reason}"))

    elif kind is EventKind.CANCEL:
        nxt = replace(job, state=JobState.CANCELED)
        if job.assigned_robot:
            actions.append(PublishCommand(CommandKind.ABORT))
            actions.append(ReleaseRobot())
        actions.append(Notify("warning", f"job {job.job_id} canceled"))

    else:  # pragma: no cover - enum is closed
        raise IllegalTransition(f"unknown event {kind}")

    record = TransitionRecord(
        from_state=job.state.value,
        to_state=nxt.state.value,
        cause=event.cause(),
        at_ms=now_ms,
        at_ns=now_ns,
        event=event.to_dict(),
    )
    nxt = replace(nxt, transitions=job.transitions + (record,))
    return nxt, actions


def job_log(job: GuideJob) -> list[dict]:
    """Structured per-transition records, oldest first."""
    return [
        {"job_id": job.job_id, "robot_id": job.assigned_robot, **t.to_dict()}
        for t in job.transitions
    ]


def replay_job(job: GuideJob) -> GuideJob:
    """Rebuild a job by replaying its transition log through advance()."""
    if not job.transitions or job.transitions[0].event is not None:
        raise ValueError("transition log must start with the creation record")
    created = job.transitions[0]
    rebuilt = new_job(
        job.job_id,
        job.request,
        created.at_ms,
        created.at_ns,
        poll_interval_s=job.poll_interval_s,
        timeouts=job.timeouts,
    )
    for record in job.transitions[1:]:
        if record.event is None:
            raise ValueError("non-initial record missing its event")
        rebuilt, _ = advance(rebuilt, JobEvent.from_dict(record.event), record.at_ms, record.at_ns)
    # current_command_id is engine bookkeeping; carry it over for comparison
    return replace(rebuilt, current_command_id=job.current_command_id)
