"""Job engine: spins up a monitoring loop per guide job and runs it.

A loop polls on the job's interval, deriving events from robot task messages,
shadow staleness and phase timers, feeding them through the pure transition
function and executing the resulting actions (next command, release, operator
notification). Loops for different jobs are independent; the only shared
state is the reservation table and the shadow store.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import replace

from guidefleet.allocator import (
    AllocationPolicy,
    AlreadyReserved,
    NoRobotAvailable,
    ReservationTable,
    UnknownReservation,
    select_robot,
)
from guidefleet.audit import AuditLog
from guidefleet.blobvault import BlobVault
from guidefleet.broker.broker import Broker
from guidefleet.broker.links import Link
from guidefleet.core.clock import Clock
from guidefleet.core.errors import FleetError
from guidefleet.core.scheduling import Scheduler
from guidefleet.core.types import OperationalStatus, Position, RobotKind
from guidefleet.gateway.events import EventHub
from guidefleet.jobflow.model import (
    Action,
    Command,
    CommandKind,
    EventKind,
    GuideJob,
    GuideRequest,
    IllegalTransition,
    JobEvent,
    JobState,
    Notify,
    PublishCommand,
    ReleaseRobot,
    TaskTimeouts,
    advance,
    new_job,
)
from guidefleet.shadow import ShadowStore

_STATES_WITH_ROBOT = frozenset(
    {
        JobState.DISPATCHING_PICKUP,
        JobState.PICKUP,
        JobState.DISPATCHING_GUIDE,
        JobState.GUIDING,
        JobState.DISPATCHING_RETURN,
        JobState.RETURNING,
    }
)


class UnknownDestination(FleetError):
    pass


class UnknownJob(FleetError):
    pass


class NoActiveJob(FleetError):
    pass


class QueueFull(FleetError):
    def __init__(self, job_id: str):
        super().__init__(f"allocation queue full; job {job_id} failed")
        self.job_id = job_id


class JobEngine:
    def __init__(
        self,
        *,
        clock: Clock,
        scheduler: Scheduler,
        broker: Broker,
        shadows: ShadowStore,
        reservations: ReservationTable,
        vault: BlobVault,
        destinations: dict[str, Position],
        hub: EventHub,
        audit: AuditLog,
        policy: AllocationPolicy | None = None,
        timeouts: TaskTimeouts | None = None,
        poll_interval_s: float = 2.0,
        queue_cap: int = 16,
        app_link: Link | None = None,
        blob_url_ttl_s: int = 600,
    ):
        self.clock = clock
        self.scheduler = scheduler
        self.broker = broker
        self.shadows = shadows
        self.reservations = reservations
        self.vault = vault
        self.destinations = destinations
        self.hub = hub
        self.audit = audit
        self.policy = policy or AllocationPolicy()
        self.timeouts = timeouts or TaskTimeouts()
        self.poll_interval_s = poll_interval_s
        self.queue_cap = queue_cap
        self.app_link = app_link
        self.blob_url_ttl_s = blob_url_ttl_s

        self.jobs: dict[str, GuideJob] = {}
        self._queue: deque[str] = deque()
        self._inbox: dict[str, deque[dict]] = {}
        self._outstanding: dict[str, str] = {}
        self._command_seq = 0
        self._job_seq = 0
        self._ignored_events = 0
        self._lock = threading.RLock()

    # -- intake ----------------------------------------------------------

    def on_task_envelope(self, envelope) -> None:
        """Broker delivery callback for robots/{id}/task messages."""
        try:
            msg = json.loads(envelope.payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return
        robot_id = envelope.topic.split("/")[1]
        self.audit.record("task_status", robot_id=robot_id, **{k: msg.get(k) for k in ("command_id", "phase", "result", "reason")})
        with self._lock:
            self._inbox.setdefault(robot_id, deque()).append(msg)

    # -- lifecycle -------------------------------------------------------

    def start_job(self, request: GuideRequest) -> GuideJob:
        """Allocate and dispatch, or queue; raises QueueFull (job failed) when saturated."""
        if request.destination_id not in self.destinations:
            raise UnknownDestination(f"unknown destination {request.destination_id!r}")
        with self._lock:
            self._job_seq += 1
            job_id = f"job-{self._job_seq:04d}"
            job = new_job(
                job_id,
                request,
                self.clock.wall(),
                self.clock.now(),
                poll_interval_s=self.poll_interval_s,
                timeouts=self.timeouts,
            )
            self.jobs[job_id] = job
            self._record_transition(job, job.transitions[-1])
            if not self._try_allocate_locked(job_id):
                if len(self._queue) >= self.queue_cap:
                    self._apply_locked(job_id, JobEvent(EventKind.TASK_FAILED, reason="queue-full"))
                    raise QueueFull(job_id)
                self._queue.append(job_id)
            self._schedule_poll(job_id)
            return self.jobs[job_id]

    def cancel(self, job_id: str) -> GuideJob:
        with self._lock:
            job = self._require(job_id)
            if job.terminal:
                raise IllegalTransition(f"job {job_id} already terminal")
            self._apply_locked(job_id, JobEvent(EventKind.CANCEL))
            return self.jobs[job_id]

    def abort_robot(self, robot_id: str) -> GuideJob:
        """Operator abort: cancel the active job bound to this robot."""
        with self._lock:
            for job in self.jobs.values():
                if job.assigned_robot == robot_id and not job.terminal:
                    return self.cancel(job.job_id)
        raise NoActiveJob(f"robot {robot_id!r} has no active job")

    def shutdown(self) -> int:
        """Cancel every in-flight job; returns how many were canceled."""
        with self._lock:
            open_ids = [j.job_id for j in self.jobs.values() if not j.terminal]
            for job_id in open_ids:
                self._apply_locked(job_id, JobEvent(EventKind.CANCEL))
            return len(open_ids)

    def get(self, job_id: str) -> GuideJob:
        with self._lock:
            return self._require(job_id)

    def list_jobs(self, state: JobState | None = None) -> list[GuideJob]:
        with self._lock:
            jobs = sorted(self.jobs.values(), key=lambda j: j.job_id)
        if state is not None:
            jobs = [j for j in jobs if j.state is state]
        return jobs

    def all_terminal(self) -> bool:
        with self._lock:
            return all(j.terminal for j in self.jobs.values())

    # -- polling ---------------------------------------------------------

    def poll_job(self, job_id: str) -> None:
        """One monitoring tick: drain task messages, check staleness, check timers."""
        with self._lock:
            job = self.jobs.get(job_id)
            if job is None or job.terminal:
                return
            for event in self._derive_events_locked(job):
                job = self.jobs[job_id]
                if job.terminal:
                    break
                try:
                    self._apply_locked(job_id, event)
                except IllegalTransition:
                    self._ignored_events += 1
            if not self.jobs[job_id].terminal:
                self._schedule_poll(job_id)

    def _derive_events_locked(self, job: GuideJob) -> list[JobEvent]:
        events: list[JobEvent] = []
        robot = job.assigned_robot
        if robot:
            pending = self._inbox.get(robot)
            while pending:
                msg = pending.popleft()
                if msg.get("command_id") != job.current_command_id:
                    continue  # stale message for a superseded command
                result = msg.get("result")
                if result == "accepted":
                    events.append(JobEvent(EventKind.COMMAND_ACKED, command_id=job.current_command_id))
                elif result == "refused":
                    events.append(JobEvent(EventKind.COMMAND_REFUSED, command_id=job.current_command_id))
                elif result == "completed":
                    events.append(JobEvent(EventKind.TASK_COMPLETED, phase=job.phase))
                elif result == "failed":
                    events.append(
                        JobEvent(EventKind.TASK_FAILED, phase=job.phase, reason=msg.get("reason"))
                    )
        if robot and job.state in _STATES_WITH_ROBOT:
            view = self.shadows.get_shadow(robot)
            if view.effective_status is OperationalStatus.OFFLINE:
                events.append(JobEvent(EventKind.ROBOT_OFFLINE, robot_id=robot))
        phase = job.phase
        if phase is not None and job.phase_started_ns is not None:
            budget_ns = int(job.timeouts.for_phase(phase) * 1e9)
            if self.clock.now() - job.phase_started_ns > budget_ns:
                events.append(JobEvent(EventKind.TIMEOUT, phase=phase))
        return events

    def _schedule_poll(self, job_id: str) -> None:
        delay_ns = int(self.poll_interval_s * 1e9)
        self.scheduler.schedule_after(delay_ns, lambda: self.poll_job(job_id))

    # -- allocation ------------------------------------------------------

    def _try_allocate_locked(self, job_id: str) -> bool:
        for attempt in (0, 1):
            views = self.shadows.list_shadows(kind=RobotKind.GUIDE)
            try:
                result = select_robot(views, self.policy, self.clock)
            except NoRobotAvailable as exc:
                if attempt == 0:
                    self.audit.record(
                        "allocation",
                        job_id=job_id,
                        outcome="no-robot-available",
                        snapshot=[c.to_dict() for c in exc.snapshot],
                    )
                return False
            try:
                self.reservations.reserve(result.robot_id, job_id)
            except AlreadyReserved:
                continue  # lost the race; retry once with a fresh snapshot
            self.audit.record(
                "allocation",
                job_id=job_id,
                outcome="selected",
                robot_id=result.robot_id,
                decided_at_ms=result.decided_at_ms,
                snapshot=[c.to_dict() for c in result.snapshot],
            )
            self.shadows.force_status(result.robot_id, OperationalStatus.ASSIGNED)
            self.shadows.set_current_job(result.robot_id, job_id)
            self._apply_locked(job_id, JobEvent(EventKind.ROBOT_ALLOCATED, robot_id=result.robot_id))
            return True
        return False

    def _pump_queue_locked(self) -> None:
        while self._queue:
            job_id = self._queue[0]
            job = self.jobs.get(job_id)
            if job is None or job.state is not JobState.ALLOCATING:
                self._queue.popleft()
                continue
            if not self._try_allocate_locked(job_id):
                return
            self._queue.popleft()

    # -- applying events -------------------------------------------------

    def _apply_locked(self, job_id: str, event: JobEvent) -> None:
        job = self.jobs[job_id]
        nxt, actions = advance(job, event, self.clock.wall(), self.clock.now())
        self.jobs[job_id] = nxt
        self._record_transition(nxt, nxt.transitions[-1])
        for action in actions:
            self._execute_locked(job_id, action)

    def _record_transition(self, job: GuideJob, record) -> None:
        entry = {"job_id": job.job_id, "robot_id": job.assigned_robot, **record.to_dict()}
        self.audit.record("job_transition", **entry)
        self.hub.emit("job_transition", entry)

    def _execute_locked(self, job_id: str, action: Action) -> None:
        job = self.jobs[job_id]
        if isinstance(action, PublishCommand):
            self._publish_command_locked(job_id, action.kind)
        elif isinstance(action, ReleaseRobot):
            robot = job.assigned_robot
            if robot is None:
                return
            try:
                self.reservations.release(robot, job_id)
            except UnknownReservation:
                return
            self._outstanding.pop(robot, None)
            self.shadows.set_current_job(robot, None)
            self.shadows.force_status(robot, OperationalStatus.IDLE)
            self._pump_queue_locked()
        elif isinstance(action, Notify):
            self.hub.notify(action.severity, action.message, job_id=job_id)
            self.audit.record("notification", job_id=job_id, severity=action.severity, message=action.message)

    def _publish_command_locked(self, job_id: str, kind: CommandKind) -> None:
        job = self.jobs[job_id]
        robot = job.assigned_robot
        if robot is None:
            return
        self._command_seq += 1
        command = Command(
            command_id=f"{job_id}-c{self._command_seq}",
            robot_id=robot,
            kind=kind,
            destination=self._destination_for(job, kind),
            blob_url=self._blob_url_for(job, kind),
            issued_at_ms=self.clock.wall(),
        )
        if kind is not CommandKind.ABORT:
            self._outstanding[robot] = command.command_id
            self.jobs[job_id] = replace(job, current_command_id=command.command_id)
        self.broker.publish(
            f"robots/{robot}/cmd",
            json.dumps(command.to_payload(), sort_keys=True).encode("utf-8"),
            publisher_id="app",
            link=self.app_link,
            send_stamp="app_send",
        )
        self.audit.record(
            "command_published",
            job_id=job_id,
            robot_id=robot,
            command_id=command.command_id,
            command_kind=kind.value,
        )

    def _destination_for(self, job: GuideJob, kind: CommandKind) -> Position | None:
        if kind is CommandKind.GUIDE:
            return self.destinations[job.request.destination_id]
        if kind is CommandKind.PICKUP:
            # guest waits where the reception robot stands
            try:
                view = self.shadows.get_shadow(job.request.reception_robot)
                if view.position is not None:
                    return view.position
            except FleetError:
                pass
            return Position(0.0, 0.0, 0)
        return None  # return/abort: the robot heads for its own dock

    def _blob_url_for(self, job: GuideJob, kind: CommandKind) -> str | None:
        if kind in (CommandKind.PICKUP, CommandKind.GUIDE):
            return self.vault.sign_url(job.request.facial_blob, self.blob_url_ttl_s).to_url()
        return None

    def _require(self, job_id: str) -> GuideJob:
        job = self.jobs.get(job_id)
        if job is None:
            raise UnknownJob(f"unknown job {job_id!r}")
        return job
