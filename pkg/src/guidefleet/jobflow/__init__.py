"""Per-job monitoring: state machine model and the engine that runs it."""

from guidefleet.jobflow.model import (
    Command,
    CommandKind,
    EventKind,
    GuideJob,
    GuideRequest,
    IllegalTransition,
    JobEvent,
    JobState,
    TaskTimeouts,
    TransitionRecord,
    advance,
    job_log,
    new_job,
    replay_job,
)
from guidefleet.jobflow.engine import JobEngine, NoActiveJob, QueueFull, UnknownDestination, UnknownJob

__all__ = [
    "Command",
    "CommandKind",
    "EventKind",
    "GuideJob",
    "GuideRequest",
    "IllegalTransition",
    "JobEvent",
    "JobState",
    "TaskTimeouts",
    "TransitionRecord",
    "advance",
    "job_log",
    "new_job",
    "replay_job",
    "JobEngine",
    "NoActiveJob",
    "QueueFull",
    "UnknownDestination",
    "UnknownJob",
]
