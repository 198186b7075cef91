"""Shared domain vocabulary: identifiers, statuses, time, topics, wire envelope."""

from guidefleet.core.clock import Clock, SystemClock, VirtualClock
from guidefleet.core.envelope import (
    MAX_PAYLOAD_BYTES,
    RELAY_IDS,
    RELAY_NAMES,
    DuplicateRelay,
    Envelope,
    MalformedEnvelope,
    decode_envelope,
    encode_envelope,
)
from guidefleet.core.errors import FleetError
from guidefleet.core.scheduling import RealTimeScheduler, Scheduler, VirtualScheduler
from guidefleet.core.topics import MalformedTopic, validate_topic
from guidefleet.core.types import (
    OperationalStatus,
    Position,
    RobotKind,
    validate_robot_id,
)

__all__ = [
    "Clock",
    "SystemClock",
    "VirtualClock",
    "Scheduler",
    "VirtualScheduler",
    "RealTimeScheduler",
    "Envelope",
    "DuplicateRelay",
    "MalformedEnvelope",
    "MalformedTopic",
    "FleetError",
    "MAX_PAYLOAD_BYTES",
    "RELAY_IDS",
    "RELAY_NAMES",
    "encode_envelope",
    "decode_envelope",
    "validate_topic",
    "OperationalStatus",
    "Position",
    "RobotKind",
    "validate_robot_id",
]
