"""Wire envelope: topic, payload, per-publisher sequence, relay-point timestamps.

Binary wire form (big-endian), in field order:

    u32  payload length
    u16  topic length, then UTF-8 topic bytes
    u64  seq
    u8   stamp count, then per stamp: u8 relay name-id, u64 monotonic ns
    payload bytes

Relay name-id registry (fixed): 0=robot_send, 1=broker_recv, 2=stream_out,
3=app_recv, 4=app_send, 5=robot_recv.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Final

from guidefleet.core.clock import Clock
from guidefleet.core.errors import FleetError
from guidefleet.core.topics import validate_topic

MAX_PAYLOAD_BYTES: Final[int] = 64 * 1024

RELAY_IDS: Final[dict[str, int]] = {
    "robot_send": 0,
    "broker_recv": 1,
    "stream_out": 2,
    "app_recv": 3,
    "app_send": 4,
    "robot_recv": 5,
}
RELAY_NAMES: Final[dict[int, str]] = {v: k for k, v in RELAY_IDS.items()}


class DuplicateRelay(FleetError):
    """The same relay point may stamp an envelope at most once."""


class PayloadTooLarge(FleetError):
    pass


class MalformedEnvelope(FleetError):
    """Raised when wire bytes cannot be decoded into a valid envelope."""


@dataclass(frozen=True)
class Envelope:
    """Immutable message unit carried by the broker.

    stamps is append-only: stamp() returns a new envelope sharing the prefix.
    """

    topic: str
    payload: bytes
    seq: int
    stamps: tuple[tuple[str, int], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if len(self.payload) > MAX_PAYLOAD_BYTES:
            raise PayloadTooLarge(f"payload of {len(self.payload)} bytes exceeds {MAX_PAYLOAD_BYTES}")
        if self.seq < 0:
            raise ValueError("seq must be non-negative")

    def stamp_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.stamps)

    def stamp_at(self, relay: str) -> int:
        for name, t_ns in self.stamps:
            if name == relay:
                return t_ns
        raise KeyError(relay)


def stamp(envelope: Envelope, relay: str, clock: Clock) -> Envelope:
    """Append one relay-point timestamp; prior stamps are untouched."""
    return stamp_with_time(envelope, relay, clock.now())


def stamp_with_time(envelope: Envelope, relay: str, t_ns: int) -> Envelope:
    if relay not in RELAY_IDS:
        raise ValueError(f"unknown relay point {relay!r}")
    if relay in envelope.stamp_names():
        raise DuplicateRelay(f"relay {relay!r} already stamped")
    return Envelope(
        topic=envelope.topic,
        payload=envelope.payload,
        seq=envelope.seq,
        stamps=envelope.stamps + ((relay, t_ns),),
    )


def encode_envelope(envelope: Envelope) -> bytes:
    topic_bytes = envelope.topic.encode("utf-8")
    if len(topic_bytes) > 0xFFFF:
        raise MalformedEnvelope("topic too long for wire form")
    if len(envelope.stamps) > 0xFF:
        raise MalformedEnvelope("too many stamps for wire form")
    parts = [
        struct.pack(">I", len(envelope.payload)),
        struct.pack(">H", len(topic_bytes)),
        topic_bytes,
        struct.pack(">Q", envelope.seq),
        struct.pack(">B", len(envelope.stamps)),
    ]
    for name, t_ns in envelope.stamps:
        if name not in RELAY_IDS:
            raise MalformedEnvelope(f"relay {name!r} has no wire id")
        parts.append(struct.pack(">BQ", RELAY_IDS[name], t_ns))
    parts.append(envelope.payload)
    return b"".join(parts)


def decode_envelope(data: bytes) -> Envelope:
    try:
        offset = 0
        (payload_len,) = struct.unpack_from(">I", data, offset)
        offset += 4
        (topic_len,) = struct.unpack_from(">H", data, offset)
        offset += 2
        topic = data[offset : offset + topic_len].decode("utf-8")
        if len(data[offset : offset + topic_len]) != topic_len:
            raise MalformedEnvelope("truncated topic")
        offset += topic_len
        (seq,) = struct.unpack_from(">Q", data, offset)
        offset += 8
        (stamp_count,) = struct.unpack_from(">B", data, offset)
        offset += 1
        stamps: list[tuple[str, int]] = []
        for _ in range(stamp_count):
            relay_id, t_ns = struct.unpack_from(">BQ", data, offset)
            offset += 9
            if relay_id not in RELAY_NAMES:
                raise MalformedEnvelope(f"unknown relay id {relay_id}")
            stamps.append((RELAY_NAMES[relay_id], t_ns))
        payload = data[offset : offset + payload_len]
        if len(payload) != payload_len:
            raise MalformedEnvelope("truncated payload")
        if offset + payload_len != len(data):
            raise MalformedEnvelope("trailing bytes after payload")
    except struct.error as exc:
        raise MalformedEnvelope(f"truncated envelope: {exc}") from exc
    validate_topic(topic)
    return Envelope(topic=topic, payload=payload, seq=seq, stamps=tuple(stamps))
