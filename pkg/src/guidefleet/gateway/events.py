"""Monitor event hub: bounded ring buffer plus per-client queues.

The ring buffer serves last-event-id replay for reconnecting stream clients;
per-client queues are bounded so one slow consumer can never stall the rest
(drop-and-flag policy: the client sees a gap marker instead of the backlog).
"""

from __future__ import annotations

import itertools
import queue
import threading
from collections import deque
from dataclasses import dataclass

from guidefleet.core.clock import Clock


@dataclass(frozen=True)
class MonitorEvent:
    event_id: int
    kind: str  # shadow_update | job_transition | notification
    payload: dict
    at_ms: int

    def to_dict(self) -> dict:
        return {"event_id": self.event_id, "kind": self.kind, "payload": self.payload, "at_ms": self.at_ms}


class _Client:
    def __init__(self, client_id: int, bound: int):
        self.id = client_id
        self.queue: queue.Queue[MonitorEvent] = queue.Queue(maxsize=bound)
        self.lagged = False


class EventHub:
    def __init__(self, clock: Clock, buffer_size: int = 10_000, client_bound: int = 1_000):
        self.clock = clock
        self._ring: deque[MonitorEvent] = deque(maxlen=buffer_size)
        self._clients: dict[int, _Client] = {}
        self._ids = itertools.count(1)
        self._client_ids = itertools.count(1)
        self._client_bound = client_bound
        self._lock = threading.Lock()
        self._closed = False
        self._emitted = 0

    @property
    def emitted(self) -> int:
        return self._emitted

    @property
    def closed(self) -> bool:
        return self._closed

    def emit(self, kind: str, payload: dict) -> MonitorEvent:
        with self._lock:
            event = MonitorEvent(next(self._ids), kind, payload, self.clock.wall())
            self._ring.append(event)
            self._emitted += 1
            clients = list(self._clients.values())
        for client in clients:
            try:
                client.queue.put_nowait(event)
            except queue.Full:
                client.lagged = True
        return event

    def notify(self, severity: str, message: str, **context: object) -> MonitorEvent:
        return self.emit("notification", {"severity": severity, "message": message, **context})

    def subscribe(self, last_event_id: int | None = None) -> tuple[_Client, list[MonitorEvent]]:
        """Register a client; returns missed events when last_event_id is in the ring."""
        with self._lock:
            client = _Client(next(self._client_ids), self._client_bound)
            self._clients[client.id] = client
            replay: list[MonitorEvent] = []
            if last_event_id is not None:
                replay = [e for e in self._ring if e.event_id > last_event_id]
            return client, replay

    def unsubscribe(self, client: _Client) -> None:
        with self._lock:
            self._clients.pop(client.id, None)

    def buffered(self) -> list[MonitorEvent]:
        with self._lock:
            return list(self._ring)

    def close(self) -> None:
        with self._lock:
            self._closed = True
