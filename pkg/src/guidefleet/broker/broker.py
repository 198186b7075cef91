"""Topic broker standing in for the cellular IoT link plus the cloud hops.

Delivery model: matching subscriptions are snapshotted at publish time (no
replay of past messages), then each copy travels the subscription's hop
pipeline, collecting relay stamps along the way. Publishing never blocks on
slow consumers; bounded queues absorb or drop-oldest.
"""

from __future__ import annotations

import itertools
import threading
from collections import deque
from dataclasses import dataclass
from typing import Callable

from guidefleet.broker.links import Link
from guidefleet.broker.matching import match_topic, validate_pattern
from guidefleet.core.clock import Clock
from guidefleet.core.envelope import Envelope, stamp_with_time
from guidefleet.core.errors import FleetError
from guidefleet.core.scheduling import Scheduler
from guidefleet.core.topics import validate_topic


class BrokerClosed(FleetError):
    pass


@dataclass(frozen=True)
class Receipt:
    seq: int
    enqueued_at_ns: int


class Subscription:
    """One subscriber: pattern, optional hop pipeline, bounded pending queue.

    Counters satisfy delivered + dropped + lost == matched at any instant;
    messages still sitting in the queue count as delivered.
    """

    def __init__(
        self,
        sub_id: int,
        pattern: str,
        queue_bound: int,
        hops: tuple[tuple[Link, str | None], ...],
        on_deliver: Callable[[Envelope], None] | None,
    ):
        if queue_bound < 1:
            raise ValueError("queue_bound must be >= 1")
        self.id = sub_id
        self.pattern = pattern
        self.queue_bound = queue_bound
        self.hops = hops
        self.on_deliver = on_deliver
        self.queue: deque[Envelope] = deque()
        self.matched = 0
        self.delivered = 0
        self.dropped = 0
        self.lost = 0
        self._lock = threading.Lock()

    def poll(self) -> Envelope | None:
        with self._lock:
            return self.queue.popleft() if self.queue else None

    def drain(self) -> list[Envelope]:
        with self._lock:
            items = list(self.queue)
            self.queue.clear()
            return items

    def pending(self) -> int:
        return len(self.queue)

    def _finalize(self, envelope: Envelope) -> None:
        if self.on_deliver is not None:
            self.delivered += 1
            self.on_deliver(envelope)
            return
        with self._lock:
            if len(self.queue) >= self.queue_bound:
                self.queue.popleft()
                self.delivered -= 1
                self.dropped += 1
            self.queue.append(envelope)
            self.delivered += 1


class Broker:
    def __init__(self, clock: Clock, scheduler: Scheduler):
        self.clock = clock
        self.scheduler = scheduler
        self._subs: list[Subscription] = []
        self._seq: dict[tuple[str, str], int] = {}
        self._closed = False
        self._lock = threading.RLock()
        self._ids = itertools.count(1)

    def subscribe(
        self,
        pattern: str,
        queue_bound: int = 1024,
        hops: tuple[tuple[Link, str | None], ...] = (),
        on_deliver: Callable[[Envelope], None] | None = None,
    ) -> Subscription:
        validate_pattern(pattern)
        with self._lock:
            if self._closed:
                raise BrokerClosed("broker is closed")
            sub = Subscription(next(self._ids), pattern, queue_bound, tuple(hops), on_deliver)
            self._subs.append(sub)
            return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def close(self) -> None:
        with self._lock:
            self._closed = True

    def publish(
        self,
        topic: str,
        payload: bytes,
        publisher_id: str,
        link: Link | None = None,
        send_stamp: str | None = None,
    ) -> Receipt:
        validate_topic(topic)
        now = self.clock.now()
        with self._lock:
            if self._closed:
                raise BrokerClosed("broker is closed")
            key = (publisher_id, topic)
            seq = self._seq.get(key, 0) + 1
            self._seq[key] = seq
            matching = [s for s in self._subs if match_topic(s.pattern, topic)]

        envelope = Envelope(topic=topic, payload=payload, seq=seq)
        if send_stamp is not None:
            envelope = stamp_with_time(envelope, send_stamp, now)
        for sub in matching:
            sub.matched += 1

        if link is not None:
            arrival, _ = link.next_arrival(now, publisher_id)
            if arrival is None:
                for sub in matching:
                    sub.lost += 1
                return Receipt(seq=seq, enqueued_at_ns=now)
        else:
            arrival = now + 1  # keep broker receipt strictly after the send stamp

        def _arrive() -> None:
            stamped = stamp_with_time(envelope, "broker_recv", arrival)
            for sub in matching:
                self._deliver(sub, stamped, publisher_id, arrival, 0)

        self.scheduler.schedule_at(arrival, _arrive)
        return Receipt(seq=seq, enqueued_at_ns=now)

    def _deliver(
        self,
        sub: Subscription,
        envelope: Envelope,
        publisher_id: str,
        t_ns: int,
        hop_idx: int,
    ) -> None:
        if hop_idx == len(sub.hops):
            sub._finalize(envelope)
            return
        hop_link, stamp_name = sub.hops[hop_idx]
        arrival, _ = hop_link.next_arrival(t_ns, publisher_id)
        if arrival is None:
            sub.lost += 1
            return

        def _hop_arrive() -> None:
            env = stamp_with_time(envelope, stamp_name, arrival) if stamp_name else envelope
            self._deliver(sub, env, publisher_id, arrival, hop_idx + 1)

        self.scheduler.schedule_at(arrival, _hop_arrive)
