"""Composition root binding broker, shadows, allocator, jobflow and vault.

One FleetService instance backs both the live server and the virtual-clock
harnesses; only the clock/scheduler pair and the link profiles differ. The
telemetry wiring mirrors the transport split: the position acquisition
stream rides the two-hop streaming path (where tail spikes live), while
battery/mileage/status take the device-management path.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from guidefleet.allocator import AllocationPolicy, ReservationTable
from guidefleet.audit import AuditLog
from guidefleet.blobvault import BlobVault, SignedBlobUrl
from guidefleet.broker.broker import Broker
from guidefleet.broker.links import Link, LinkProfile
from guidefleet.core.clock import Clock
from guidefleet.core.envelope import Envelope
from guidefleet.core.errors import FleetError
from guidefleet.core.scheduling import Scheduler
from guidefleet.core.types import OperationalStatus, Position, RobotKind
from guidefleet.gateway.events import EventHub
from guidefleet.jobflow.engine import JobEngine
from guidefleet.jobflow.model import GuideJob, GuideRequest, TaskTimeouts
from guidefleet.shadow import FieldReport, ReportingPolicy, ShadowStore, ShadowView


class UnknownReceptionRobot(FleetError):
    pass


DEFAULT_DESTINATIONS: dict[str, Position] = {
    "atrium": Position(50.0, 80.0, 0),
    "north-gate": Position(200.0, 10.0, 0),
    "food-court": Position(120.0, 160.0, 1),
    "info-desk": Position(10.0, 5.0, 0),
    "east-wing": Position(420.0, 60.0, 0),
}

# Internal cloud hops: small constant serialization cost, never zero so relay
# stamps stay strictly ordered.
INTERNAL_HOP = LinkProfile(base_delay_ms=(1.5, 1.5))


@dataclass(frozen=True)
class ServiceSettings:
    destinations: dict[str, Position] = field(default_factory=lambda: dict(DEFAULT_DESTINATIONS))
    reporting: ReportingPolicy = field(default_factory=ReportingPolicy)
    allocation: AllocationPolicy = field(default_factory=AllocationPolicy)
    timeouts: TaskTimeouts = field(default_factory=TaskTimeouts)
    poll_interval_s: float = 2.0
    queue_cap: int = 16
    vault_root: str = "./vault"
    vault_key: bytes = b"\x00" * 32
    broker_hop: LinkProfile = INTERNAL_HOP
    stream_hop: LinkProfile = INTERNAL_HOP
    app_hop: LinkProfile = INTERNAL_HOP
    blob_url_ttl_s: int = 600
    hub_buffer: int = 10_000
    rng_seed: int = 0


class FleetService:
    def __init__(self, clock: Clock, scheduler: Scheduler, settings: ServiceSettings | None = None):
        self.clock = clock
        self.scheduler = scheduler
        self.settings = settings or ServiceSettings()
        s = self.settings

        self.audit = AuditLog(clock)
        self.hub = EventHub(clock, buffer_size=s.hub_buffer)
        self.broker = Broker(clock, scheduler)
        self.shadows = ShadowStore(clock, s.reporting, on_change=self._on_shadow_change)
        self.reservations = ReservationTable(clock)
        Path(s.vault_root).mkdir(parents=True, exist_ok=True)
        self.vault = BlobVault(s.vault_root, s.vault_key, clock)

        rng = random.Random(s.rng_seed)
        self._stream_hops = (
            (Link(s.broker_hop, random.Random(rng.getrandbits(64))), "stream_out"),
            (Link(s.stream_hop, random.Random(rng.getrandbits(64))), "app_recv"),
        )
        self._task_hops = (
            (Link(s.broker_hop, random.Random(rng.getrandbits(64))), "stream_out"),
            (Link(LinkProfile(base_delay_ms=s.stream_hop.base_delay_ms), random.Random(rng.getrandbits(64))), "app_recv"),
        )
        self.app_link = Link(s.app_hop, random.Random(rng.getrandbits(64)))

        self.engine = JobEngine(
            clock=clock,
            scheduler=scheduler,
            broker=self.broker,
            shadows=self.shadows,
            reservations=self.reservations,
            vault=self.vault,
            destinations=s.destinations,
            hub=self.hub,
            audit=self.audit,
            policy=s.allocation,
            timeouts=s.timeouts,
            poll_interval_s=s.poll_interval_s,
            queue_cap=s.queue_cap,
            app_link=self.app_link,
            blob_url_ttl_s=s.blob_url_ttl_s,
        )

        self.stats_sink: Callable[[Envelope], None] | None = None
        self._request_seq = 0
        self._idempotency: dict[str, str] = {}
        self._lock = threading.Lock()

        self.broker.subscribe(
            "robots/+/telemetry/position",
            queue_bound=100_000,
            hops=self._stream_hops,
            on_deliver=self._on_position_envelope,
        )
        for fld in ("battery", "mileage", "status"):
            self.broker.subscribe(
                f"robots/+/telemetry/{fld}",
                queue_bound=100_000,
                on_deliver=self._on_plain_telemetry,
            )
        self.broker.subscribe(
            "robots/+/task",
            queue_bound=100_000,
            hops=self._task_hops,
            on_deliver=self.engine.on_task_envelope,
        )

    # -- robot registry ----------------------------------------------------

    def register_robot(self, robot_id: str, kind: RobotKind) -> ShadowView:
        return self.shadows.register(robot_id, kind)

    # -- telemetry intake ---------------------------------------------------

    def _on_position_envelope(self, envelope: Envelope) -> None:
        self._apply_telemetry(envelope)
        if self.stats_sink is not None:
            self.stats_sink(envelope)

    def _on_plain_telemetry(self, envelope: Envelope) -> None:
        self._apply_telemetry(envelope)

    def _apply_telemetry(self, envelope: Envelope) -> None:
        try:
            msg = json.loads(envelope.payload.decode("utf-8"))
            robot_id = envelope.topic.split("/")[1]
            value = msg["value"]
            if msg["field"] == "position":
                value = Position.from_dict(value)
            report = FieldReport(
                field=msg["field"], value=value, seq=int(msg["seq"]), reported_at=int(msg["reported_at"])
            )
            self.shadows.apply_report(robot_id, report)
        except FleetError:
            pass  # unknown robot or inconsistent report: counted/raised at source
        except (KeyError, ValueError, UnicodeDecodeError, json.JSONDecodeError):
            pass

    def _on_shadow_change(self, view: ShadowView) -> None:
        self.hub.emit("shadow_update", view.to_dict())

    # -- guide requests -----------------------------------------------------

    def create_guide_request(
        self,
        destination_id: str,
        reception_robot: str,
        facial_blob: bytes,
        idempotency_key: str | None = None,
    ) -> tuple[GuideJob, bool]:
        """Store the blob and start a job; returns (job, already_existed)."""
        with self._lock:
            if idempotency_key is not None and idempotency_key in self._idempotency:
                return self.engine.get(self._idempotency[idempotency_key]), True
        if not self.shadows.registered(reception_robot):
            raise UnknownReceptionRobot(f"unknown reception robot {reception_robot!r}")
        if self.shadows.get_shadow(reception_robot).kind is not RobotKind.RECEPTION:
            raise UnknownReceptionRobot(f"robot {reception_robot!r} is not a reception robot")
        blob_id = self.vault.put_blob(facial_blob)
        with self._lock:
            self._request_seq += 1
            request_id = f"req-{self._request_seq:04d}"
        request = GuideRequest(
            request_id=request_id,
            reception_robot=reception_robot,
            destination_id=destination_id,
            facial_blob=blob_id,
            created_at_ms=self.clock.wall(),
        )
        job = self.engine.start_job(request)
        if idempotency_key is not None:
            with self._lock:
                self._idempotency[idempotency_key] = job.job_id
        return job, False

    # -- blob download ------------------------------------------------------

    def fetch_blob(self, blob_id: str, exp: int, sig: str) -> bytes:
        url = SignedBlobUrl(path=f"/v1/blobs/{blob_id}", expires_at=exp, signature=sig)
        return self.vault.fetch(url)

    # -- lifecycle ----------------------------------------------------------

    def shutdown(self) -> None:
        self.engine.shutdown()
        self.hub.close()
        self.broker.close()
