"""Virtual robots: scripted telemetry cadences, motion, and task execution.

A robot is a bundle of scheduler callbacks over the broker, so the same code
runs under the virtual clock (benchmarks, scenarios) and in real time
(demo fleets attached to a live server).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from guidefleet.broker.links import Link, LinkProfile
from guidefleet.core.envelope import Envelope
from guidefleet.core.types import OperationalStatus, Position, RobotKind
from guidefleet.gateway.service import FleetService

_NS = 1_000_000_000

DEFAULT_TASK_DURATIONS: dict[str, tuple[float, float]] = {
    "pickup": (4.0, 8.0),
    "guide": (15.0, 40.0),
    "return": (10.0, 30.0),
}


class VirtualRobot:
    def __init__(
        self,
        robot_id: str,
        kind: RobotKind,
        *,
        service: FleetService,
        rng: random.Random,
        uplink: Link,
        downlink_hops: tuple[tuple[Link, str | None], ...] = (),
        home: Position | None = None,
        speed_mps: float = 1.2,
        battery_drain_pct_per_min: float = 0.2,
        initial_battery_pct: float = 100.0,
        initial_mileage_m: float = 0.0,
        task_durations: dict[str, tuple[float, float]] | None = None,
        end_ns: int | None = None,
    ):
        self.robot_id = robot_id
        self.kind = kind
        self.service = service
        self.broker = service.broker
        self.clock = service.clock
        self.scheduler = service.scheduler
        self.rng = rng
        self.uplink = uplink
        self.home = home or Position(0.0, 0.0, 0)
        self.speed_mps = speed_mps
        self.battery_drain = battery_drain_pct_per_min
        self.initial_battery = initial_battery_pct
        self.task_durations = task_durations or DEFAULT_TASK_DURATIONS
        self.end_ns = end_ns

        self.alive = True
        self.position = self.home
        self.target: Position | None = None
        self.mileage_m = float(initial_mileage_m)
        self.status = OperationalStatus.IDLE
        self.fail_phases: set[str] = set()
        self.position_reports_sent = 0
        self.on_command_stamped = None  # hook(robot_id, envelope), set by harnesses

        self._seqs = {"position": 0, "battery": 0, "status": 0, "mileage": 0}
        self._start_ns = self.clock.now()
        self._last_motion_ns = self._start_ns
        self._task_token = 0

        self._cmd_sub = self.broker.subscribe(
            f"robots/{robot_id}/cmd",
            hops=downlink_hops,
            on_deliver=self._on_command,
        )

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        """Report initial status, then begin the periodic telemetry cadences."""
        policy = self.service.settings.reporting
        self._report("status", self.status.value)
        offsets = {
            "position": self.rng.uniform(0.0, policy.position_interval_s),
            "battery": self.rng.uniform(0.0, policy.battery_interval_s),
            "mileage": self.rng.uniform(0.0, policy.mileage_interval_s),
        }
        self._schedule(offsets["position"], lambda: self._tick("position", policy.position_interval_s))
        self._schedule(offsets["battery"], lambda: self._tick("battery", policy.battery_interval_s))
        self._schedule(offsets["mileage"], lambda: self._tick("mileage", policy.mileage_interval_s))

    def kill(self) -> None:
        """Stop reporting and responding; the shadow goes stale on its own."""
        self.alive = False

    def fail_phase(self, phase: str) -> None:
        self.fail_phases.add(phase)

    # -- telemetry ----------------------------------------------------------

    def _schedule(self, delay_s: float, fn) -> None:
        due = self.clock.now() + int(delay_s * _NS)
        if self.end_ns is not None and due > self.end_ns:
            return
        self.scheduler.schedule_at(due, fn)

    def _tick(self, field: str, interval_s: float) -> None:
        if not self.alive:
            return
        if field == "position":
            self._advance_motion()
            self._report("position", self.position.to_dict())
            self.position_reports_sent += 1
        elif field == "battery":
            self._report("battery", self.battery_pct())
        else:
            self._report("mileage", round(self.mileage_m, 3))
        self._schedule(interval_s, lambda: self._tick(field, interval_s))

    def _report(self, field: str, value: object) -> None:
        self._seqs[field] += 1
        payload = json.dumps(
            {"field": field, "value": value, "seq": self._seqs[field], "reported_at": self.clock.now()},
            sort_keys=True,
        ).encode("utf-8")
        self.broker.publish(
            f"robots/{self.robot_id}/telemetry/{field}",
            payload,
            publisher_id=self.robot_id,
            link=self.uplink,
            send_stamp="robot_send",
        )

    def battery_pct(self) -> float:
        elapsed_min = (self.clock.now() - self._start_ns) / _NS / 60.0
        return round(max(0.0, self.initial_battery - self.battery_drain * elapsed_min), 3)

    def _advance_motion(self) -> None:
        now = self.clock.now()
        dt_s = (now - self._last_motion_ns) / _NS
        self._last_motion_ns = now
        if self.target is None or dt_s <= 0:
            return
        dist = self.position.distance_to(self.target)
        step = self.speed_mps * dt_s
        if step >= dist:
            self.mileage_m += dist
            self.position = self.target
            self.target = None
            return
        frac = step / dist
        self.mileage_m += step
        self.position = Position(
            x=self.position.x + (self.target.x - self.position.x) * frac,
            y=self.position.y + (self.target.y - self.position.y) * frac,
            floor=self.target.floor,
        )

    # -- command handling ----------------------------------------------------

    def _on_command(self, envelope: Envelope) -> None:
        if self.on_command_stamped is not None:
            self.on_command_stamped(self.robot_id, envelope)
        if not self.alive:
            return
        try:
            cmd = json.loads(envelope.payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return
        kind = cmd.get("kind")
        command_id = cmd.get("command_id", "")
        if kind == "ping":
            return
        if kind == "abort":
            self._task_token += 1
            self.target = None
            self._set_status(OperationalStatus.IDLE)
            return
        if kind not in ("pickup", "guide", "return"):
            return

        self._send_task(command_id, kind, "accepted")
        dest = cmd.get("destination")
        if kind == "return" or dest is None:
            self.target = self.home
        else:
            self.target = Position.from_dict(dest)
        self._set_status(
            {
                "pickup": OperationalStatus.PICKUP,
                "guide": OperationalStatus.GUIDING,
                "return": OperationalStatus.RETURNING,
            }[kind]
        )
        self._task_token += 1
        token = self._task_token
        duration = self._sample_duration(kind)
        self._schedule(duration, lambda: self._finish_task(token, command_id, kind))

    def _finish_task(self, token: int, command_id: str, kind: str) -> None:
        if not self.alive or token != self._task_token:
            return  # aborted or superseded
        self._advance_motion()
        if kind in self.fail_phases:
            self.fail_phases.discard(kind)  # one-shot injection
            self._send_task(command_id, kind, "failed", reason="simulated-fault")
            self._set_status(OperationalStatus.ERROR)
            self.target = None
            return
        self._send_task(command_id, kind, "completed")
        if kind == "return":
            self._set_status(OperationalStatus.IDLE)
            self.target = None

    def _sample_duration(self, kind: str) -> float:
        lo, hi = self.task_durations.get(kind, (5.0, 5.0))
        return lo if lo == hi else self.rng.uniform(lo, hi)

    def _set_status(self, status: OperationalStatus) -> None:
        if status is self.status:
            return
        self.status = status
        self._report("status", status.value)

    def _send_task(self, command_id: str, phase: str, result: str, reason: str | None = None) -> None:
        payload: dict = {"command_id": command_id, "phase": phase, "result": result}
        if reason:
            payload["reason"] = reason
        self.broker.publish(
            f"robots/{self.robot_id}/task",
            json.dumps(payload, sort_keys=True).encode("utf-8"),
            publisher_id=self.robot_id,
            link=self.uplink,
            send_stamp="robot_send",
        )


@dataclass
class FleetHandle:
    robots: list[VirtualRobot]

    def by_id(self, robot_id: str) -> VirtualRobot:
        for robot in self.robots:
            if robot.robot_id == robot_id:
                return robot
        raise KeyError(robot_id)

    def stop(self) -> None:
        for robot in self.robots:
            robot.kill()


def spawn_fleet(
    n: int,
    *,
    service: FleetService,
    uplink_profile: LinkProfile,
    downlink_profile: LinkProfile,
    rng_seed: int = 0,
    end_ns: int | None = None,
    **robot_kwargs,
) -> FleetHandle:
    """Register n guide robots (ids g001..) and start them reporting.

    All robots share one downlink Link, drawn before any per-robot seed, so
    the downstream delay stream is identical across fleet sizes for one seed.
    """
    if n < 1:
        raise ValueError("fleet size must be >= 1")
    master = random.Random(rng_seed)
    width = max(3, len(str(n)))
    downlink = Link(downlink_profile, random.Random(master.getrandbits(64)))
    robots: list[VirtualRobot] = []
    for i in range(1, n + 1):
        robot_id = f"g{i:0{width}d}"
        service.register_robot(robot_id, RobotKind.GUIDE)
        robot = VirtualRobot(
            robot_id,
            RobotKind.GUIDE,
            service=service,
            rng=random.Random(master.getrandbits(64)),
            uplink=Link(uplink_profile, random.Random(master.getrandbits(64))),
            downlink_hops=((downlink, "robot_recv"),),
            end_ns=end_ns,
            **robot_kwargs,
        )
        robots.append(robot)
    for robot in robots:
        robot.start()
    return FleetHandle(robots=robots)
