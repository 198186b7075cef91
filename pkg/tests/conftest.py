"""Shared fixtures: virtual-clock harness and a live uvicorn server."""

from __future__ import annotations

import random
import socket
import threading
import time
from dataclasses import dataclass, replace

import pytest

from guidefleet.broker.links import Link, LinkProfile
from guidefleet.core.clock import SystemClock, VirtualClock
from guidefleet.core.scheduling import RealTimeScheduler, VirtualScheduler
from guidefleet.core.types import RobotKind
from guidefleet.fleetsim.robots import VirtualRobot
from guidefleet.gateway.api import create_app
from guidefleet.gateway.service import FleetService, ServiceSettings
from guidefleet.jobflow.model import TaskTimeouts

_NS = 1_000_000_000

FAST_UPLINK = LinkProfile(base_delay_ms=(5.0, 10.0))
FAST_DOWNLINK = LinkProfile(base_delay_ms=(5.0, 10.0))


@dataclass
class VirtualHarness:
    clock: VirtualClock
    scheduler: VirtualScheduler
    service: FleetService
    robots: dict

    def run(self, seconds: float) -> None:
        self.scheduler.run_until(self.clock.now() + int(seconds * _NS))

    def add_robot(
        self,
        robot_id: str,
        kind: RobotKind = RobotKind.GUIDE,
        *,
        seed: int = 0,
        start: bool = True,
        **kwargs,
    ) -> VirtualRobot:
        self.service.register_robot(robot_id, kind)
        downlink = Link(FAST_DOWNLINK, random.Random(seed + 1))
        robot = VirtualRobot(
            robot_id,
            kind,
            service=self.service,
            rng=random.Random(seed),
            uplink=Link(FAST_UPLINK, random.Random(seed + 2)),
            downlink_hops=((downlink, "robot_recv"),),
            **kwargs,
        )
        self.robots[robot_id] = robot
        if start:
            robot.start()
        return robot


def make_harness(tmp_path, **settings_overrides) -> VirtualHarness:
    clock = VirtualClock()
    scheduler = VirtualScheduler(clock)
    defaults = dict(
        vault_root=str(tmp_path / "vault"),
        timeouts=TaskTimeouts(pickup_s=30.0, guiding_s=60.0, returning_s=60.0),
    )
    defaults.update(settings_overrides)
    service = FleetService(clock, scheduler, ServiceSettings(**defaults))
    return VirtualHarness(clock=clock, scheduler=scheduler, service=service, robots={})


@pytest.fixture
def harness(tmp_path) -> VirtualHarness:
    return make_harness(tmp_path)


@pytest.fixture
def client(harness):
    from fastapi.testclient import TestClient

    return TestClient(create_app(harness.service))


@dataclass
class LiveServer:
    base_url: str
    service: FleetService
    scheduler: RealTimeScheduler


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="session")
def live_server(tmp_path_factory):
    """Real uvicorn server with fast-reporting sim robots, for client/SSE tests."""
    import httpx
    import uvicorn

    from guidefleet.shadow import ReportingPolicy

    root = tmp_path_factory.mktemp("live")
    clock = SystemClock()
    scheduler = RealTimeScheduler(clock)
    settings = ServiceSettings(
        vault_root=str(root / "vault"),
        reporting=ReportingPolicy(
            position_interval_s=0.2, battery_interval_s=0.5, mileage_interval_s=0.5
        ),
        poll_interval_s=0.2,
        timeouts=TaskTimeouts(pickup_s=10.0, guiding_s=10.0, returning_s=10.0),
    )
    service = FleetService(clock, scheduler, settings)
    scheduler.start()

    service.register_robot("r01", RobotKind.RECEPTION)
    fast_tasks = {"pickup": (0.2, 0.4), "guide": (0.3, 0.6), "return": (0.2, 0.4)}
    robots = []
    for i, robot_id in enumerate(["g001", "g002"]):
        service.register_robot(robot_id, RobotKind.GUIDE)
        robot = VirtualRobot(
            robot_id,
            RobotKind.GUIDE,
            service=service,
            rng=random.Random(100 + i),
            uplink=Link(LinkProfile(base_delay_ms=(1.0, 3.0)), random.Random(200 + i)),
            downlink_hops=((Link(LinkProfile(base_delay_ms=(1.0, 3.0)), random.Random(300 + i)), "robot_recv"),),
            task_durations=fast_tasks,
        )
        robot.start()
        robots.append(robot)

    port = _free_port()
    config = uvicorn.Config(create_app(service, heartbeat_s=1.0), host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()

    base_url = f"http://127.0.0.1:{port}"
    deadline = time.time() + 10
    while time.time() < deadline:
        try:
            if httpx.get(f"{base_url}/healthz", timeout=1.0).status_code == 200:
                break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        raise RuntimeError("live server did not start")

    # wait until both guide robots have fresh, eligible shadows
    deadline = time.time() + 10
    while time.time() < deadline:
        shadows = httpx.get(f"{base_url}/v1/robots", timeout=2.0).json()
        guides = [s for s in shadows if s["kind"] == "guide"]
        if guides and all(s["effective_status"] == "idle" for s in guides) and all(
            s["fields"]["mileage"]["reported"] and s["fields"]["battery"]["reported"] for s in guides
        ):
            break
        time.sleep(0.1)

    yield LiveServer(base_url=base_url, service=service, scheduler=scheduler)

    server.should_exit = True
    thread.join(timeout=5)
    for robot in robots:
        robot.kill()
    service.shutdown()
    scheduler.stop()
