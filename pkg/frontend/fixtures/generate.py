"""Regenerate stream.json: a recorded monitor-event stream from a real run.

Ten guide robots, one reception robot, two guide requests; the second job
fails by an injected task fault, producing an error notification. Run from
the repo root with the guidefleet package installed:

    python3 frontend/fixtures/generate.py
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from guidefleet.broker.links import Link, LinkProfile
from guidefleet.core.clock import VirtualClock
from guidefleet.core.scheduling import VirtualScheduler
from guidefleet.core.types import Position, RobotKind
from guidefleet.fleetsim.robots import VirtualRobot
from guidefleet.gateway.api import create_app
from guidefleet.gateway.service import FleetService, ServiceSettings

_NS = 1_000_000_000
OUT = Path(__file__).parent / "stream.json"


def main() -> None:
    import tempfile

    clock = VirtualClock()
    scheduler = VirtualScheduler(clock)
    with tempfile.TemporaryDirectory() as tmp:
        service = FleetService(clock, scheduler, ServiceSettings(vault_root=tmp, rng_seed=5))
        from fastapi.testclient import TestClient

        client = TestClient(create_app(service))

        master = random.Random(5)
        uplink = LinkProfile(base_delay_ms=(60.0, 120.0))
        downlink = Link(LinkProfile(base_delay_ms=(50.0, 90.0)), random.Random(master.getrandbits(64)))
        robots = {}
        service.register_robot("r01", RobotKind.RECEPTION)
        robots["r01"] = VirtualRobot(
            "r01", RobotKind.RECEPTION, service=service,
            rng=random.Random(master.getrandbits(64)),
            uplink=Link(uplink, random.Random(master.getrandbits(64))),
            home=Position(5.0, 5.0, 0),
        )
        for i in range(1, 11):
            robot_id = f"g{i:02d}"
            service.register_robot(robot_id, RobotKind.GUIDE)
            robots[robot_id] = VirtualRobot(
                robot_id, RobotKind.GUIDE, service=service,
                rng=random.Random(master.getrandbits(64)),
                uplink=Link(uplink, random.Random(master.getrandbits(64))),
                downlink_hops=((downlink, "robot_recv"),),
                home=Position(10.0 + 8.0 * i, 12.0, 0),
                initial_mileage_m=500.0 * i,
                task_durations={"pickup": (3, 5), "guide": (10, 15), "return": (6, 9)},
            )
        for robot in robots.values():
            robot.start()

        t0 = clock.now()
        scheduler.run_until(t0 + 15 * _NS)
        client.post("/v1/guide-requests", json={"destination_id": "atrium", "reception_robot": "r01"})
        scheduler.run_until(t0 + 20 * _NS)
        client.post("/v1/guide-requests", json={"destination_id": "north-gate", "reception_robot": "r01"})
        robots["g02"].fail_phase("guide")  # second job lands on g02 (lowest free mileage)
        scheduler.run_until(t0 + 80 * _NS)

        events = [e.to_dict() for e in service.hub.buffered()]
        OUT.write_text(json.dumps(events, indent=None, sort_keys=True), encoding="utf-8")
        print(f"wrote {OUT} with {len(events)} events")
        states = {j.job_id: j.state.value for j in service.engine.list_jobs()}
        print("job states:", states)


if __name__ == "__main__":
    main()
