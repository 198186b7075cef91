"""fleetd: run the fleet management server until signalled.

Exit codes: 0 clean shutdown, 1 bad config, 2 bind failure.
"""

from __future__ import annotations

import argparse
import random
import socket
import sys

from guidefleet.cli.config import Config, ConfigError, load_config


def build_runtime(config: Config):
    """Construct the live service, its HTTP app, and an optional demo fleet."""
    import uvicorn

    from guidefleet.broker.links import Link, LinkProfile
    from guidefleet.core.clock import SystemClock
    from guidefleet.core.scheduling import RealTimeScheduler
    from guidefleet.core.types import RobotKind
    from guidefleet.fleetsim.robots import VirtualRobot, spawn_fleet
    from guidefleet.gateway.api import create_app
    from guidefleet.gateway.service import FleetService

    clock = SystemClock()
    scheduler = RealTimeScheduler(clock)
    service = FleetService(clock, scheduler, config.to_service_settings(rng_seed=config.sim.seed))
    app = create_app(service)

    fleet = None
    if config.sim.robots > 0:
        master = random.Random(config.sim.seed)
        uplink = LinkProfile(base_delay_ms=config.upstream.base_delay_ms, loss_rate=config.upstream.loss_rate)
        for i in range(1, config.sim.reception_robots + 1):
            robot_id = f"r{i:02d}"
            service.register_robot(robot_id, RobotKind.RECEPTION)
            VirtualRobot(
                robot_id,
                RobotKind.RECEPTION,
                service=service,
                rng=random.Random(master.getrandbits(64)),
                uplink=Link(uplink, random.Random(master.getrandbits(64))),
            ).start()
        fleet = spawn_fleet(
            config.sim.robots,
            service=service,
            uplink_profile=uplink,
            downlink_profile=config.downstream,
            rng_seed=master.getrandbits(64),
        )
    return uvicorn, scheduler, service, app, fleet


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fleetd", description="guide-robot fleet management server")
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve", help="run the gateway and all services")
    serve.add_argument("--config", help="path to YAML config (or FLEETD_CONFIG)")
    serve.add_argument("--sim-robots", type=int, help="spawn N virtual guide robots for demos")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if args.sim_robots is not None:
            from dataclasses import replace

            from guidefleet.cli.config import SimConfig

            config = replace(config, sim=SimConfig(robots=args.sim_robots, seed=config.sim.seed))
        host, port = config.host_port()
        config.vault_key()  # validate before binding
    except ConfigError as exc:
        print(f"fleetd: config error: {exc}", file=sys.stderr)
        return 1

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        print(f"fleetd: cannot bind {host}:{port}: {exc}", file=sys.stderr)
        return 2
    finally:
        probe.close()

    uvicorn, scheduler, service, app, fleet = build_runtime(config)
    scheduler.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    finally:
        if fleet is not None:
            fleet.stop()
        service.shutdown()
        scheduler.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
