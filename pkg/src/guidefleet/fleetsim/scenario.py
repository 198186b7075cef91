"""Scenario runner: scripted guest requests and fault injections, end to end.

Requests enter through the real HTTP gateway (in-process client against the
FastAPI app); robots are virtual; time is virtual. The report carries every
job's terminal state, the allocation audit snapshots and the full
function-level data-flow log.
"""

from __future__ import annotations

import json
import random
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from guidefleet.broker.links import Link, LinkProfile
from guidefleet.core.clock import VirtualClock
from guidefleet.core.errors import FleetError
from guidefleet.core.scheduling import VirtualScheduler
from guidefleet.core.types import Position, RobotKind, validate_robot_id
from guidefleet.fleetsim.robots import DEFAULT_TASK_DURATIONS, VirtualRobot
from guidefleet.gateway.api import create_app
from guidefleet.gateway.service import DEFAULT_DESTINATIONS, FleetService, ServiceSettings
from guidefleet.jobflow.model import GuideJob

_NS = 1_000_000_000


class ScriptInvalid(FleetError):
    pass


@dataclass(frozen=True)
class ScriptRobot:
    robot_id: str
    kind: RobotKind = RobotKind.GUIDE
    home: Position = field(default_factory=lambda: Position(0.0, 0.0, 0))
    initial_mileage_m: float = 0.0
    initial_battery_pct: float = 100.0
    task_durations: dict[str, tuple[float, float]] | None = None


@dataclass(frozen=True)
class ScriptRequest:
    at_s: float
    destination_id: str
    reception_robot: str = "r01"
    blob_b64: str | None = None


@dataclass(frozen=True)
class ScriptFault:
    at_s: float
    robot_id: str
    kind: str  # offline | task_fail
    phase: str | None = None


@dataclass(frozen=True)
class ScenarioScript:
    robots: tuple[ScriptRobot, ...]
    requests: tuple[ScriptRequest, ...]
    faults: tuple[ScriptFault, ...] = ()
    destinations: dict[str, Position] | None = None
    upstream: LinkProfile = field(default_factory=lambda: LinkProfile(base_delay_ms=(400.0, 550.0)))
    downstream: LinkProfile = field(default_factory=lambda: LinkProfile(base_delay_ms=(300.0, 400.0)))
    seed: int = 0
    duration_cap_s: float = 1800.0
    queue_cap: int = 64


def _parse_durations(raw: dict | None) -> dict[str, tuple[float, float]] | None:
    if raw is None:
        return None
    out: dict[str, tuple[float, float]] = {}
    for phase, value in raw.items():
        if phase not in ("pickup", "guide", "return"):
            raise ScriptInvalid(f"unknown task phase {phase!r} in task_durations_s")
        if isinstance(value, (int, float)):
            out[phase] = (float(value), float(value))
        elif isinstance(value, (list, tuple)) and len(value) == 2:
            out[phase] = (float(value[0]), float(value[1]))
        else:
            raise ScriptInvalid(f"task duration for {phase!r} must be a number or [lo, hi]")
    return out


def parse_script(data: dict) -> ScenarioScript:
    """Validate a scenario dict (the JSON file schema) into a ScenarioScript."""
    if not isinstance(data, dict):
        raise ScriptInvalid("script must be a JSON object")
    known = {"robots", "requests", "faults", "destinations", "links", "seed", "duration_cap_s", "queue_cap", "task_durations_s"}
    unknown = set(data) - known
    if unknown:
        raise ScriptInvalid(f"unknown script keys: {sorted(unknown)}")

    default_durations = _parse_durations(data.get("task_durations_s"))
    robots: list[ScriptRobot] = []
    for i, raw in enumerate(data.get("robots", [])):
        try:
            robot_id = validate_robot_id(raw["id"])
            mileage_m = float(raw["mileage_km"]) * 1000.0 if "mileage_km" in raw else float(raw.get("mileage_m", 0.0))
            robots.append(
                ScriptRobot(
                    robot_id=robot_id,
                    kind=RobotKind(raw.get("kind", "guide")),
                    home=Position.from_dict(raw["home"]) if "home" in raw else Position(0.0, 0.0, 0),
                    initial_mileage_m=mileage_m,
                    initial_battery_pct=float(raw.get("battery_pct", 100.0)),
                    task_durations=_parse_durations(raw.get("task_durations_s")) or default_durations,
                )
            )
        except (KeyError, ValueError, FleetError) as exc:
            raise ScriptInvalid(f"robots[{i}]: {exc}") from exc

    requests: list[ScriptRequest] = []
    for i, raw in enumerate(data.get("requests", [])):
        try:
            at_s = float(raw["at_s"])
            if at_s < 0:
                raise ScriptInvalid("at_s must be >= 0")
            requests.append(
                ScriptRequest(
                    at_s=at_s,
                    destination_id=str(raw["destination_id"]),
                    reception_robot=str(raw.get("reception_robot", "r01")),
                    blob_b64=raw.get("blob_b64"),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ScriptInvalid(f"requests[{i}]: {exc}") from exc

    robot_ids = {r.robot_id for r in robots}
    faults: list[ScriptFault] = []
    for i, raw in enumerate(data.get("faults", [])):
        try:
            kind = str(raw["kind"])
            if kind not in ("offline", "task_fail"):
                raise ScriptInvalid(f"unknown fault kind {kind!r}")
            if raw["robot_id"] not in robot_ids:
                raise ScriptInvalid(f"fault references unknown robot {raw['robot_id']!r}")
            faults.append(
                ScriptFault(
                    at_s=float(raw["at_s"]),
                    robot_id=str(raw["robot_id"]),
                    kind=kind,
                    phase=raw.get("phase"),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ScriptInvalid(f"faults[{i}]: {exc}") from exc

    destinations = None
    if "destinations" in data:
        destinations = {}
        for dest_id, raw in data["destinations"].items():
            try:
                destinations[dest_id] = Position.from_dict(raw)
            except (KeyError, TypeError, ValueError) as exc:
                raise ScriptInvalid(f"destinations[{dest_id!r}]: {exc}") from exc

    links = data.get("links", {})

    def profile(raw: dict | None, default: tuple[float, float]) -> LinkProfile:
        if raw is None:
            return LinkProfile(base_delay_ms=default)
        return LinkProfile(
            base_delay_ms=tuple(raw.get("base_ms", default)),  # type: ignore[arg-type]
            tail_event_rate_per_min=float(raw.get("tail_rate_per_min", 0.0)),
            tail_delay_ms=tuple(raw.get("tail_ms", (1200.0, 1800.0))),  # type: ignore[arg-type]
            loss_rate=float(raw.get("loss_rate", 0.0)),
        )

    return ScenarioScript(
        robots=tuple(robots),
        requests=tuple(requests),
        faults=tuple(faults),
        destinations=destinations,
        upstream=profile(links.get("upstream"), (400.0, 550.0)),
        downstream=profile(links.get("downstream"), (300.0, 400.0)),
        seed=int(data.get("seed", 0)),
        duration_cap_s=float(data.get("duration_cap_s", 1800.0)),
        queue_cap=int(data.get("queue_cap", 64)),
    )


@dataclass
class ScenarioReport:
    jobs: list[dict]
    allocations: list[dict]
    notifications: list[dict]
    function_log: list[dict]
    reservation_log: list[dict]
    api_responses: list[dict]
    terminal_counts: dict[str, int]
    duration_s: float
    raw_jobs: list[GuideJob]

    def to_dict(self) -> dict:
        return {
            "jobs": self.jobs,
            "allocations": self.allocations,
            "notifications": self.notifications,
            "reservation_log": self.reservation_log,
            "api_responses": self.api_responses,
            "terminal_counts": self.terminal_counts,
            "duration_s": self.duration_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=str)

    def write(self, out_dir: Path | str) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report_path = out / "report.json"
        log_path = out / "function_log.jsonl"
        report_path.write_text(self.to_json(), encoding="utf-8")
        with open(log_path, "w", encoding="utf-8") as fh:
            for entry in self.function_log:
                fh.write(json.dumps(entry, sort_keys=True, default=str) + "\n")
        return {"report": report_path, "function_log": log_path}


def run_scenario(script: ScenarioScript | dict | str | Path, out_dir: Path | str | None = None) -> ScenarioReport:
    if isinstance(script, (str, Path)):
        script = parse_script(json.loads(Path(script).read_text(encoding="utf-8")))
    elif isinstance(script, dict):
        script = parse_script(script)

    clock = VirtualClock()
    scheduler = VirtualScheduler(clock)
    master = random.Random(script.seed)
    tmp = tempfile.mkdtemp(prefix="guidefleet-scenario-")
    try:
        destinations = dict(DEFAULT_DESTINATIONS)
        if script.destinations:
            destinations.update(script.destinations)
        settings = ServiceSettings(
            destinations=destinations,
            vault_root=tmp,
            queue_cap=script.queue_cap,
            rng_seed=master.getrandbits(64),
        )
        service = FleetService(clock, scheduler, settings)
        client_app = create_app(service)
        from fastapi.testclient import TestClient

        client = TestClient(client_app)

        # every reception robot referenced by a request exists, scripted or not
        script_robots = list(script.robots)
        known_ids = {r.robot_id for r in script_robots}
        for req in script.requests:
            if req.reception_robot not in known_ids:
                script_robots.append(ScriptRobot(robot_id=req.reception_robot, kind=RobotKind.RECEPTION))
                known_ids.add(req.reception_robot)

        downlink = Link(script.downstream, random.Random(master.getrandbits(64)))
        robots: dict[str, VirtualRobot] = {}
        uplink_profile = LinkProfile(
            base_delay_ms=script.upstream.base_delay_ms, loss_rate=script.upstream.loss_rate
        )
        for sr in script_robots:
            service.register_robot(sr.robot_id, sr.kind)
            robots[sr.robot_id] = VirtualRobot(
                sr.robot_id,
                sr.kind,
                service=service,
                rng=random.Random(master.getrandbits(64)),
                uplink=Link(uplink_profile, random.Random(master.getrandbits(64))),
                downlink_hops=((downlink, "robot_recv"),),
                home=sr.home,
                initial_mileage_m=sr.initial_mileage_m,
                initial_battery_pct=sr.initial_battery_pct,
                task_durations=sr.task_durations or DEFAULT_TASK_DURATIONS,
            )
        for robot in robots.values():
            robot.start()

        actions: list[tuple[float, int, str, object]] = []
        for i, req in enumerate(script.requests):
            actions.append((req.at_s, i, "request", req))
        for i, fault in enumerate(script.faults):
            actions.append((fault.at_s, i, "fault", fault))
        actions.sort(key=lambda a: (a[0], a[2], a[1]))

        t0 = clock.now()
        api_responses: list[dict] = []
        for at_s, _, kind, payload in actions:
            scheduler.run_until(t0 + int(at_s * _NS))
            if kind == "request":
                req: ScriptRequest = payload  # type: ignore[assignment]
                body = {
                    "destination_id": req.destination_id,
                    "reception_robot": req.reception_robot,
                }
                if req.blob_b64 is not None:
                    body["facial_blob_b64"] = req.blob_b64
                resp = client.post("/v1/guide-requests", json=body)
                api_responses.append({"at_s": at_s, "status": resp.status_code, "body": resp.json()})
            else:
                fault: ScriptFault = payload  # type: ignore[assignment]
                robot = robots[fault.robot_id]
                if fault.kind == "offline":
                    robot.kill()
                else:
                    robot.fail_phase(fault.phase or "guide")

        deadline = t0 + int(script.duration_cap_s * _NS)
        step = 5 * _NS
        while clock.now() < deadline:
            scheduler.run_until(min(clock.now() + step, deadline))
            if service.engine.jobs and service.engine.all_terminal():
                break
            if not service.engine.jobs and clock.now() >= t0 + int((max((a[0] for a in actions), default=0) + 10) * _NS):
                break

        raw_jobs = service.engine.list_jobs()
        terminal_counts: dict[str, int] = {}
        for job in raw_jobs:
            terminal_counts[job.state.value] = terminal_counts.get(job.state.value, 0) + 1
        report = ScenarioReport(
            jobs=[job.to_dict() for job in raw_jobs],
            allocations=service.audit.records("allocation"),
            notifications=service.audit.records("notification"),
            function_log=service.audit.records(),
            reservation_log=[
                {"action": e.action, "robot_id": e.robot_id, "job_id": e.job_id, "at_ns": e.at_ns}
                for e in service.reservations.log()
            ],
            api_responses=api_responses,
            terminal_counts=terminal_counts,
            duration_s=(clock.now() - t0) / _NS,
            raw_jobs=raw_jobs,
        )
        if out_dir is not None:
            report.write(out_dir)
        return report
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
