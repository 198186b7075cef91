"""Latency benchmark harness: N virtual robots, relay stamps, leg statistics.

The measured pipeline is the production wiring (FleetService), not a mock:
position reports travel robot→broker→stream→app collecting four stamps, and
benchmark ping commands travel app→robot collecting two. Runs are fully
deterministic for one seed under the virtual clock.
"""

from __future__ import annotations

import json
import math
import random
import shutil
import statistics
import tempfile
import time
from collections import defaultdict
from dataclasses import dataclass, field

from guidefleet.broker.links import LinkProfile
from guidefleet.core.clock import SystemClock, VirtualClock
from guidefleet.core.envelope import Envelope
from guidefleet.core.errors import FleetError
from guidefleet.core.scheduling import RealTimeScheduler, VirtualScheduler
from guidefleet.fleetsim.robots import spawn_fleet
from guidefleet.gateway.service import INTERNAL_HOP, FleetService, ServiceSettings

_NS = 1_000_000_000

LEG_NAMES = ("robot_broker", "broker_stream", "stream_app", "app_robot")


class EmptySamples(FleetError):
    pass


@dataclass(frozen=True)
class LegStats:
    mean: float
    p50: float
    p95: float
    p99: float
    max_ms: float
    sample_count: int

    def to_dict(self) -> dict:
        return {
            "mean_ms": self.mean,
            "p50_ms": self.p50,
            "p95_ms": self.p95,
            "p99_ms": self.p99,
            "max_ms": self.max_ms,
            "sample_count": self.sample_count,
        }


def compute_stats(samples: list[float]) -> LegStats:
    """Mean plus nearest-rank percentiles over the sorted sample list."""
    if not samples:
        raise EmptySamples("no samples")
    ordered = sorted(samples)
    n = len(ordered)

    def rank(p: float) -> float:
        return ordered[max(0, math.ceil(p / 100.0 * n) - 1)]

    return LegStats(
        mean=sum(ordered) / n,
        p50=rank(50.0),
        p95=rank(95.0),
        p99=rank(99.0),
        max_ms=ordered[-1],
        sample_count=n,
    )


def detect_tail_samples(values: list[float]) -> tuple[set[int], float]:
    """Indices of samples above mean + 5 sigma of the base population.

    The base statistics are estimated by iterative trimming: flagged samples
    are excluded and the threshold recomputed until it stabilizes, so a
    handful of large spikes cannot inflate sigma enough to hide themselves.
    """
    flagged: set[int] = set()
    threshold = math.inf
    for _ in range(10):
        base = [v for i, v in enumerate(values) if i not in flagged]
        if len(base) < 2:
            break
        mu = statistics.fmean(base)
        sigma = statistics.pstdev(base)
        threshold = mu + 5.0 * sigma
        new_flagged = {i for i, v in enumerate(values) if v > threshold}
        if new_flagged == flagged:
            break
        flagged = new_flagged
    return flagged, threshold


@dataclass(frozen=True)
class BenchmarkConfig:
    n_robots: int
    duration_s: float = 600.0
    upstream: LinkProfile = field(
        default_factory=lambda: LinkProfile(base_delay_ms=(400.0, 550.0))
    )
    downstream: LinkProfile = field(
        default_factory=lambda: LinkProfile(base_delay_ms=(300.0, 400.0))
    )
    broker_hop: LinkProfile = INTERNAL_HOP
    stream_hop: LinkProfile = INTERNAL_HOP
    command_count: int = 10
    rng_seed: int = 0
    real_time: bool = False

    def __post_init__(self) -> None:
        if self.n_robots < 1:
            raise ValueError("n_robots must be >= 1")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if self.command_count < 1:
            raise ValueError("command_count must be >= 1")

    def to_dict(self) -> dict:
        def prof(p: LinkProfile) -> dict:
            return {
                "base_delay_ms": list(p.base_delay_ms),
                "tail_event_rate_per_min": p.tail_event_rate_per_min,
                "tail_delay_ms": list(p.tail_delay_ms),
                "loss_rate": p.loss_rate,
            }

        return {
            "n_robots": self.n_robots,
            "duration_s": self.duration_s,
            "upstream": prof(self.upstream),
            "downstream": prof(self.downstream),
            "broker_hop": prof(self.broker_hop),
            "stream_hop": prof(self.stream_hop),
            "command_count": self.command_count,
            "rng_seed": self.rng_seed,
            "real_time": self.real_time,
        }


@dataclass
class RoundTrip:
    t_s: float
    total_ms: float
    upstream_idx: int
    tail: bool = False


@dataclass
class LatencyReport:
    config: dict
    legs: dict[str, LegStats]
    upstream_total: LegStats
    end_to_end: LegStats
    interruption_count: int
    tail_event_count: int
    tail_threshold_ms: float
    sample_count: int
    expected_samples: int
    lost_count: int
    round_trips: list[RoundTrip]
    series: dict[str, list[tuple[float, float]]]  # leg -> [(t_s, latency_ms)]

    def to_dict(self) -> dict:
        non_tail = [rt.total_ms for rt in self.round_trips if not rt.tail]
        return {
            "config": self.config,
            "legs": {name: stats.to_dict() for name, stats in self.legs.items()},
            "upstream_total": self.upstream_total.to_dict(),
            "end_to_end": self.end_to_end.to_dict(),
            "interruption_count": self.interruption_count,
            "tail_event_count": self.tail_event_count,
            "tail_threshold_ms": self.tail_threshold_ms,
            "sample_count": self.sample_count,
            "expected_samples": self.expected_samples,
            "lost_count": self.lost_count,
            "round_trip_count": len(self.round_trips),
            "round_trip_max_ms": max((rt.total_ms for rt in self.round_trips), default=None),
            "non_tail_round_trip_max_ms": max(non_tail, default=None),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class _Collector:
    """Accumulates leg samples from stamped envelopes during one run."""

    def __init__(self, t0_ns: int, position_interval_s: float):
        self.t0 = t0_ns
        self.position_interval_s = position_interval_s
        self.rb: list[float] = []
        self.bs: list[float] = []
        self.sa: list[float] = []
        self.total: list[float] = []
        self.send_t: list[float] = []
        self.arrivals: dict[str, list[int]] = defaultdict(list)
        self.last_idx: dict[str, int] = {}
        self.pending_cmds: dict[str, int | None] = {}
        self.down: list[tuple[float, float]] = []
        self.round_trips: list[RoundTrip] = []

    def on_upstream(self, envelope: Envelope) -> None:
        stamps = dict(envelope.stamps)
        try:
            rs = stamps["robot_send"]
            br = stamps["broker_recv"]
            so = stamps["stream_out"]
            ar = stamps["app_recv"]
        except KeyError:
            return
        idx = len(self.total)
        self.rb.append((br - rs) / 1e6)
        self.bs.append((so - br) / 1e6)
        self.sa.append((ar - so) / 1e6)
        self.total.append((ar - rs) / 1e6)
        self.send_t.append((rs - self.t0) / 1e9)
        robot_id = envelope.topic.split("/")[1]
        self.arrivals[robot_id].append(ar)
        self.last_idx[robot_id] = idx

    def on_dispatch(self, command_id: str, robot_id: str) -> None:
        self.pending_cmds[command_id] = self.last_idx.get(robot_id)

    def on_command(self, robot_id: str, envelope: Envelope) -> None:
        try:
            command_id = json.loads(envelope.payload.decode("utf-8")).get("command_id")
        except (UnicodeDecodeError, json.JSONDecodeError):
            return
        if command_id not in self.pending_cmds:
            return
        stamps = dict(envelope.stamps)
        if "app_send" not in stamps or "robot_recv" not in stamps:
            return
        down_ms = (stamps["robot_recv"] - stamps["app_send"]) / 1e6
        t_s = (stamps["app_send"] - self.t0) / 1e9
        self.down.append((t_s, down_ms))
        upstream_idx = self.pending_cmds.pop(command_id)
        if upstream_idx is not None:
            self.round_trips.append(RoundTrip(t_s, self.total[upstream_idx] + down_ms, upstream_idx))

    def build_report(self, config: BenchmarkConfig, expected_samples: int) -> LatencyReport:
        if not self.total:
            raise EmptySamples("benchmark produced no upstream samples")
        tail_idx, threshold = detect_tail_samples(self.total)
        for rt in self.round_trips:
            rt.tail = rt.upstream_idx in tail_idx

        gap_limit_ns = int(3 * self.position_interval_s * _NS)
        interruptions = 0
        for arrivals in self.arrivals.values():
            for prev, cur in zip(arrivals, arrivals[1:]):
                if cur - prev > gap_limit_ns:
                    interruptions += 1

        down_values = [ms for _, ms in self.down]
        upstream_total = compute_stats(self.total)
        down_stats = compute_stats(down_values) if down_values else None
        rt_values = [rt.total_ms for rt in self.round_trips]
        if rt_values and down_stats:
            rt_stats = compute_stats(rt_values)
            end_to_end = LegStats(
                mean=upstream_total.mean + down_stats.mean,
                p50=rt_stats.p50,
                p95=rt_stats.p95,
                p99=rt_stats.p99,
                max_ms=rt_stats.max_ms,
                sample_count=rt_stats.sample_count,
            )
        else:
            end_to_end = upstream_total

        legs = {
            "robot_broker": compute_stats(self.rb),
            "broker_stream": compute_stats(self.bs),
            "stream_app": compute_stats(self.sa),
            "app_robot": down_stats or LegStats(0.0, 0.0, 0.0, 0.0, 0.0, 0),
        }
        series = {
            "robot_broker": list(zip(self.send_t, self.rb)),
            "broker_stream": list(zip(self.send_t, self.bs)),
            "stream_app": list(zip(self.send_t, self.sa)),
            "upstream": list(zip(self.send_t, self.total)),
            "app_robot": list(self.down),
            "end_to_end": [(rt.t_s, rt.total_ms) for rt in self.round_trips],
        }
        return LatencyReport(
            config=config.to_dict(),
            legs=legs,
            upstream_total=upstream_total,
            end_to_end=end_to_end,
            interruption_count=interruptions,
            tail_event_count=len(tail_idx),
            tail_threshold_ms=threshold if threshold != math.inf else 0.0,
            sample_count=len(self.total),
            expected_samples=expected_samples,
            lost_count=expected_samples - len(self.total),
            round_trips=self.round_trips,
            series=series,
        )


def run_benchmark(config: BenchmarkConfig) -> LatencyReport:
    """Run the N-robot communication performance test and return its report."""
    if config.real_time:
        return _run(config, real_time=True)
    return _run(config, real_time=False)


def _run(config: BenchmarkConfig, real_time: bool) -> LatencyReport:
    if real_time:
        clock = SystemClock()
        scheduler = RealTimeScheduler(clock)
    else:
        clock = VirtualClock()
        scheduler = VirtualScheduler(clock)

    tmp = tempfile.mkdtemp(prefix="guidefleet-bench-")
    try:
        master = random.Random(config.rng_seed)
        settings = ServiceSettings(
            vault_root=tmp,
            broker_hop=config.broker_hop,
            # tail events live on the stream-out hop; the config carries them
            # on the upstream profile since they are an upstream phenomenon
            stream_hop=LinkProfile(
                base_delay_ms=config.stream_hop.base_delay_ms,
                tail_event_rate_per_min=config.upstream.tail_event_rate_per_min,
                tail_delay_ms=config.upstream.tail_delay_ms,
                loss_rate=config.stream_hop.loss_rate,
            ),
            app_hop=config.broker_hop,
            rng_seed=master.getrandbits(64),
        )
        service = FleetService(clock, scheduler, settings)
        t0 = clock.now()
        collector = _Collector(t0, settings.reporting.position_interval_s)
        service.stats_sink = collector.on_upstream

        uplink_profile = LinkProfile(
            base_delay_ms=config.upstream.base_delay_ms,
            loss_rate=config.upstream.loss_rate,
        )
        end_ns = t0 + int(config.duration_s * _NS)
        fleet = spawn_fleet(
            config.n_robots,
            service=service,
            uplink_profile=uplink_profile,
            downlink_profile=config.downstream,
            rng_seed=master.getrandbits(64),
            end_ns=end_ns,
        )
        for robot in fleet.robots:
            robot.on_command_stamped = collector.on_command

        for k in range(config.command_count):
            due = t0 + int((k + 1) * config.duration_s / (config.command_count + 1) * _NS)
            target = fleet.robots[k % config.n_robots].robot_id
            command_id = f"bench-c{k:03d}"

            def _dispatch(target: str = target, command_id: str = command_id) -> None:
                collector.on_dispatch(command_id, target)
                service.broker.publish(
                    f"robots/{target}/cmd",
                    json.dumps({"command_id": command_id, "kind": "ping"}, sort_keys=True).encode("utf-8"),
                    publisher_id="app",
                    link=service.app_link,
                    send_stamp="app_send",
                )

            scheduler.schedule_at(due, _dispatch)

        if real_time:
            scheduler.start()
            time.sleep(config.duration_s)
            fleet.stop()
            time.sleep(3.0)  # drain in-flight deliveries
            scheduler.stop()
        else:
            scheduler.run_until(end_ns)
            scheduler.run_until_idle(end_ns + 30 * _NS)

        expected = sum(robot.position_reports_sent for robot in fleet.robots)
        return collector.build_report(config, expected)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
