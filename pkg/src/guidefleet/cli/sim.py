"""fleetsim: benchmark and scenario drivers writing report files."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from guidefleet.broker.links import LinkProfile
from guidefleet.core.errors import FleetError
from guidefleet.fleetsim.bench import BenchmarkConfig, run_benchmark
from guidefleet.fleetsim.plots import emit_plots
from guidefleet.fleetsim.scenario import run_scenario


def _print_summary(report) -> None:
    print(f"{'leg':<16}{'mean_ms':>10}{'p95_ms':>10}{'p99_ms':>10}{'samples':>10}")
    for leg in ("robot_broker", "broker_stream", "stream_app", "app_robot"):
        s = report.legs[leg]
        print(f"{leg:<16}{s.mean:>10.1f}{s.p95:>10.1f}{s.p99:>10.1f}{s.sample_count:>10}")
    s = report.end_to_end
    print(f"{'end_to_end':<16}{s.mean:>10.1f}{s.p95:>10.1f}{s.p99:>10.1f}{s.sample_count:>10}")
    print(
        f"interruptions={report.interruption_count} tail_events={report.tail_event_count} "
        f"lost={report.lost_count}/{report.expected_samples}"
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fleetsim", description="virtual fleet benchmark and scenario harness")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run the N-robot latency benchmark")
    bench.add_argument("--robots", type=int, required=True)
    bench.add_argument("--duration", type=float, default=600.0, help="run length in (virtual) seconds")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--commands", type=int, default=10, help="downstream commands during the run")
    bench.add_argument("--up-ms", type=float, nargs=2, default=(400.0, 550.0), metavar=("LO", "HI"))
    bench.add_argument("--down-ms", type=float, nargs=2, default=(300.0, 400.0), metavar=("LO", "HI"))
    bench.add_argument("--tail-rate", type=float, default=0.0, help="tail events per minute on the stream hop")
    bench.add_argument("--tail-ms", type=float, nargs=2, default=(1200.0, 1800.0), metavar=("LO", "HI"))
    bench.add_argument("--loss", type=float, default=0.0, help="uplink loss probability")
    bench.add_argument("--real-time", action="store_true", help="run on the wall clock instead of virtual time")
    bench.add_argument("--out", default="bench-out", help="directory for report/CSV/figure files")

    scenario = sub.add_parser("scenario", help="run a scripted end-to-end scenario")
    scenario.add_argument("--script", required=True, help="path to the scenario JSON file")
    scenario.add_argument("--out", default="scenario-out")

    args = parser.parse_args(argv)

    if args.command == "bench":
        try:
            config = BenchmarkConfig(
                n_robots=args.robots,
                duration_s=args.duration,
                upstream=LinkProfile(
                    base_delay_ms=tuple(args.up_ms),
                    tail_event_rate_per_min=args.tail_rate,
                    tail_delay_ms=tuple(args.tail_ms),
                    loss_rate=args.loss,
                ),
                downstream=LinkProfile(base_delay_ms=tuple(args.down_ms)),
                command_count=args.commands,
                rng_seed=args.seed,
                real_time=args.real_time,
            )
        except ValueError as exc:
            print(f"fleetsim: invalid arguments: {exc}", file=sys.stderr)
            return 1
        report = run_benchmark(config)
        paths = emit_plots(report, args.out)
        _print_summary(report)
        print(f"wrote {', '.join(str(p) for p in paths.values())}")
        return 0

    try:
        report = run_scenario(Path(args.script), out_dir=args.out)
    except (FleetError, OSError, ValueError) as exc:
        print(f"fleetsim: scenario failed: {exc}", file=sys.stderr)
        return 1
    print(f"jobs: {report.terminal_counts}")
    print(f"wrote {args.out}/report.json and {args.out}/function_log.jsonl")
    return 0


if __name__ == "__main__":
    sys.exit(main())
