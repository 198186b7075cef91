"""Benchmark report output: delimited files plus rendered latency figures."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from guidefleet.core.errors import FleetError
from guidefleet.fleetsim.bench import LEG_NAMES, EmptySamples, LatencyReport


class IoFailure(FleetError):
    pass


_SERIES_ORDER = ("robot_broker", "broker_stream", "stream_app", "upstream", "app_robot", "end_to_end")
_SUMMARY_ORDER = (*LEG_NAMES, "end_to_end")


def emit_plots(report: LatencyReport, out_dir: Path | str) -> dict[str, Path]:
    """Write report.json, timeseries.csv, summary.csv and the latency figures."""
    if report.sample_count == 0:
        raise EmptySamples("report has no samples to plot")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "report": out / "report.json",
            "timeseries": out / "timeseries.csv",
            "summary": out / "summary.csv",
            "fig_timeseries": out / "latency_timeseries.png",
            "fig_summary": out / "latency_summary.png",
        }
        paths["report"].write_text(report.to_json(), encoding="utf-8")
        _write_timeseries(report, paths["timeseries"])
        _write_summary(report, paths["summary"])
        _plot_timeseries(report, paths["fig_timeseries"])
        _plot_summary(report, paths["fig_summary"])
        return paths
    except OSError as exc:
        raise IoFailure(f"cannot write report files under {out}: {exc}") from exc


def _write_timeseries(report: LatencyReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "leg", "latency_ms"])
        for leg in _SERIES_ORDER:
            for t_s, ms in report.series.get(leg, []):
                writer.writerow([f"{t_s:.3f}", leg, f"{ms:.3f}"])


def _write_summary(report: LatencyReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["leg", "mean_ms", "p50_ms", "p95_ms", "p99_ms", "max_ms", "samples"])
        for leg in _SUMMARY_ORDER:
            stats = report.end_to_end if leg == "end_to_end" else report.legs[leg]
            writer.writerow(
                [
                    leg,
                    f"{stats.mean:.3f}",
                    f"{stats.p50:.3f}",
                    f"{stats.p95:.3f}",
                    f"{stats.p99:.3f}",
                    f"{stats.max_ms:.3f}",
                    stats.sample_count,
                ]
            )


def _plot_timeseries(report: LatencyReport, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(8.0, 4.0))
    upstream = report.series.get("upstream", [])
    if upstream:
        ts, ms = zip(*upstream)
        ax.plot(ts, ms, ".", markersize=2, color="tab:blue", label="upstream")
    downstream = report.series.get("app_robot", [])
    if downstream:
        ts, ms = zip(*downstream)
        ax.plot(ts, ms, "o", markersize=5, color="tab:orange", label="downstream")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("latency (ms)")
    ax.set_title(f"latency over time, {report.config['n_robots']} robots")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _plot_summary(report: LatencyReport, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    labels = list(_SUMMARY_ORDER)
    stats = [report.end_to_end if leg == "end_to_end" else report.legs[leg] for leg in labels]
    means = [s.mean for s in stats]
    p95s = [s.p95 for s in stats]
    xs = range(len(labels))
    ax.bar(xs, means, color="tab:blue", label="mean")
    ax.plot(xs, p95s, "k_", markersize=18, label="p95")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=20, fontsize=8)
    ax.set_ylabel("latency (ms)")
    ax.set_title(f"per-leg latency, {report.config['n_robots']} robots")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
