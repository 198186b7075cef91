"""Virtual robot fleet, latency benchmark harness, and scenario runner."""

from guidefleet.fleetsim.bench import (
    BenchmarkConfig,
    EmptySamples,
    LatencyReport,
    LegStats,
    compute_stats,
    run_benchmark,
)
from guidefleet.fleetsim.plots import emit_plots
from guidefleet.fleetsim.robots import FleetHandle, VirtualRobot, spawn_fleet
from guidefleet.fleetsim.scenario import ScenarioReport, ScenarioScript, ScriptInvalid, run_scenario

__all__ = [
    "BenchmarkConfig",
    "EmptySamples",
    "LatencyReport",
    "LegStats",
    "compute_stats",
    "run_benchmark",
    "emit_plots",
    "FleetHandle",
    "VirtualRobot",
    "spawn_fleet",
    "ScenarioReport",
    "ScenarioScript",
    "ScriptInvalid",
    "run_scenario",
]
