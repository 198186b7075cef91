"""Server configuration: parse-then-validate YAML with materialized defaults.

Unknown keys are rejected with their dotted path so typos fail loudly.
Environment overrides: FLEETD_BIND_ADDR, FLEETD_VAULT_KEY (hex), FLEETD_CONFIG.
"""

from __future__ import annotations

import os
import secrets
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from guidefleet.allocator import AllocationPolicy
from guidefleet.broker.links import LinkProfile
from guidefleet.core.errors import FleetError
from guidefleet.core.types import Position
from guidefleet.gateway.service import DEFAULT_DESTINATIONS, ServiceSettings
from guidefleet.jobflow.model import TaskTimeouts
from guidefleet.shadow import ReportingPolicy


class ConfigError(FleetError):
    pass


@dataclass(frozen=True)
class SimConfig:
    robots: int = 0
    reception_robots: int = 1
    seed: int = 0


@dataclass(frozen=True)
class Config:
    bind_addr: str = "127.0.0.1:8080"
    vault_root: str = "./vault"
    vault_key_hex: str | None = None
    vault_retention_s: int = 86_400
    allocation: AllocationPolicy = field(default_factory=AllocationPolicy)
    queue_cap: int = 16
    reporting: ReportingPolicy = field(default_factory=ReportingPolicy)
    timeouts: TaskTimeouts = field(default_factory=TaskTimeouts)
    poll_interval_s: float = 2.0
    destinations: dict[str, Position] = field(default_factory=lambda: dict(DEFAULT_DESTINATIONS))
    upstream: LinkProfile = field(default_factory=lambda: LinkProfile(base_delay_ms=(400.0, 550.0)))
    downstream: LinkProfile = field(default_factory=lambda: LinkProfile(base_delay_ms=(300.0, 400.0)))
    sim: SimConfig = field(default_factory=SimConfig)

    def host_port(self) -> tuple[str, int]:
        host, _, port = self.bind_addr.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"bind_addr must be host:port, got {self.bind_addr!r}")
        return host, int(port)

    def vault_key(self) -> bytes:
        if self.vault_key_hex is None:
            return secrets.token_bytes(32)  # ephemeral key; blobs die with the process
        try:
            key = bytes.fromhex(self.vault_key_hex)
        except ValueError as exc:
            raise ConfigError(f"vault key is not valid hex: {exc}") from exc
        if len(key) != 32:
            raise ConfigError(f"vault key must be 32 bytes (64 hex chars), got {len(key)}")
        return key

    def to_service_settings(self, rng_seed: int = 0) -> ServiceSettings:
        return ServiceSettings(
            destinations=dict(self.destinations),
            reporting=self.reporting,
            allocation=self.allocation,
            timeouts=self.timeouts,
            poll_interval_s=self.poll_interval_s,
            queue_cap=self.queue_cap,
            vault_root=self.vault_root,
            vault_key=self.vault_key(),
            rng_seed=rng_seed,
        )

    def to_dict(self) -> dict:
        """Config with every default materialized; parse(to_dict()) is a fixpoint."""
        return {
            "bind_addr": self.bind_addr,
            "vault": {
                "root": self.vault_root,
                "key_hex": self.vault_key_hex,
                "retention_s": self.vault_retention_s,
            },
            "allocation": {
                "min_battery_pct": self.allocation.min_battery_pct,
                "require_fresh_shadow": self.allocation.require_fresh_shadow,
                "queue_cap": self.queue_cap,
            },
            "reporting": {
                "position_interval_s": self.reporting.position_interval_s,
                "battery_interval_s": self.reporting.battery_interval_s,
                "mileage_interval_s": self.reporting.mileage_interval_s,
                "staleness_factor": self.reporting.staleness_factor,
            },
            "timeouts": {
                "pickup_s": self.timeouts.pickup_s,
                "guiding_s": self.timeouts.guiding_s,
                "returning_s": self.timeouts.returning_s,
            },
            "poll_interval_s": self.poll_interval_s,
            "destinations": {
                dest_id: {"x": p.x, "y": p.y, "floor": p.floor} for dest_id, p in self.destinations.items()
            },
            "links": {
                "upstream": _profile_dict(self.upstream),
                "downstream": _profile_dict(self.downstream),
            },
            "sim": {
                "robots": self.sim.robots,
                "reception_robots": self.sim.reception_robots,
                "seed": self.sim.seed,
            },
        }


def _profile_dict(p: LinkProfile) -> dict:
    return {
        "base_ms": list(p.base_delay_ms),
        "tail_rate_per_min": p.tail_event_rate_per_min,
        "tail_ms": list(p.tail_delay_ms),
        "loss_rate": p.loss_rate,
    }


def _take(raw: dict, path: str, known: set[str]) -> None:
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} under {path or 'top level'}")


def _parse_profile(raw: dict, path: str, default: LinkProfile) -> LinkProfile:
    _take(raw, path, {"base_ms", "tail_rate_per_min", "tail_ms", "loss_rate"})
    try:
        return LinkProfile(
            base_delay_ms=tuple(raw.get("base_ms", default.base_delay_ms)),  # type: ignore[arg-type]
            tail_event_rate_per_min=float(raw.get("tail_rate_per_min", default.tail_event_rate_per_min)),
            tail_delay_ms=tuple(raw.get("tail_ms", default.tail_delay_ms)),  # type: ignore[arg-type]
            loss_rate=float(raw.get("loss_rate", default.loss_rate)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(data: dict | None) -> Config:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _take(
        data,
        "",
        {"bind_addr", "vault", "allocation", "reporting", "timeouts", "poll_interval_s", "destinations", "links", "sim"},
    )
    defaults = Config()
    try:
        vault = data.get("vault", {})
        _take(vault, "vault", {"root", "key_hex", "retention_s"})
        alloc = data.get("allocation", {})
        _take(alloc, "allocation", {"min_battery_pct", "require_fresh_shadow", "queue_cap"})
        reporting = data.get("reporting", {})
        _take(
            reporting,
            "reporting",
            {"position_interval_s", "battery_interval_s", "mileage_interval_s", "staleness_factor"},
        )
        timeouts = data.get("timeouts", {})
        _take(timeouts, "timeouts", {"pickup_s", "guiding_s", "returning_s"})
        sim = data.get("sim", {})
        _take(sim, "sim", {"robots", "reception_robots", "seed"})

        destinations = dict(DEFAULT_DESTINATIONS)
        if "destinations" in data:
            destinations = {}
            for dest_id, raw in data["destinations"].items():
                _take(raw, f"destinations.{dest_id}", {"name", "x", "y", "floor"})
                destinations[str(dest_id)] = Position(
                    x=float(raw["x"]), y=float(raw["y"]), floor=int(raw.get("floor", 0))
                )
        links = data.get("links", {})
        _take(links, "links", {"upstream", "downstream"})

        return Config(
            bind_addr=str(data.get("bind_addr", defaults.bind_addr)),
            vault_root=str(vault.get("root", defaults.vault_root)),
            vault_key_hex=vault.get("key_hex"),
            vault_retention_s=int(vault.get("retention_s", defaults.vault_retention_s)),
            allocation=AllocationPolicy(
                min_battery_pct=float(alloc.get("min_battery_pct", 30.0)),
                require_fresh_shadow=bool(alloc.get("require_fresh_shadow", True)),
            ),
            queue_cap=int(alloc.get("queue_cap", defaults.queue_cap)),
            reporting=ReportingPolicy(
                position_interval_s=float(reporting.get("position_interval_s", 2.0)),
                battery_interval_s=float(reporting.get("battery_interval_s", 10.0)),
                mileage_interval_s=float(reporting.get("mileage_interval_s", 10.0)),
                staleness_factor=float(reporting.get("staleness_factor", 3.0)),
            ),
            timeouts=TaskTimeouts(
                pickup_s=float(timeouts.get("pickup_s", 120.0)),
                guiding_s=float(timeouts.get("guiding_s", 600.0)),
                returning_s=float(timeouts.get("returning_s", 600.0)),
            ),
            poll_interval_s=float(data.get("poll_interval_s", 2.0)),
            destinations=destinations,
            upstream=_parse_profile(links.get("upstream", {}), "links.upstream", defaults.upstream),
            downstream=_parse_profile(links.get("downstream", {}), "links.downstream", defaults.downstream),
            sim=SimConfig(
                robots=int(sim.get("robots", 0)),
                reception_robots=int(sim.get("reception_robots", 1)),
                seed=int(sim.get("seed", 0)),
            ),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def load_config(path: str | Path | None) -> Config:
    """Load YAML config (or defaults), then apply environment overrides."""
    if path is None:
        path = os.environ.get("FLEETD_CONFIG")
    data: dict | None = None
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    config = parse_config(data)

    bind = os.environ.get("FLEETD_BIND_ADDR")
    key = os.environ.get("FLEETD_VAULT_KEY")
    if bind or key:
        from dataclasses import replace

        if bind:
            config = replace(config, bind_addr=bind)
        if key:
            config = replace(config, vault_key_hex=key)
    return config
