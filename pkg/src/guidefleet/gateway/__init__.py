"""Network surface: REST API, SSE monitor stream, blob download endpoint."""

from guidefleet.gateway.events import EventHub, MonitorEvent
from guidefleet.gateway.service import FleetService

__all__ = ["EventHub", "MonitorEvent", "FleetService"]
