"""Monotonic/wall clock handles.

All latency math in this package uses the monotonic source only; wall time
exists for display and for expiry timestamps that must survive restarts.
"""

from __future__ import annotations

import threading
import time
from typing import Protocol


class Clock(Protocol):
    def now(self) -> int:
        """Monotonic time in nanoseconds. Never decreases."""
        ...

    def wall(self) -> int:
        """Unix wall time in milliseconds."""
        ...


class SystemClock:
    """Real clock backed by the OS monotonic and wall sources."""

    def now(self) -> int:
        return time.monotonic_ns()

    def wall(self) -> int:
        return int(time.time() * 1000)


class VirtualClock:
    """Manually advanced clock for deterministic simulation runs.

    Starts at a nonzero epoch so a zero timestamp always means "never set".
    Safe for concurrent reads; only the owning scheduler advances it.
    """

    def __init__(self, start_ns: int = 1_000_000_000, wall_base_ms: int = 1_700_000_000_000):
        self._now_ns = start_ns
        self._start_ns = start_ns
        self._wall_base_ms = wall_base_ms
        self._lock = threading.Lock()

    def now(self) -> int:
        return self._now_ns

    def wall(self) -> int:
        return self._wall_base_ms + (self._now_ns - self._start_ns) // 1_000_000

    def advance_to(self, t_ns: int) -> None:
        with self._lock:
            if t_ns < self._now_ns:
                raise ValueError(f"virtual clock cannot go backwards: {t_ns} < {self._now_ns}")
            self._now_ns = t_ns

    def elapsed_s(self) -> float:
        return (self._now_ns - self._start_ns) / 1e9
