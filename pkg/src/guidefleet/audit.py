"""Central structured audit trail.

Every API command, allocation decision, published command, task status and
job transition lands here automatically through the engine and gateway
plumbing; call sites never decide to log. The trail is what the scenario
reports and the operator tooling read back.
"""

from __future__ import annotations

import json
import logging
import threading
from pathlib import Path

from guidefleet.core.clock import Clock

logger = logging.getLogger("guidefleet.audit")


class AuditLog:
    def __init__(self, clock: Clock):
        self.clock = clock
        self._records: list[dict] = []
        self._lock = threading.Lock()

    def record(self, kind: str, **fields: object) -> dict:
        entry = {"at_ms": self.clock.wall(), "kind": kind, **fields}
        with self._lock:
            self._records.append(entry)
        logger.info("%s", json.dumps(entry, default=str, sort_keys=True))
        return entry

    def records(self, kind: str | None = None) -> list[dict]:
        with self._lock:
            items = list(self._records)
        if kind is not None:
            items = [r for r in items if r["kind"] == kind]
        return items

    def write_jsonl(self, path: Path) -> int:
        items = self.records()
        with open(path, "w", encoding="utf-8") as fh:
            for entry in items:
                fh.write(json.dumps(entry, default=str, sort_keys=True) + "\n")
        return len(items)
