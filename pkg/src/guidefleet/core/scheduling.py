"""Event schedulers: a deterministic virtual-time engine and a real-time thread.

The virtual scheduler executes callbacks in a total order (due time, then
insertion order), which is what makes whole simulation runs reproducible
bit-for-bit from one seed.
"""

from __future__ import annotations

import heapq
import threading
from typing import Callable, Protocol

from guidefleet.core.clock import SystemClock, VirtualClock


class Scheduler(Protocol):
    def schedule_at(self, t_ns: int, fn: Callable[[], None]) -> None: ...


class VirtualScheduler:
    """Priority-queue scheduler driving a VirtualClock.

    Callbacks run synchronously inside run_until(); anything they schedule
    lands back on the same heap, so the caller fully controls time.
    """

    def __init__(self, clock: VirtualClock):
        self.clock = clock
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._counter = 0

    def schedule_at(self, t_ns: int, fn: Callable[[], None]) -> None:
        if t_ns < self.clock.now():
            t_ns = self.clock.now()
        self._counter += 1
        heapq.heappush(self._heap, (t_ns, self._counter, fn))

    def schedule_after(self, delay_ns: int, fn: Callable[[], None]) -> None:
        self.schedule_at(self.clock.now() + delay_ns, fn)

    def run_until(self, t_ns: int) -> int:
        """Execute every event due at or before t_ns; advance the clock to t_ns.

        Returns the number of events executed.
        """
        executed = 0
        while self._heap and self._heap[0][0] <= t_ns:
            due, _, fn = heapq.heappop(self._heap)
            if due > self.clock.now():
                self.clock.advance_to(due)
            fn()
            executed += 1
        if t_ns > self.clock.now():
            self.clock.advance_to(t_ns)
        return executed

    def run_until_idle(self, max_t_ns: int) -> int:
        """Run events in due order until the heap empties or max_t_ns is hit."""
        executed = 0
        while self._heap and self._heap[0][0] <= max_t_ns:
            due, _, fn = heapq.heappop(self._heap)
            if due > self.clock.now():
                self.clock.advance_to(due)
            fn()
            executed += 1
        return executed

    def pending(self) -> int:
        return len(self._heap)


class RealTimeScheduler:
    """Background-thread scheduler keyed to the OS monotonic clock."""

    def __init__(self, clock: SystemClock | None = None):
        self.clock = clock or SystemClock()
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._counter = 0
        self._cond = threading.Condition()
        self._stopped = False
        self._thread = threading.Thread(target=self._run, name="guidefleet-sched", daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        with self._cond:
            self._stopped = True
            self._cond.notify_all()
        if self._thread.is_alive():
            self._thread.join(timeout=2.0)

    def schedule_at(self, t_ns: int, fn: Callable[[], None]) -> None:
        with self._cond:
            if self._stopped:
                return
            self._counter += 1
            heapq.heappush(self._heap, (t_ns, self._counter, fn))
            self._cond.notify_all()

    def schedule_after(self, delay_ns: int, fn: Callable[[], None]) -> None:
        self.schedule_at(self.clock.now() + delay_ns, fn)

    def _run(self) -> None:
        while True:
            with self._cond:
                while not self._stopped and (not self._heap or self._heap[0][0] > self.clock.now()):
                    if self._heap:
                        wait_s = max(0.0, (self._heap[0][0] - self.clock.now()) / 1e9)
                        self._cond.wait(timeout=min(wait_s, 0.5))
                    else:
                        self._cond.wait(timeout=0.5)
                if self._stopped:
                    return
                _, _, fn = heapq.heappop(self._heap)
            try:
                fn()
            except Exception:  # noqa: BLE001 - a broken callback must not kill the loop
                import logging

                logging.getLogger("guidefleet.scheduler").exception("scheduled task failed")
